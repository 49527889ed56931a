use std::fs::File;
use std::io::{self, BufWriter, Write};

use nsegment::dataio::{scan_dataset, DiskSamples, PairingRule};
use nsegment::metrics::ConfusionAccumulator;
use nsegment::perturb::{
    odd_kernel_size, sweep, void_as_miss_miou, PerturbKind, PerturbSpec, PerturbTarget, SweepReport,
};
use nsegment::synthetic::{random_label, textured_image};
use nsegment::{Image, LabelMap, OmegaSpace, RngStream};

use crate::args::{init_pool, KindArg, MetricArg, PerturbArgs, PerturbTargetArg};
use crate::augment::report_scan;
use crate::error::{CliError, CliResult};

const SYNTHETIC_CLASSES: usize = 6;
const SYNTHETIC_SHAPES: usize = 8;

fn default_grid(kind: KindArg) -> &'static str {
    match kind {
        KindArg::Shift => "0,1,2,4,8",
        KindArg::Erode | KindArg::Dilate => "7,14,21,28,35",
        KindArg::Elastic => "1,15,30,50,100",
    }
}

fn parse_list<T: std::str::FromStr>(grid: &str) -> CliResult<Vec<T>> {
    grid.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad grid value {s:?}")))
        })
        .collect()
}

/// Expands `--kind` / `--grid` / `--sigma` into sweep specs.
pub fn build_grid(kind: KindArg, grid: Option<&str>, sigma: f64, target: PerturbTarget) -> CliResult<Vec<PerturbSpec>> {
    let grid = grid.unwrap_or(default_grid(kind));
    let kinds: Vec<PerturbKind> = match kind {
        KindArg::Shift => parse_list::<i64>(grid)?
            .into_iter()
            .map(|m| PerturbKind::Shift { dx: m, dy: m })
            .collect(),
        KindArg::Erode => parse_list::<usize>(grid)?
            .into_iter()
            .map(|k| PerturbKind::Erode { k: odd_kernel_size(k) })
            .collect(),
        KindArg::Dilate => parse_list::<usize>(grid)?
            .into_iter()
            .map(|k| PerturbKind::Dilate { k: odd_kernel_size(k) })
            .collect(),
        KindArg::Elastic if grid.contains('x') => {
            let omega: OmegaSpace = grid.parse()?;
            omega
                .pairs()
                .iter()
                .map(|p| PerturbKind::Elastic {
                    alpha: p.alpha,
                    sigma: p.sigma,
                })
                .collect()
        }
        KindArg::Elastic => parse_list::<f64>(grid)?
            .into_iter()
            .map(|alpha| PerturbKind::Elastic { alpha, sigma })
            .collect(),
    };
    let specs: Vec<PerturbSpec> = kinds.into_iter().map(|kind| PerturbSpec { kind, target }).collect();
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

/// Seeded stand-in dataset: shape label maps with textured images.
pub fn synthetic_samples(n: usize, size: usize, seed: u64) -> Vec<(Image, LabelMap)> {
    (0..n)
        .map(|i| {
            let mut rng = RngStream::substream(seed, &[u64::MAX, i as u64]);
            let label = random_label(size, size, SYNTHETIC_SHAPES, SYNTHETIC_CLASSES, &mut rng);
            let image = textured_image(&label, &mut rng);
            (image, label)
        })
        .collect()
}

pub fn run(args: PerturbArgs) -> CliResult<()> {
    init_pool(args.jobs)?;
    let target = match args.target {
        PerturbTargetArg::Label => PerturbTarget::LabelOnly,
        PerturbTargetArg::Sync => PerturbTarget::Synchronized,
    };
    let grid = build_grid(args.kind, args.grid.as_deref(), args.sigma, target)?;
    let choice = args.metric;
    let metric = move |acc: &ConfusionAccumulator| match choice {
        MetricArg::VoidAsMiss => void_as_miss_miou(acc),
        MetricArg::Miou => acc.miou().map(|r| r.mean),
    };

    let report: SweepReport = match &args.dataset.labels {
        Some(labels) => {
            let images = args.dataset.images.clone().unwrap_or_else(|| labels.clone());
            let pairing = PairingRule {
                image_suffix: args.dataset.image_suffix.clone().unwrap_or_default(),
                label_suffix: args.dataset.label_suffix.clone().unwrap_or_default(),
            };
            let scan = scan_dataset(&images, labels, &pairing)?;
            report_scan(&scan)?;
            let source = DiskSamples {
                records: scan.records,
                load_images: target == PerturbTarget::Synchronized,
            };
            sweep(&source, &grid, args.seed, &metric)?
        }
        None => {
            if args.synthetic == 0 || args.size == 0 {
                return Err(CliError::usage("--synthetic and --size must be positive"));
            }
            let source = synthetic_samples(args.synthetic, args.size, args.seed);
            sweep(source.as_slice(), &grid, args.seed, &metric)?
        }
    };

    for (i, msg) in &report.failures {
        eprintln!("failed: sample {i}: {msg}");
    }
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            report.write_csv(&mut w)?;
            w.flush()?;
        }
        None => report.write_csv(io::stdout().lock())?,
    }
    if !report.failures.is_empty() {
        return Err(CliError::io(format!("{} sample(s) failed", report.failures.len())));
    }
    Ok(())
}
