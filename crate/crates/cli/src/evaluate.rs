use std::fs::File;
use std::io::{BufWriter, Write};

use rayon::prelude::*;

use nsegment::dataio::{load_label, scan_dataset, PairingRule};
use nsegment::metrics::{ConfusionAccumulator, MiouReport};
use nsegment::IGNORE_INDEX;

use crate::args::{init_pool, EvaluateArgs};
use crate::error::{CliError, CliResult};

/// Dataset-wide tally plus the highest class value seen on either side.
fn tally(args: &EvaluateArgs) -> CliResult<(ConfusionAccumulator, usize, usize)> {
    let scan = scan_dataset(&args.reference, &args.predicted, &PairingRule::default())?;
    if let Some((id, a, b)) = scan.dimension_mismatches.first() {
        return Err(CliError::usage(format!(
            "{id}: reference is {}x{} but predicted is {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    for p in &scan.images_without_label {
        eprintln!("warning: no predicted label for {}", p.display());
    }
    for p in &scan.labels_without_image {
        eprintln!("warning: no reference label for {}", p.display());
    }

    let classes = usize::from(IGNORE_INDEX);
    let parts: Vec<CliResult<(ConfusionAccumulator, usize)>> = scan
        .records
        .par_iter()
        .map(|r| {
            let reference = load_label(&r.image_path)?;
            let predicted = load_label(&r.label_path)?;
            let mut acc = ConfusionAccumulator::new(classes);
            acc.accumulate(&reference, &predicted)
                .map_err(|e| CliError::usage(format!("{}: {e}", r.sample_id)))?;
            let top = reference
                .data()
                .iter()
                .chain(predicted.data())
                .filter(|&&v| v != IGNORE_INDEX)
                .map(|&v| usize::from(v) + 1)
                .max()
                .unwrap_or(0);
            Ok((acc, top))
        })
        .collect();
    let mut total = ConfusionAccumulator::new(classes);
    let mut seen = 0;
    for part in parts {
        let (acc, top) = part?;
        total.merge(&acc)?;
        seen = seen.max(top);
    }
    Ok((total, seen, scan.records.len()))
}

pub fn run(args: EvaluateArgs) -> CliResult<()> {
    init_pool(args.jobs)?;
    let (acc, seen, n) = tally(&args)?;
    let num_classes = match args.num_classes {
        Some(c) if c < seen => {
            return Err(CliError::usage(format!(
                "--num-classes {c} but class {} occurs",
                seen - 1
            )));
        }
        Some(c) => c,
        None => seen,
    };
    let report: MiouReport = acc.miou()?;

    println!("pairs: {n}");
    println!("{:>6}  {:>8}", "class", "IoU");
    for (k, iou) in report.per_class.iter().take(num_classes).enumerate() {
        match iou {
            Some(v) => println!("{k:>6}  {v:>8.4}"),
            None => println!("{k:>6}  {:>8}", "n/a"),
        }
    }
    println!("{:>6}  {:>8.4}", "mean", report.mean);

    if let Some(path) = &args.csv {
        let err = |e: std::io::Error| CliError::io(format!("{}: {e}", path.display()));
        let mut w = BufWriter::new(File::create(path).map_err(err)?);
        writeln!(w, "class,iou").map_err(err)?;
        for (k, iou) in report.per_class.iter().take(num_classes).enumerate() {
            match iou {
                Some(v) => writeln!(w, "{k},{v}"),
                None => writeln!(w, "{k},"),
            }
            .map_err(err)?;
        }
        writeln!(w, "mean,{}", report.mean).map_err(err)?;
        w.flush().map_err(err)?;
    }
    Ok(())
}
