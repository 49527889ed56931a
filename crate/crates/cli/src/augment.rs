use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use nsegment::dataio::{save_image, save_label, scan_dataset, DiskSamples, PairingRule, ScanReport};
use nsegment::manifest::{read_manifest, ManifestHeader, ManifestRecord, ManifestWriter, MANIFEST_VERSION};
use nsegment::pipeline::{augment, sample_stream, SampleSource};
use nsegment::{AugmentConfig, Target, WarpSemantics};

use crate::args::{init_pool, require_dir, AugmentArgs, ImageOutput};
use crate::error::{CliError, CliResult};

/// Samples processed between manifest flushes; bounds memory.
const CHUNK: usize = 64;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

struct Plan {
    images_dir: PathBuf,
    labels_dir: PathBuf,
    pairing: PairingRule,
    config: AugmentConfig,
    epochs: u64,
    out: PathBuf,
    image_output: ImageOutput,
}

pub fn run(args: AugmentArgs) -> CliResult<()> {
    let plan = match &args.replay {
        Some(manifest) => {
            let (header, _) = read_manifest(manifest)?;
            init_pool(args.deform.jobs)?;
            Plan {
                images_dir: header.images_dir,
                labels_dir: header.labels_dir,
                pairing: header.pairing,
                config: header.config,
                epochs: header.epochs,
                out: args.out.clone(),
                image_output: args.image_output,
            }
        }
        None => {
            let resolved = args.deform.resolve(&args.dataset)?;
            init_pool(resolved.jobs)?;
            Plan {
                images_dir: absolute(&require_dir("images", &args.dataset.images)?)?,
                labels_dir: absolute(&require_dir("labels", &args.dataset.labels)?)?,
                pairing: resolved.pairing,
                epochs: args.epochs.or(resolved.file.epochs).unwrap_or(1),
                config: resolved.config,
                out: args.out.clone(),
                image_output: args.image_output,
            }
        }
    };
    execute(&plan)
}

/// Manifests record absolute input directories so a replay works from any
/// working directory.
fn absolute(dir: &Path) -> CliResult<PathBuf> {
    fs::canonicalize(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))
}

/// Prints scan warnings; fails when nothing usable remains.
pub fn report_scan(report: &ScanReport) -> CliResult<()> {
    for p in &report.images_without_label {
        eprintln!("warning: image without label: {}", p.display());
    }
    for p in &report.labels_without_image {
        eprintln!("warning: label without image: {}", p.display());
    }
    for (id, di, dl) in &report.dimension_mismatches {
        eprintln!(
            "warning: {id}: image is {}x{} but label is {}x{}; skipped",
            di.0, di.1, dl.0, dl.1
        );
    }
    if report.records.is_empty() {
        return Err(CliError::io("no image/label pair has matching dimensions"));
    }
    Ok(())
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn emit_source_image(src: &Path, dir: &Path, mode: ImageOutput) -> CliResult<()> {
    let name = src.file_name().expect("scanned files have names");
    let dst = dir.join(name);
    let err = |e: std::io::Error| CliError::io(format!("{}: {e}", dst.display()));
    match mode {
        ImageOutput::None => Ok(()),
        ImageOutput::Copy => fs::copy(src, &dst).map(|_| ()).map_err(err),
        ImageOutput::Symlink => {
            if dst.symlink_metadata().is_ok() {
                fs::remove_file(&dst).map_err(err)?;
            }
            let target = fs::canonicalize(src).map_err(err)?;
            symlink(&target, &dst).map_err(err)
        }
    }
}

#[cfg(unix)]
fn symlink(src: &Path, dst: &Path) -> std::io::Result<()> {
    std::os::unix::fs::symlink(src, dst)
}

#[cfg(windows)]
fn symlink(src: &Path, dst: &Path) -> std::io::Result<()> {
    std::os::windows::fs::symlink_file(src, dst)
}

fn execute(plan: &Plan) -> CliResult<()> {
    let report = scan_dataset(&plan.images_dir, &plan.labels_dir, &plan.pairing)?;
    report_scan(&report)?;
    let records = report.records;
    let config = &plan.config;
    let seed = config.seed;

    create_dir(&plan.out)?;
    let header = ManifestHeader {
        version: MANIFEST_VERSION.to_string(),
        library_version: nsegment::VERSION.to_string(),
        seed,
        epochs: plan.epochs,
        config: config.clone(),
        semantics: WarpSemantics::InverseRemap,
        images_dir: plan.images_dir.clone(),
        labels_dir: plan.labels_dir.clone(),
        pairing: plan.pairing.clone(),
    };
    let manifest_path = plan.out.join(MANIFEST_FILE);
    let mut manifest = ManifestWriter::create(&manifest_path, &header)?;

    if config.target == Target::LabelOnly && plan.image_output != ImageOutput::None {
        let dir = plan.out.join("images");
        create_dir(&dir)?;
        records
            .par_iter()
            .try_for_each(|r| emit_source_image(&r.image_path, &dir, plan.image_output))?;
    }

    let source = DiskSamples {
        records: records.clone(),
        load_images: config.target.warps_image(),
    };
    let (mut applied, mut suppressed, mut failed) = (0usize, 0usize, Vec::new());
    for epoch in 1..=plan.epochs {
        let label_dir = format!("labels/epoch_{epoch:03}");
        let image_dir = format!("images/epoch_{epoch:03}");
        create_dir(&plan.out.join(&label_dir))?;
        if config.target.warps_image() {
            create_dir(&plan.out.join(&image_dir))?;
        }
        let indices: Vec<usize> = (0..source.len()).collect();
        for chunk in indices.chunks(CHUNK) {
            let results: Vec<ManifestRecord> = chunk
                .par_iter()
                .map(|&i| {
                    let id = &source.records[i].sample_id;
                    let rel = format!("{label_dir}/{id}.png");
                    let outcome = source.load(i).and_then(|(image, label)| {
                        let out = augment(&image, &label, config, &mut sample_stream(seed, epoch, i))?;
                        save_label(&out.label_out, &plan.out.join(&rel))?;
                        if config.target.warps_image() {
                            save_image(&out.image_out, &plan.out.join(format!("{image_dir}/{id}.png")))?;
                        }
                        Ok(out.meta())
                    });
                    match outcome {
                        Ok(meta) => ManifestRecord {
                            sample_id: id.clone(),
                            epoch,
                            applied: meta.applied,
                            params_used: meta.params_used,
                            suppressed_classes: meta.suppressed_classes,
                            output_label_path: rel,
                            error: None,
                        },
                        Err(e) => ManifestRecord {
                            sample_id: id.clone(),
                            epoch,
                            applied: false,
                            params_used: None,
                            suppressed_classes: Vec::new(),
                            output_label_path: String::new(),
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect();
            for rec in &results {
                manifest.record(rec)?;
                applied += usize::from(rec.applied);
                suppressed += usize::from(!rec.suppressed_classes.is_empty());
                if let Some(e) = &rec.error {
                    failed.push(format!("{} (epoch {}): {e}", rec.sample_id, rec.epoch));
                }
            }
        }
    }
    manifest.finish()?;

    println!(
        "samples: {}  epochs: {}  outputs: {}  applied: {}  with suppression: {}  failed: {}",
        records.len(),
        plan.epochs,
        records.len() as u64 * plan.epochs,
        applied,
        suppressed,
        failed.len()
    );
    println!("manifest: {}", manifest_path.display());
    if !failed.is_empty() {
        for f in &failed {
            eprintln!("failed: {f}");
        }
        return Err(CliError::io(format!("{} sample(s) failed", failed.len())));
    }
    Ok(())
}
