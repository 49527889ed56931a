use std::fs;

use rayon::prelude::*;

use nsegment::dataio::{save_image, scan_dataset, DiskSamples};
use nsegment::pipeline::{augment, sample_stream, SampleSource};
use nsegment::synthetic::colorize;
use nsegment::{Image, LabelMap};

use crate::args::{init_pool, require_dir, InspectArgs};
use crate::augment::report_scan;
use crate::error::{CliError, CliResult};

const SAME: [u8; 3] = [0, 0, 0];
const DIFFERENT: [u8; 3] = [255, 255, 255];

/// `label | deformed | disagreement` side by side; disagreement is white
/// where the two maps differ.
pub fn triptych(label: &LabelMap, deformed: &LabelMap) -> Image {
    let (w, h) = label.dims();
    let (left, middle) = (colorize(label), colorize(deformed));
    let mut out = Image::black(3 * w, h);
    for y in 0..h {
        for x in 0..w {
            out.set_pixel(x, y, left.pixel(x, y));
            out.set_pixel(w + x, y, middle.pixel(x, y));
            let diff = if label.get(x, y) == deformed.get(x, y) {
                SAME
            } else {
                DIFFERENT
            };
            out.set_pixel(2 * w + x, y, diff);
        }
    }
    out
}

pub fn run(args: InspectArgs) -> CliResult<()> {
    let resolved = args.deform.resolve(&args.dataset)?;
    init_pool(resolved.jobs)?;
    let config = resolved.config;
    let images = require_dir("images", &args.dataset.images)?;
    let labels = require_dir("labels", &args.dataset.labels)?;
    let scan = scan_dataset(&images, &labels, &resolved.pairing)?;
    report_scan(&scan)?;
    let source = DiskSamples {
        records: scan.records,
        load_images: config.target.warps_image(),
    };
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(format!("{}: {e}", args.out.display())))?;

    let n = args.limit.unwrap_or(usize::MAX).min(source.len());
    let results: Vec<CliResult<()>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (image, label) = source.load(i)?;
            // Same stream as `augment` uses for this sample and epoch.
            let out = augment(&image, &label, &config, &mut sample_stream(config.seed, args.epoch, i))?;
            let path = args.out.join(format!("{}.png", source.records[i].sample_id));
            save_image(&triptych(&label, &out.label_out), &path)?;
            Ok(())
        })
        .collect();
    let failed: Vec<String> = results
        .into_iter()
        .filter_map(|r| r.err().map(|e| e.to_string()))
        .collect();
    println!("rendered: {}  failed: {}", n - failed.len(), failed.len());
    if !failed.is_empty() {
        for f in &failed {
            eprintln!("failed: {f}");
        }
        return Err(CliError::io(format!("{} sample(s) failed", failed.len())));
    }
    Ok(())
}
