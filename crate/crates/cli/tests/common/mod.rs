#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nsegment::dataio::{save_image, save_label};
use nsegment::synthetic::{random_label, textured_image};
use nsegment::RngStream;

pub fn nseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nseg"))
        .args(args)
        .env_remove("NSEG_SEED")
        .output()
        .expect("nseg binary runs")
}

pub fn path_arg(p: &Path) -> &str {
    p.to_str().expect("temp paths are UTF-8")
}

/// Writes `n` shape-label samples as `root/images/sNNN.png` and
/// `root/labels/sNNN.png`; returns the two directories.
pub fn write_dataset(root: &Path, n: usize, size: usize, seed: u64) -> (PathBuf, PathBuf) {
    let images = root.join("images");
    let labels = root.join("labels");
    fs::create_dir_all(&images).unwrap();
    fs::create_dir_all(&labels).unwrap();
    for i in 0..n {
        let mut rng = RngStream::substream(seed, &[i as u64]);
        let label = random_label(size, size, 5, 5, &mut rng);
        let image = textured_image(&label, &mut rng);
        save_label(&label, &labels.join(format!("s{i:03}.png"))).unwrap();
        save_image(&image, &images.join(format!("s{i:03}.png"))).unwrap();
    }
    (images, labels)
}

/// Relative path -> file bytes for every file under `root`.
pub fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
