//! Label and image files, and pairing of dataset directories.
//!
//! Labels are stored as 8-bit single-channel (or paletted) PNG files where
//! each byte is a class index and 255 marks unlabeled pixels. Palette
//! labels are read by index, never by color.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Image, LabelMap};
use crate::pipeline::SampleSource;

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "tif", "tiff"];
const LABEL_EXTENSIONS: &[&str] = &["png"];

fn corrupt(path: &Path, reason: impl ToString) -> Error {
    Error::CorruptFile {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

fn unsupported(path: &Path, reason: impl Into<String>) -> Error {
    Error::UnsupportedFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Expands packed 1/2/4-bit samples to one byte each.
fn unpack_row(row: &[u8], bits: usize, width: usize) -> impl Iterator<Item = u8> + '_ {
    let per_byte = 8 / bits;
    let mask = (1u16 << bits) as u8 - 1;
    (0..width).map(move |x| {
        let byte = row[x / per_byte];
        let shift = 8 - bits * (x % per_byte + 1);
        (byte >> shift) & mask
    })
}

/// Reads a class-index PNG. Grayscale and paletted files of bit depth up to
/// 8 are accepted; the class count is inferred from the largest value.
pub fn load_label(path: &Path) -> Result<LabelMap> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| corrupt(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| corrupt(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| corrupt(path, e))?;
    match info.color_type {
        png::ColorType::Grayscale | png::ColorType::Indexed => {}
        other => {
            return Err(unsupported(
                path,
                format!("{other:?} label; convert color-coded labels to single-channel class-index PNGs first"),
            ))
        }
    }
    let bits = match info.bit_depth {
        png::BitDepth::Sixteen => return Err(unsupported(path, "16-bit label; class indices must fit in 8 bits")),
        d => d as usize,
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let mut data = Vec::with_capacity(w * h);
    for row in buf.chunks(info.line_size).take(h) {
        if bits == 8 {
            data.extend_from_slice(&row[..w]);
        } else {
            data.extend(unpack_row(row, bits, w));
        }
    }
    LabelMap::infer_classes(w, h, data)
}

/// Writes an 8-bit grayscale PNG with fixed encoder settings, so equal maps
/// produce equal bytes.
pub fn save_label(label: &LabelMap, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), label.width() as u32, label.height() as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_compression(png::Compression::Balanced);
    let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    let mut writer = encoder.write_header().map_err(to_io)?;
    writer.write_image_data(label.data()).map_err(to_io)?;
    writer.finish().map_err(to_io)
}

pub fn load_image(path: &Path) -> Result<Image> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => corrupt(path, other),
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    Image::new(w as usize, h as usize, rgb.into_raw())
}

pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    image::save_buffer_with_format(
        path,
        img.data(),
        img.width() as u32,
        img.height() as u32,
        image::ExtendedColorType::Rgb8,
        image::ImageFormat::Png,
    )
    .map_err(|e| Error::io(path, std::io::Error::other(e)))
}

fn dimensions(path: &Path) -> Result<(usize, usize)> {
    let (w, h) = image::image_dimensions(path).map_err(|e| corrupt(path, e))?;
    Ok((w as usize, h as usize))
}

/// How image and label file names correspond: both reduce to the same stem
/// once the extension and the optional suffix are removed, e.g.
/// `aachen_000000_leftImg8bit.png` / `aachen_000000_gtFine_labelTrainIds.png`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairingRule {
    pub image_suffix: String,
    pub label_suffix: String,
}

impl PairingRule {
    fn stem<'a>(&self, path: &'a Path, suffix: &str, exts: &[&str]) -> Option<&'a str> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        if !exts.contains(&ext.as_str()) {
            return None;
        }
        let stem = path.file_stem()?.to_str()?;
        stem.strip_suffix(suffix)
    }
}

/// One paired sample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub image_path: PathBuf,
    pub label_path: PathBuf,
    pub width: usize,
    pub height: usize,
}

/// `(sample_id, image dims, label dims)`.
pub type SizeMismatch = (String, (usize, usize), (usize, usize));

#[derive(Clone, Debug, Default)]
pub struct ScanReport {
    pub records: Vec<SampleRecord>,
    pub images_without_label: Vec<PathBuf>,
    pub labels_without_image: Vec<PathBuf>,
    pub dimension_mismatches: Vec<SizeMismatch>,
}

impl ScanReport {
    pub fn has_mismatches(&self) -> bool {
        !(self.images_without_label.is_empty()
            && self.labels_without_image.is_empty()
            && self.dimension_mismatches.is_empty())
    }
}

fn list_by_stem(dir: &Path, suffix: &str, exts: &[&str], rule: &PairingRule) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        if let Some(stem) = rule.stem(&path, suffix, exts) {
            out.push((stem.to_string(), path));
        }
    }
    // Byte order, independent of locale and directory iteration order.
    out.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()).then_with(|| a.1.cmp(&b.1)));
    Ok(out)
}

/// Pairs images and labels by shared stem. Unpaired files and pairs whose
/// sizes disagree are reported rather than dropped silently. Fails with
/// `NoPairsFound` only when no stem matched at all.
pub fn scan_dataset(image_dir: &Path, label_dir: &Path, rule: &PairingRule) -> Result<ScanReport> {
    let images = list_by_stem(image_dir, &rule.image_suffix, IMAGE_EXTENSIONS, rule)?;
    let labels = list_by_stem(label_dir, &rule.label_suffix, LABEL_EXTENSIONS, rule)?;
    let mut report = ScanReport::default();
    let (mut i, mut j) = (0, 0);
    while i < images.len() || j < labels.len() {
        let ord = match (images.get(i), labels.get(j)) {
            (Some(a), Some(b)) => a.0.as_bytes().cmp(b.0.as_bytes()),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, _) => std::cmp::Ordering::Greater,
        };
        match ord {
            std::cmp::Ordering::Less => {
                report.images_without_label.push(images[i].1.clone());
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                report.labels_without_image.push(labels[j].1.clone());
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                let (id, image_path) = &images[i];
                let label_path = &labels[j].1;
                let di = dimensions(image_path)?;
                let dl = dimensions(label_path)?;
                if di == dl {
                    report.records.push(SampleRecord {
                        sample_id: id.clone(),
                        image_path: image_path.clone(),
                        label_path: label_path.clone(),
                        width: di.0,
                        height: di.1,
                    });
                } else {
                    report.dimension_mismatches.push((id.clone(), di, dl));
                }
                i += 1;
                j += 1;
            }
        }
    }
    if report.records.is_empty() && report.dimension_mismatches.is_empty() {
        return Err(Error::NoPairsFound);
    }
    Ok(report)
}

/// Samples read from disk on demand. With `load_images` off, a black
/// placeholder of the recorded size stands in for each image; label-only
/// augmentation never reads image pixels.
#[derive(Clone, Debug)]
pub struct DiskSamples {
    pub records: Vec<SampleRecord>,
    pub load_images: bool,
}

impl SampleSource for DiskSamples {
    fn len(&self) -> usize {
        self.records.len()
    }

    fn load(&self, index: usize) -> Result<(Image, LabelMap)> {
        let rec = &self.records[index];
        let label = load_label(&rec.label_path)?;
        let image = if self.load_images {
            load_image(&rec.image_path)?
        } else {
            Image::black(rec.width, rec.height)
        };
        if image.dims() != label.dims() {
            return Err(Error::DimensionMismatch {
                expected: label.dims(),
                actual: image.dims(),
            });
        }
        Ok((image, label))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_bytes_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.png");
        let label = LabelMap::new(2, 2, vec![0, 1, 2, 255], 3).unwrap();
        save_label(&label, &path).unwrap();
        assert_eq!(load_label(&path).unwrap(), label);
    }

    #[test]
    fn deterministic_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let label = LabelMap::new(3, 1, vec![4, 255, 0], 5).unwrap();
        save_label(&label, &dir.path().join("a.png")).unwrap();
        save_label(&label, &dir.path().join("b.png")).unwrap();
        let a = fs::read(dir.path().join("a.png")).unwrap();
        let b = fs::read(dir.path().join("b.png")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn paletted_reads_indices() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.png");
        let file = File::create(&path).unwrap();
        let mut enc = png::Encoder::new(BufWriter::new(file), 4, 1);
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_palette(vec![0u8; 256 * 3]);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[0, 3, 1, 255]).unwrap();
        w.finish().unwrap();
        assert_eq!(load_label(&path).unwrap().data(), &[0, 3, 1, 255]);
    }

    #[test]
    fn packed_depth_is_expanded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p4.png");
        let file = File::create(&path).unwrap();
        let mut enc = png::Encoder::new(BufWriter::new(file), 3, 2);
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Four);
        enc.set_palette(vec![0u8; 16 * 3]);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[0x12, 0x30, 0x45, 0x60]).unwrap();
        w.finish().unwrap();
        assert_eq!(load_label(&path).unwrap().data(), &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn rgb_and_sixteen_bit_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let rgb = dir.path().join("rgb.png");
        save_image(&Image::black(2, 2), &rgb).unwrap();
        let err = load_label(&rgb).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat { .. }));
        assert!(err.to_string().contains("class-index"));

        let deep = dir.path().join("deep.png");
        image::save_buffer(&deep, &[0u8; 8], 2, 2, image::ExtendedColorType::L16).unwrap();
        assert!(matches!(load_label(&deep), Err(Error::UnsupportedFormat { .. })));
    }

    #[test]
    fn missing_and_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_label(&dir.path().join("nope.png")),
            Err(Error::Io { .. })
        ));
        let junk = dir.path().join("junk.png");
        fs::write(&junk, b"not a png").unwrap();
        assert!(matches!(load_label(&junk), Err(Error::CorruptFile { .. })));
    }

    #[test]
    fn scan_pairs_and_reports() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = (dir.path().join("img"), dir.path().join("ann"));
        fs::create_dir_all(&img).unwrap();
        fs::create_dir_all(&lab).unwrap();
        let rule = PairingRule::default();
        assert!(matches!(scan_dataset(&img, &lab, &rule), Err(Error::NoPairsFound)));

        let label = LabelMap::filled(4, 3, 0, 1).unwrap();
        for id in ["b", "a"] {
            save_image(&Image::black(4, 3), &img.join(format!("{id}.png"))).unwrap();
            save_label(&label, &lab.join(format!("{id}.png"))).unwrap();
        }
        save_image(&Image::black(4, 3), &img.join("lonely.jpg")).unwrap();
        save_label(&label, &lab.join("orphan.png")).unwrap();
        save_image(&Image::black(5, 3), &img.join("c.png")).unwrap();
        save_label(&label, &lab.join("c.png")).unwrap();

        let report = scan_dataset(&img, &lab, &rule).unwrap();
        let ids: Vec<_> = report.records.iter().map(|r| r.sample_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(report.images_without_label, vec![img.join("lonely.jpg")]);
        assert_eq!(report.labels_without_image, vec![lab.join("orphan.png")]);
        assert_eq!(report.dimension_mismatches, vec![("c".to_string(), (5, 3), (4, 3))]);
    }

    #[test]
    fn scan_with_suffixes() {
        let dir = tempfile::tempdir().unwrap();
        let label = LabelMap::filled(2, 2, 0, 1).unwrap();
        save_image(&Image::black(2, 2), &dir.path().join("x_leftImg8bit.png")).unwrap();
        save_label(&label, &dir.path().join("x_gtFine.png")).unwrap();
        let rule = PairingRule {
            image_suffix: "_leftImg8bit".into(),
            label_suffix: "_gtFine".into(),
        };
        let report = scan_dataset(dir.path(), dir.path(), &rule).unwrap();
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.records[0].sample_id, "x");
    }
}
