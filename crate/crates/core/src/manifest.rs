//! Line-delimited JSON manifest describing an augmentation run.
//!
//! Line 1 is a [`ManifestHeader`]; every following line is one
//! [`ManifestRecord`]. The header carries everything needed to replay the
//! run and reproduce each output byte for byte.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::PairingRule;
use crate::error::{Error, Result};
use crate::params::{AugmentConfig, DeformParams};
use crate::warp::WarpSemantics;

pub const MANIFEST_VERSION: &str = "nsegment-manifest/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub version: String,
    pub library_version: String,
    pub seed: u64,
    pub epochs: u64,
    pub config: AugmentConfig,
    pub semantics: WarpSemantics,
    pub images_dir: PathBuf,
    pub labels_dir: PathBuf,
    pub pairing: PairingRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub sample_id: String,
    pub epoch: u64,
    pub applied: bool,
    pub params_used: Option<DeformParams>,
    pub suppressed_classes: Vec<u8>,
    /// Relative to the output directory, `/`-separated. Empty when the
    /// sample failed.
    pub output_label_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct ManifestWriter<W: Write> {
    out: W,
}

impl ManifestWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: &ManifestHeader) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Self::new(BufWriter::new(file), header)
    }
}

impl<W: Write> ManifestWriter<W> {
    pub fn new(out: W, header: &ManifestHeader) -> Result<Self> {
        let mut writer = Self { out };
        writer.line(header)?;
        Ok(writer)
    }

    fn line<T: Serialize>(&mut self, value: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, value).map_err(|e| Error::Manifest(e.to_string()))?;
        self.out.write_all(b"\n").map_err(|e| Error::io("<manifest>", e))
    }

    pub fn record(&mut self, record: &ManifestRecord) -> Result<()> {
        self.line(record)
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush().map_err(|e| Error::io("<manifest>", e))?;
        Ok(self.out)
    }
}

pub fn parse_manifest<R: BufRead>(input: R) -> Result<(ManifestHeader, Vec<ManifestRecord>)> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Manifest("empty manifest".into()))?
        .map_err(|e| Error::io("<manifest>", e))?;
    let header: ManifestHeader = serde_json::from_str(&first).map_err(|e| Error::Manifest(format!("header: {e}")))?;
    if header.version != MANIFEST_VERSION {
        return Err(Error::Manifest(format!(
            "unsupported manifest version `{}` (expected `{MANIFEST_VERSION}`)",
            header.version
        )));
    }
    let mut records = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io("<manifest>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Manifest(format!("line {}: {e}", n + 2)))?;
        records.push(rec);
    }
    Ok((header, records))
}

pub fn read_manifest(path: &Path) -> Result<(ManifestHeader, Vec<ManifestRecord>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(BufReader::new(file))
}
