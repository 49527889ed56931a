use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use nsegment::dataio::PairingRule;
use nsegment::params::{DEFAULT_P, DEFAULT_THETA};
use nsegment::{AugmentConfig, Mode, OmegaSpace, SuppressionScope, Target};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "nseg",
    version,
    about = "Label-deformation augmentation for segmentation datasets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write deformed label variants for every sample and epoch, plus a manifest.
    Augment(AugmentArgs),
    /// Sweep label perturbations and tabulate their mIoU against the clean labels.
    Perturb(PerturbArgs),
    /// Per-class IoU and mIoU between two label directories.
    Evaluate(EvaluateArgs),
    /// Render label / deformed label / disagreement triptychs.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Directory of input images.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Directory of class-index label PNGs.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Suffix stripped from image file stems before pairing.
    #[arg(long)]
    pub image_suffix: Option<String>,
    /// Suffix stripped from label file stems before pairing.
    #[arg(long)]
    pub label_suffix: Option<String>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: nsegment::Error| e.to_string())
}

fn parse_target(s: &str) -> Result<Target, String> {
    s.parse().map_err(|e: nsegment::Error| e.to_string())
}

fn parse_omega(s: &str) -> Result<OmegaSpace, String> {
    s.parse().map_err(|e: nsegment::Error| e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeArg {
    Class,
    Component,
}

impl From<ScopeArg> for SuppressionScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Class => SuppressionScope::Class,
            ScopeArg::Component => SuppressionScope::Component,
        }
    }
}

#[derive(Debug, Args)]
pub struct DeformArgs {
    /// TOML file with defaults for any of these flags; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// nsegment | nsegment+ [default: nsegment+]
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// label | image | both [default: label]
    #[arg(long, value_parser = parse_target)]
    pub target: Option<Target>,
    /// Probability that a sample is deformed in a given epoch [default: 0.5]
    #[arg(long)]
    pub p: Option<f64>,
    /// Classes with at most this many pixels keep their shape [default: 1000]
    #[arg(long)]
    pub theta: Option<usize>,
    /// Deformation pairs as `alphas x sigmas` [default: 1,15,30,50,100x3,5,10]
    #[arg(long, value_parser = parse_omega)]
    pub omega: Option<OmegaSpace>,
    /// Base random seed [default: 0]
    #[arg(long, env = "NSEG_SEED")]
    pub seed: Option<u64>,
    /// Unit tested against theta [default: class]
    #[arg(long, value_enum)]
    pub scope: Option<ScopeArg>,
    /// Worker threads [default: logical cores]
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Config-file keys. All optional; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub p: Option<f64>,
    pub theta: Option<usize>,
    pub omega: Option<String>,
    pub mode: Option<String>,
    pub target: Option<String>,
    pub seed: Option<u64>,
    pub scope: Option<ScopeArg>,
    pub epochs: Option<u64>,
    pub jobs: Option<usize>,
    pub image_suffix: Option<String>,
    pub label_suffix: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }
}

/// Flags merged over the config file over built-in defaults.
#[derive(Debug)]
pub struct Resolved {
    pub config: AugmentConfig,
    pub jobs: Option<usize>,
    pub pairing: PairingRule,
    pub file: FileConfig,
}

impl DeformArgs {
    pub fn resolve(&self, dataset: &DatasetArgs) -> CliResult<Resolved> {
        let file = FileConfig::load(self.config.as_deref())?;
        let usage = |e: nsegment::Error| CliError::usage(e);
        let mode = match (&self.mode, &file.mode) {
            (Some(m), _) => *m,
            (None, Some(s)) => s.parse().map_err(usage)?,
            (None, None) => Mode::NSegmentPlus,
        };
        let target = match (&self.target, &file.target) {
            (Some(t), _) => *t,
            (None, Some(s)) => s.parse().map_err(usage)?,
            (None, None) => Target::LabelOnly,
        };
        let omega = match (&self.omega, &file.omega) {
            (Some(o), _) => o.clone(),
            (None, Some(s)) => s.parse().map_err(usage)?,
            (None, None) => OmegaSpace::default(),
        };
        let config = AugmentConfig {
            p: self.p.or(file.p).unwrap_or(DEFAULT_P),
            theta: self.theta.or(file.theta).unwrap_or(DEFAULT_THETA),
            omega,
            mode,
            target,
            seed: self.seed.or(file.seed).unwrap_or(0),
            scope: self.scope.or(file.scope).map(Into::into).unwrap_or_default(),
        };
        config.validate().map_err(usage)?;
        let pairing = PairingRule {
            image_suffix: dataset
                .image_suffix
                .clone()
                .or_else(|| file.image_suffix.clone())
                .unwrap_or_default(),
            label_suffix: dataset
                .label_suffix
                .clone()
                .or_else(|| file.label_suffix.clone())
                .unwrap_or_default(),
        };
        Ok(Resolved {
            config,
            jobs: self.jobs.or(file.jobs),
            pairing,
            file,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ImageOutput {
    /// Copy source images next to the labels.
    Copy,
    /// Symlink source images.
    Symlink,
    /// Do not emit images.
    None,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub deform: DeformArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of epochs (label variants per sample) [default: 1]
    #[arg(long)]
    pub epochs: Option<u64>,
    /// How unchanged images reach the output tree in label-only mode.
    #[arg(long, value_enum, default_value_t = ImageOutput::Copy)]
    pub image_output: ImageOutput,
    /// Re-run the augmentation recorded in a manifest; other dataset and
    /// deformation flags are ignored.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Shift,
    Erode,
    Dilate,
    Elastic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PerturbTargetArg {
    Label,
    Sync,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    /// Pixels left unlabeled by a perturbation count as misses.
    VoidAsMiss,
    /// Plain mIoU; unlabeled pixels are skipped.
    Miou,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Comma-separated magnitudes: shift pixels (applied on both axes),
    /// kernel sizes, or elastic alphas (`alphas x sigmas` also accepted).
    /// Defaults: shift 0,1,2,4,8; morphology 7,14,21,28,35; elastic 1,15,30,50,100.
    #[arg(long)]
    pub grid: Option<String>,
    /// Smoothing width for elastic grids given as plain alphas.
    #[arg(long, default_value_t = 5.0)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = PerturbTargetArg::Label)]
    pub target: PerturbTargetArg,
    #[arg(long, value_enum, default_value_t = MetricArg::VoidAsMiss)]
    pub metric: MetricArg,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "NSEG_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Synthetic samples to generate when no --labels directory is given.
    #[arg(long, default_value_t = 16)]
    pub synthetic: usize,
    /// Side length of synthetic samples.
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Reference label directory.
    #[arg(long)]
    pub reference: PathBuf,
    /// Label directory compared against the reference.
    #[arg(long)]
    pub predicted: PathBuf,
    /// Class count; inferred from the data when omitted.
    #[arg(long)]
    pub num_classes: Option<usize>,
    /// Also write `class,iou` rows (and a `mean` row) to this file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub deform: DeformArgs,
    /// Output directory for triptych PNGs.
    #[arg(long)]
    pub out: PathBuf,
    /// Epoch whose draws are rendered (matches `augment` numbering).
    #[arg(long, default_value_t = 1)]
    pub epoch: u64,
    /// Render at most this many samples.
    #[arg(long)]
    pub limit: Option<usize>,
}

pub fn require_dir(flag: &str, value: &Option<PathBuf>) -> CliResult<PathBuf> {
    value
        .clone()
        .ok_or_else(|| CliError::usage(format!("--{flag} is required")))
}

pub fn init_pool(jobs: Option<usize>) -> CliResult<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))?;
    }
    Ok(())
}
