//! Deformation parameters and augmentation configuration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default deformation magnitudes (pixels).
pub const DEFAULT_ALPHAS: [f64; 5] = [1.0, 15.0, 30.0, 50.0, 100.0];
/// Default smoothing widths (pixels).
pub const DEFAULT_SIGMAS: [f64; 3] = [3.0, 5.0, 10.0];
/// Default transform probability.
pub const DEFAULT_P: f64 = 0.5;
/// Default small-mask area threshold (pixels).
pub const DEFAULT_THETA: usize = 1000;

/// One `(alpha, sigma)` pair: deformation magnitude and smoothness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformParams {
    pub alpha: f64,
    pub sigma: f64,
}

impl DeformParams {
    pub fn new(alpha: f64, sigma: f64) -> Result<Self> {
        let p = Self { alpha, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::invalid(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be > 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

impl fmt::Display for DeformParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(alpha={}, sigma={})", self.alpha, self.sigma)
    }
}

/// Finite, non-empty set of deformation pairs sampled uniformly per call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<DeformParams>", into = "Vec<DeformParams>")]
pub struct OmegaSpace {
    pairs: Vec<DeformParams>,
}

impl OmegaSpace {
    pub fn new(pairs: Vec<DeformParams>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("omega space must contain at least one pair"));
        }
        for (i, p) in pairs.iter().enumerate() {
            p.validate()?;
            if pairs[..i].contains(p) {
                return Err(Error::invalid(format!("duplicate omega pair {p}")));
            }
        }
        Ok(Self { pairs })
    }

    /// Cartesian product of magnitudes and smoothness widths, alpha-major.
    pub fn cartesian(alphas: &[f64], sigmas: &[f64]) -> Result<Self> {
        let pairs = alphas
            .iter()
            .flat_map(|&alpha| sigmas.iter().map(move |&sigma| DeformParams { alpha, sigma }))
            .collect();
        Self::new(pairs)
    }

    pub fn pairs(&self) -> &[DeformParams] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, p: &DeformParams) -> bool {
        self.pairs.contains(p)
    }

    pub fn index_of(&self, p: &DeformParams) -> Option<usize> {
        self.pairs.iter().position(|q| q == p)
    }
}

impl Default for OmegaSpace {
    fn default() -> Self {
        Self::cartesian(&DEFAULT_ALPHAS, &DEFAULT_SIGMAS).expect("default omega is valid")
    }
}

impl TryFrom<Vec<DeformParams>> for OmegaSpace {
    type Error = Error;

    fn try_from(pairs: Vec<DeformParams>) -> Result<Self> {
        Self::new(pairs)
    }
}

impl From<OmegaSpace> for Vec<DeformParams> {
    fn from(o: OmegaSpace) -> Self {
        o.pairs
    }
}

/// Parses `a1,a2,...xs1,s2,...` into the Cartesian product of the two lists.
impl FromStr for OmegaSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (alphas, sigmas) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::invalid(format!("omega `{s}` must look like `a1,a2,...xs1,s2,...`")))?;
        Self::cartesian(&parse_list(alphas)?, &parse_list(sigmas)?)
    }
}

pub(crate) fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| Error::invalid(format!("`{t}` is not a number")))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Deform every class with the same field.
    #[serde(rename = "nsegment")]
    NSegment,
    /// Freeze the field around classes whose area is at most `theta`.
    #[serde(rename = "nsegment+")]
    NSegmentPlus,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nsegment" => Ok(Mode::NSegment),
            "nsegment+" | "nsegment-plus" | "nsegmentplus" => Ok(Mode::NSegmentPlus),
            _ => Err(Error::invalid(format!("unknown mode `{s}` (nsegment | nsegment+)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::NSegment => "nsegment",
            Mode::NSegmentPlus => "nsegment+",
        })
    }
}

/// Which raster(s) the deformation field is applied to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    #[default]
    #[serde(rename = "label")]
    LabelOnly,
    #[serde(rename = "image")]
    ImageOnly,
    Both,
}

impl Target {
    pub fn warps_label(self) -> bool {
        matches!(self, Target::LabelOnly | Target::Both)
    }

    pub fn warps_image(self) -> bool {
        matches!(self, Target::ImageOnly | Target::Both)
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "label" | "label-only" => Ok(Target::LabelOnly),
            "image" | "image-only" => Ok(Target::ImageOnly),
            "both" => Ok(Target::Both),
            _ => Err(Error::invalid(format!("unknown target `{s}` (label | image | both)"))),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::LabelOnly => "label",
            Target::ImageOnly => "image",
            Target::Both => "both",
        })
    }
}

/// Unit tested against `theta` when deciding what to protect.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuppressionScope {
    /// Whole class mask area.
    #[default]
    Class,
    /// Each 4-connected component of a class separately.
    Component,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub p: f64,
    pub theta: usize,
    pub omega: OmegaSpace,
    pub mode: Mode,
    pub target: Target,
    pub seed: u64,
    pub scope: SuppressionScope,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            p: DEFAULT_P,
            theta: DEFAULT_THETA,
            omega: OmegaSpace::default(),
            mode: Mode::NSegmentPlus,
            target: Target::LabelOnly,
            seed: 0,
            scope: SuppressionScope::Class,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid(format!("p must be in [0, 1], got {}", self.p)));
        }
        if self.omega.is_empty() {
            return Err(Error::invalid("omega space is empty"));
        }
        for pair in self.omega.pairs() {
            pair.validate()?;
        }
        Ok(())
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_theta(mut self, theta: usize) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_target(mut self, target: Target) -> Self {
        self.target = target;
        self
    }

    pub fn with_omega(mut self, omega: OmegaSpace) -> Self {
        self.omega = omega;
        self
    }
}
