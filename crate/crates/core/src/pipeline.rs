//! The label-deformation transform: per-sample, per-epoch application of a
//! randomly parameterized displacement field.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::fields::{build_displacement, DisplacementField};
use crate::label::{class_bbox, decompose, Image, LabelMap};
use crate::params::{AugmentConfig, DeformParams, Mode, SuppressionScope};
use crate::rng::RngStream;
use crate::warp::{connected_components, suppress_bbox, warp_image, warp_label, WarpSemantics};

/// Result of one transform call.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentOutcome {
    pub label_out: LabelMap,
    pub image_out: Image,
    pub applied: bool,
    pub params_used: Option<DeformParams>,
    pub suppressed_classes: Vec<u8>,
    pub semantics: WarpSemantics,
}

/// Serializable summary of an outcome, without the rasters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeMeta {
    pub applied: bool,
    pub params_used: Option<DeformParams>,
    pub suppressed_classes: Vec<u8>,
}

impl AugmentOutcome {
    fn unchanged(image: &Image, label: &LabelMap) -> Self {
        Self {
            label_out: label.clone(),
            image_out: image.clone(),
            applied: false,
            params_used: None,
            suppressed_classes: Vec::new(),
            semantics: WarpSemantics::InverseRemap,
        }
    }

    pub fn meta(&self) -> OutcomeMeta {
        OutcomeMeta {
            applied: self.applied,
            params_used: self.params_used,
            suppressed_classes: self.suppressed_classes.clone(),
        }
    }
}

/// Zeroes the field around every region with area at most `theta` and
/// returns the classes that were protected.
pub fn suppress_small_regions(
    label: &LabelMap,
    field: &mut DisplacementField,
    alpha: f64,
    theta: usize,
    scope: SuppressionScope,
) -> Vec<u8> {
    let mut suppressed = Vec::new();
    for mask in decompose(label) {
        let mut hit = false;
        match scope {
            SuppressionScope::Class => {
                if mask.area() <= theta {
                    let bbox = class_bbox(&mask).expect("decompose yields non-empty masks");
                    suppress_bbox(field, bbox, alpha);
                    hit = true;
                }
            }
            SuppressionScope::Component => {
                for comp in connected_components(&mask) {
                    if comp.area <= theta {
                        suppress_bbox(field, comp.bbox, alpha);
                        hit = true;
                    }
                }
            }
        }
        if hit {
            suppressed.push(mask.class_id());
        }
    }
    suppressed
}

fn run(
    image: &Image,
    label: &LabelMap,
    config: &AugmentConfig,
    rng: &mut RngStream,
    suppress: bool,
) -> Result<AugmentOutcome> {
    config.validate()?;
    check_dims(label.dims(), image.dims())?;
    if !rng.chance(config.p) {
        return Ok(AugmentOutcome::unchanged(image, label));
    }
    let params = config.omega.pairs()[rng.index(config.omega.len())];
    let (w, h) = label.dims();
    let mut field = build_displacement(w, h, params, rng)?;
    let suppressed_classes = if suppress {
        suppress_small_regions(label, &mut field, params.alpha, config.theta, config.scope)
    } else {
        Vec::new()
    };
    let label_out = if config.target.warps_label() {
        warp_label(label, &field)?
    } else {
        label.clone()
    };
    let image_out = if config.target.warps_image() {
        warp_image(image, &field)?
    } else {
        image.clone()
    };
    Ok(AugmentOutcome {
        label_out,
        image_out,
        applied: true,
        params_used: Some(params),
        suppressed_classes,
        semantics: WarpSemantics::InverseRemap,
    })
}

/// Deforms the configured target(s) with probability `config.p` using one
/// field drawn from `config.omega`. No region is protected.
pub fn nsegment(
    image: &Image,
    label: &LabelMap,
    config: &AugmentConfig,
    rng: &mut RngStream,
) -> Result<AugmentOutcome> {
    run(image, label, config, rng, false)
}

/// As [`nsegment`], but the field is zeroed around every class whose area
/// is at most `config.theta` before warping.
pub fn nsegment_plus(
    image: &Image,
    label: &LabelMap,
    config: &AugmentConfig,
    rng: &mut RngStream,
) -> Result<AugmentOutcome> {
    run(image, label, config, rng, true)
}

/// Dispatches on `config.mode`.
pub fn augment(image: &Image, label: &LabelMap, config: &AugmentConfig, rng: &mut RngStream) -> Result<AugmentOutcome> {
    match config.mode {
        Mode::NSegment => nsegment(image, label, config, rng),
        Mode::NSegmentPlus => nsegment_plus(image, label, config, rng),
    }
}

/// Stream owned by sample `index` in `epoch`.
pub fn sample_stream(base_seed: u64, epoch: u64, index: usize) -> RngStream {
    RngStream::substream(base_seed, &[epoch, index as u64])
}

/// Indexed access to `(image, label)` pairs.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;

    fn load(&self, index: usize) -> Result<(Image, LabelMap)>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl SampleSource for [(Image, LabelMap)] {
    fn len(&self) -> usize {
        <[_]>::len(self)
    }

    fn load(&self, index: usize) -> Result<(Image, LabelMap)> {
        Ok(self[index].clone())
    }
}

impl SampleSource for Vec<(Image, LabelMap)> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn load(&self, index: usize) -> Result<(Image, LabelMap)> {
        self.as_slice().load(index)
    }
}

/// Augments every sample of one epoch. Each sample draws from its own
/// stream derived from `(base_seed, epoch, index)`, so results are in input
/// order and independent of scheduling. A failing sample yields an `Err`
/// entry without stopping the others.
pub fn augment_epoch<S: SampleSource + ?Sized>(
    source: &S,
    epoch: u64,
    config: &AugmentConfig,
    base_seed: u64,
) -> Vec<Result<AugmentOutcome>> {
    (0..source.len())
        .into_par_iter()
        .map(|i| {
            let (image, label) = source.load(i)?;
            let mut rng = sample_stream(base_seed, epoch, i);
            augment(&image, &label, config, &mut rng)
        })
        .collect()
}

/// A transform applied jointly to an image and its label.
pub trait JointTransform: Send + Sync {
    fn name(&self) -> &str;

    fn apply(&self, image: Image, label: LabelMap, rng: &mut RngStream) -> Result<(Image, LabelMap)>;
}

/// Leaves both rasters untouched.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl JointTransform for Identity {
    fn name(&self) -> &str {
        "identity"
    }

    fn apply(&self, image: Image, label: LabelMap, _rng: &mut RngStream) -> Result<(Image, LabelMap)> {
        Ok((image, label))
    }
}

/// [`augment`] as a pipeline stage.
#[derive(Clone, Debug)]
pub struct LabelDeform {
    pub config: AugmentConfig,
}

impl LabelDeform {
    pub fn new(config: AugmentConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl JointTransform for LabelDeform {
    fn name(&self) -> &str {
        match self.config.mode {
            Mode::NSegment => "nsegment",
            Mode::NSegmentPlus => "nsegment+",
        }
    }

    fn apply(&self, image: Image, label: LabelMap, rng: &mut RngStream) -> Result<(Image, LabelMap)> {
        let out = augment(&image, &label, &self.config, rng)?;
        Ok((out.image_out, out.label_out))
    }
}

/// Ordered chain of joint transforms. Stage `i` draws from `rng.split(i)`.
pub struct Compose {
    stages: Vec<Box<dyn JointTransform>>,
}

impl Compose {
    pub fn new(stages: Vec<Box<dyn JointTransform>>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::invalid("compose needs at least one transform"));
        }
        Ok(Self { stages })
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

impl JointTransform for Compose {
    fn name(&self) -> &str {
        "compose"
    }

    fn apply(&self, image: Image, label: LabelMap, rng: &mut RngStream) -> Result<(Image, LabelMap)> {
        let mut state = (image, label);
        for (i, stage) in self.stages.iter().enumerate() {
            let mut sub = rng.split(i as u64);
            state = stage.apply(state.0, state.1, &mut sub)?;
        }
        Ok(state)
    }
}
