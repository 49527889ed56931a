//! Rectangle-based joint image/label transforms: CutOut, CutMix and Random
//! Erasing. Erased label pixels become the ignore index.

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::label::{BBox, Image, LabelMap};
use crate::pipeline::JointTransform;
use crate::rng::RngStream;

/// Attempts made to find a box satisfying the area/aspect bounds.
const MAX_BOX_ATTEMPTS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CutOutConfig {
    pub holes_min: usize,
    pub holes_max: usize,
    pub side_min: usize,
    pub side_max: usize,
    pub prob: f64,
}

impl Default for CutOutConfig {
    fn default() -> Self {
        Self {
            holes_min: 5,
            holes_max: 10,
            side_min: 16,
            side_max: 32,
            prob: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CutMixConfig {
    pub area_frac_min: f64,
    pub area_frac_max: f64,
    pub prob: f64,
}

impl Default for CutMixConfig {
    fn default() -> Self {
        Self {
            area_frac_min: 0.20,
            area_frac_max: 0.50,
            prob: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErasingConfig {
    pub area_frac_min: f64,
    pub area_frac_max: f64,
    pub aspect_min: f64,
    pub aspect_max: f64,
    pub prob: f64,
}

impl Default for ErasingConfig {
    fn default() -> Self {
        Self {
            area_frac_min: 0.05,
            area_frac_max: 0.20,
            aspect_min: 0.5,
            aspect_max: 2.0,
            prob: 0.5,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompanionConfig {
    pub cutout: CutOutConfig,
    pub cutmix: CutMixConfig,
    pub erasing: ErasingConfig,
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("{name} probability must be in [0, 1], got {p}")));
    }
    Ok(())
}

fn check_fracs(name: &str, lo: f64, hi: f64) -> Result<()> {
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(Error::invalid(format!(
            "{name} area fractions must satisfy 0 < min <= max <= 1, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

impl CutOutConfig {
    pub fn validate(&self) -> Result<()> {
        check_prob("cutout", self.prob)?;
        if self.holes_min > self.holes_max || self.side_min == 0 || self.side_min > self.side_max {
            return Err(Error::invalid("cutout ranges must satisfy min <= max and side >= 1"));
        }
        Ok(())
    }
}

impl CutMixConfig {
    pub fn validate(&self) -> Result<()> {
        check_prob("cutmix", self.prob)?;
        check_fracs("cutmix", self.area_frac_min, self.area_frac_max)
    }
}

impl ErasingConfig {
    pub fn validate(&self) -> Result<()> {
        check_prob("erasing", self.prob)?;
        check_fracs("erasing", self.area_frac_min, self.area_frac_max)?;
        if !(self.aspect_min > 0.0 && self.aspect_min <= self.aspect_max) {
            return Err(Error::invalid("erasing aspect range must satisfy 0 < min <= max"));
        }
        Ok(())
    }
}

impl CompanionConfig {
    pub fn validate(&self) -> Result<()> {
        self.cutout.validate()?;
        self.cutmix.validate()?;
        self.erasing.validate()
    }
}

/// Start offset and clipped length for a span of `len` inside `extent`.
fn place(len: usize, extent: usize, rng: &mut RngStream) -> (usize, usize) {
    if len <= extent {
        (rng.int_inclusive(0, extent - len), len)
    } else {
        (0, extent)
    }
}

fn fill_box(
    image: &mut Image,
    label: &mut [u8],
    width: usize,
    b: BBox,
    ignore: u8,
    mut color: impl FnMut() -> [u8; 3],
) {
    for y in b.y_min..=b.y_max {
        for x in b.x_min..=b.x_max {
            image.set_pixel(x, y, color());
            label[y * width + x] = ignore;
        }
    }
}

/// Boxes CutOut would erase, or `None` when the probability draw fails.
pub fn sample_cutout_boxes(width: usize, height: usize, cfg: &CutOutConfig, rng: &mut RngStream) -> Option<Vec<BBox>> {
    if !rng.chance(cfg.prob) {
        return None;
    }
    let n = rng.int_inclusive(cfg.holes_min, cfg.holes_max);
    let boxes = (0..n)
        .map(|_| {
            let side = rng.int_inclusive(cfg.side_min, cfg.side_max);
            let (x0, bw) = place(side, width, rng);
            let (y0, bh) = place(side, height, rng);
            BBox {
                x_min: x0,
                y_min: y0,
                x_max: x0 + bw - 1,
                y_max: y0 + bh - 1,
            }
        })
        .collect();
    Some(boxes)
}

/// Blacks out several square patches of the image and marks them ignore in
/// the label.
pub fn cutout(image: &Image, label: &LabelMap, cfg: &CutOutConfig, rng: &mut RngStream) -> Result<(Image, LabelMap)> {
    cfg.validate()?;
    check_dims(label.dims(), image.dims())?;
    let (w, h) = label.dims();
    let Some(boxes) = sample_cutout_boxes(w, h, cfg, rng) else {
        return Ok((image.clone(), label.clone()));
    };
    let mut img = image.clone();
    let mut lab = label.data().to_vec();
    for b in boxes {
        fill_box(&mut img, &mut lab, w, b, label.ignore_index(), || [0, 0, 0]);
    }
    Ok((img, label.with_data_unchecked(lab)))
}

/// Box with area fraction in `[frac_min, frac_max]` and `height / width`
/// aspect in `[aspect_min, aspect_max]`, placed uniformly inside the raster.
/// Rounded sizes that fall outside the bounds are redrawn.
fn sample_box(
    width: usize,
    height: usize,
    (frac_min, frac_max): (f64, f64),
    aspect: impl Fn(&mut RngStream) -> f64,
    (aspect_min, aspect_max): (f64, f64),
    rng: &mut RngStream,
) -> Option<BBox> {
    let area = (width * height) as f64;
    for _ in 0..MAX_BOX_ATTEMPTS {
        let target = rng.uniform_range(frac_min, frac_max) * area;
        let r = aspect(rng);
        let bh = (target * r).sqrt().round() as usize;
        let bw = (target / r).sqrt().round() as usize;
        if bw == 0 || bh == 0 || bw > width || bh > height {
            continue;
        }
        let frac = (bw * bh) as f64 / area;
        let ar = bh as f64 / bw as f64;
        if frac < frac_min || frac > frac_max || ar < aspect_min || ar > aspect_max {
            continue;
        }
        let x0 = rng.int_inclusive(0, width - bw);
        let y0 = rng.int_inclusive(0, height - bh);
        return Some(BBox {
            x_min: x0,
            y_min: y0,
            x_max: x0 + bw - 1,
            y_max: y0 + bh - 1,
        });
    }
    None
}

/// The region CutMix would paste, or `None` when the probability draw fails
/// or no box fits. The box keeps the raster's aspect ratio.
pub fn sample_cutmix_box(width: usize, height: usize, cfg: &CutMixConfig, rng: &mut RngStream) -> Option<BBox> {
    if !rng.chance(cfg.prob) {
        return None;
    }
    let raster_aspect = height as f64 / width as f64;
    sample_box(
        width,
        height,
        (cfg.area_frac_min, cfg.area_frac_max),
        |_| raster_aspect,
        (0.0, f64::INFINITY),
        rng,
    )
}

/// Pastes a box of `(image_b, label_b)` into `(image_a, label_a)` at the
/// same location.
pub fn cutmix(
    image_a: &Image,
    label_a: &LabelMap,
    image_b: &Image,
    label_b: &LabelMap,
    cfg: &CutMixConfig,
    rng: &mut RngStream,
) -> Result<(Image, LabelMap)> {
    cfg.validate()?;
    let dims = label_a.dims();
    check_dims(dims, image_a.dims())?;
    check_dims(dims, image_b.dims())?;
    check_dims(dims, label_b.dims())?;
    if label_a.ignore_index() != label_b.ignore_index() {
        return Err(Error::invalid("cutmix pair uses different ignore indices"));
    }
    let (w, h) = dims;
    let Some(b) = sample_cutmix_box(w, h, cfg, rng) else {
        return Ok((image_a.clone(), label_a.clone()));
    };
    let mut img = image_a.clone();
    let mut lab = label_a.data().to_vec();
    for y in b.y_min..=b.y_max {
        for x in b.x_min..=b.x_max {
            img.set_pixel(x, y, image_b.pixel(x, y));
            lab[y * w + x] = label_b.get(x, y);
        }
    }
    let classes = label_a.num_classes().max(label_b.num_classes());
    let label = LabelMap::with_ignore(w, h, lab, classes, label_a.ignore_index())?;
    Ok((img, label))
}

/// The region Random Erasing would fill, or `None` when the probability
/// draw fails or no box fits. Aspect is drawn log-uniformly.
pub fn sample_erasing_box(width: usize, height: usize, cfg: &ErasingConfig, rng: &mut RngStream) -> Option<BBox> {
    if !rng.chance(cfg.prob) {
        return None;
    }
    let (lo, hi) = (cfg.aspect_min.ln(), cfg.aspect_max.ln());
    sample_box(
        width,
        height,
        (cfg.area_frac_min, cfg.area_frac_max),
        |r| r.uniform_range(lo, hi).exp(),
        (cfg.aspect_min, cfg.aspect_max),
        rng,
    )
}

/// Fills one box with per-pixel random colors and marks it ignore in the
/// label.
pub fn random_erasing(
    image: &Image,
    label: &LabelMap,
    cfg: &ErasingConfig,
    rng: &mut RngStream,
) -> Result<(Image, LabelMap)> {
    cfg.validate()?;
    check_dims(label.dims(), image.dims())?;
    let (w, h) = label.dims();
    let Some(b) = sample_erasing_box(w, h, cfg, rng) else {
        return Ok((image.clone(), label.clone()));
    };
    let mut img = image.clone();
    let mut lab = label.data().to_vec();
    fill_box(&mut img, &mut lab, w, b, label.ignore_index(), || {
        let v = rng.next_u32().to_le_bytes();
        [v[0], v[1], v[2]]
    });
    Ok((img, label.with_data_unchecked(lab)))
}

/// CutOut as a pipeline stage.
#[derive(Clone, Debug, Default)]
pub struct CutOut(pub CutOutConfig);

impl JointTransform for CutOut {
    fn name(&self) -> &str {
        "cutout"
    }

    fn apply(&self, image: Image, label: LabelMap, rng: &mut RngStream) -> Result<(Image, LabelMap)> {
        cutout(&image, &label, &self.0, rng)
    }
}

/// Random Erasing as a pipeline stage.
#[derive(Clone, Debug, Default)]
pub struct RandomErasing(pub ErasingConfig);

impl JointTransform for RandomErasing {
    fn name(&self) -> &str {
        "random-erasing"
    }

    fn apply(&self, image: Image, label: LabelMap, rng: &mut RngStream) -> Result<(Image, LabelMap)> {
        random_erasing(&image, &label, &self.0, rng)
    }
}

/// CutMix as a pipeline stage: the donor is drawn uniformly from a fixed
/// pool (for example the other samples of a batch window).
#[derive(Clone, Debug)]
pub struct CutMix {
    pub config: CutMixConfig,
    donors: Vec<(Image, LabelMap)>,
}

impl CutMix {
    pub fn new(config: CutMixConfig, donors: Vec<(Image, LabelMap)>) -> Result<Self> {
        config.validate()?;
        if donors.is_empty() {
            return Err(Error::invalid("cutmix needs at least one donor sample"));
        }
        Ok(Self { config, donors })
    }
}

impl JointTransform for CutMix {
    fn name(&self) -> &str {
        "cutmix"
    }

    fn apply(&self, image: Image, label: LabelMap, rng: &mut RngStream) -> Result<(Image, LabelMap)> {
        let (di, dl) = &self.donors[rng.index(self.donors.len())];
        cutmix(&image, &label, di, dl, &self.config, rng)
    }
}
