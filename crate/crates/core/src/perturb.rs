//! Label perturbations for robustness sweeps: elastic deformation, binary
//! morphology and integer shifts, plus a sweep driver scoring each
//! perturbation against the clean labels.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::fields::build_displacement;
use crate::label::{decompose, recompose, ClassMask, Image, LabelMap, IGNORE_INDEX};
use crate::metrics::ConfusionAccumulator;
use crate::params::DeformParams;
use crate::pipeline::SampleSource;
use crate::rng::RngStream;
use crate::warp::{warp_image, warp_label};

/// Kernel sizes used for morphological label noise by default.
pub const DEFAULT_MORPH_PALETTE: [usize; 5] = [7, 14, 21, 28, 35];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MorphOp {
    Erode,
    Dilate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbTarget {
    #[default]
    LabelOnly,
    /// Image and label move together.
    Synchronized,
}

impl fmt::Display for PerturbTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PerturbTarget::LabelOnly => "label",
            PerturbTarget::Synchronized => "sync",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PerturbKind {
    Elastic { alpha: f64, sigma: f64 },
    Erode { k: usize },
    Dilate { k: usize },
    Shift { dx: i64, dy: i64 },
}

impl PerturbKind {
    pub fn name(&self) -> &'static str {
        match self {
            PerturbKind::Elastic { .. } => "elastic",
            PerturbKind::Erode { .. } => "erode",
            PerturbKind::Dilate { .. } => "dilate",
            PerturbKind::Shift { .. } => "shift",
        }
    }

    pub fn magnitude(&self) -> String {
        match *self {
            PerturbKind::Elastic { alpha, sigma } => format!("alpha={alpha};sigma={sigma}"),
            PerturbKind::Erode { k } | PerturbKind::Dilate { k } => format!("k={k}"),
            PerturbKind::Shift { dx, dy } => format!("dx={dx};dy={dy}"),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            PerturbKind::Elastic { alpha, .. } => alpha == 0.0,
            PerturbKind::Erode { k } | PerturbKind::Dilate { k } => k == 1,
            PerturbKind::Shift { dx, dy } => dx == 0 && dy == 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    #[serde(flatten)]
    pub kind: PerturbKind,
    pub target: PerturbTarget,
}

impl PerturbSpec {
    pub fn label_only(kind: PerturbKind) -> Self {
        Self {
            kind,
            target: PerturbTarget::LabelOnly,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PerturbKind::Elastic { alpha, sigma } => DeformParams::new(alpha, sigma).map(|_| ()),
            PerturbKind::Erode { k } | PerturbKind::Dilate { k } => check_kernel(k),
            PerturbKind::Shift { .. } => Ok(()),
        }
    }
}

fn check_kernel(k: usize) -> Result<()> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "structuring element side must be odd and >= 1, got {k}"
        )));
    }
    Ok(())
}

/// Maps an even kernel size to the next odd one so the square element has
/// a center pixel.
pub fn odd_kernel_size(k: usize) -> usize {
    if k.is_multiple_of(2) {
        log::warn!("kernel size {k} is even; using {}", k + 1);
        k + 1
    } else {
        k
    }
}

/// Warps the label (and, when synchronized, the image) with one freshly
/// drawn field.
pub fn perturb_elastic(
    image: &Image,
    label: &LabelMap,
    params: DeformParams,
    target: PerturbTarget,
    rng: &mut RngStream,
) -> Result<(Image, LabelMap)> {
    check_dims(label.dims(), image.dims())?;
    let (w, h) = label.dims();
    let field = build_displacement(w, h, params, rng)?;
    let label_out = warp_label(label, &field)?;
    let image_out = match target {
        PerturbTarget::Synchronized => warp_image(image, &field)?,
        PerturbTarget::LabelOnly => image.clone(),
    };
    Ok((image_out, label_out))
}

/// Sliding-window test along one axis. `erode` keeps a pixel when no unset
/// pixel lies in the window; dilation sets it when any set pixel does.
/// Pixels outside the raster never change the result.
fn window_pass(bits: &[bool], w: usize, h: usize, r: usize, horizontal: bool, erode: bool) -> Vec<bool> {
    let (lines, len) = if horizontal { (h, w) } else { (w, h) };
    let at = |line: usize, i: usize| if horizontal { line * w + i } else { i * w + line };
    let mut out = vec![false; w * h];
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            let hit = bits[at(line, i)] != erode;
            prefix[i + 1] = prefix[i] + usize::from(hit);
        }
        for i in 0..len {
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(len - 1);
            let hits = prefix[hi + 1] - prefix[lo];
            out[at(line, i)] = if erode { hits == 0 } else { hits > 0 };
        }
    }
    out
}

fn morph_mask(mask: &ClassMask, k: usize, erode: bool) -> Result<ClassMask> {
    check_kernel(k)?;
    let (w, h) = mask.dims();
    let r = k / 2;
    let pass = window_pass(mask.bits(), w, h, r, true, erode);
    let bits = window_pass(&pass, w, h, r, false, erode);
    Ok(ClassMask::from_bits(w, h, bits, mask.class_id()))
}

/// Binary erosion with a `k x k` square.
pub fn erode_mask(mask: &ClassMask, k: usize) -> Result<ClassMask> {
    morph_mask(mask, k, true)
}

/// Binary dilation with a `k x k` square.
pub fn dilate_mask(mask: &ClassMask, k: usize) -> Result<ClassMask> {
    morph_mask(mask, k, false)
}

/// Applies the operation to every class mask and recomposes: the lowest
/// claiming class wins, unclaimed pixels become ignore.
pub fn perturb_morph(label: &LabelMap, op: MorphOp, k: usize) -> Result<LabelMap> {
    check_kernel(k)?;
    let masks = decompose(label)
        .iter()
        .map(|m| match op {
            MorphOp::Erode => erode_mask(m, k),
            MorphOp::Dilate => dilate_mask(m, k),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(recompose(label, &masks))
}

/// Translates the label by `(dx, dy)` pixels; vacated pixels become ignore.
pub fn perturb_shift(label: &LabelMap, dx: i64, dy: i64) -> Result<LabelMap> {
    let (w, h) = label.dims();
    if dx.unsigned_abs() as usize >= w || dy.unsigned_abs() as usize >= h {
        return Err(Error::invalid(format!("shift ({dx}, {dy}) out of range for {w}x{h}")));
    }
    let mut out = vec![label.ignore_index(); w * h];
    for y in 0..h {
        let sy = y as i64 - dy;
        if !(0..h as i64).contains(&sy) {
            continue;
        }
        for x in 0..w {
            let sx = x as i64 - dx;
            if (0..w as i64).contains(&sx) {
                out[y * w + x] = label.get(sx as usize, sy as usize);
            }
        }
    }
    Ok(label.with_data_unchecked(out))
}

/// Applies one spec. Only elastic perturbations touch the image, and only
/// when synchronized.
pub fn apply_spec(
    spec: &PerturbSpec,
    image: &Image,
    label: &LabelMap,
    rng: &mut RngStream,
) -> Result<(Image, LabelMap)> {
    spec.validate()?;
    match spec.kind {
        PerturbKind::Elastic { alpha, sigma } => {
            perturb_elastic(image, label, DeformParams::new(alpha, sigma)?, spec.target, rng)
        }
        PerturbKind::Erode { k } => Ok((image.clone(), perturb_morph(label, MorphOp::Erode, k)?)),
        PerturbKind::Dilate { k } => Ok((image.clone(), perturb_morph(label, MorphOp::Dilate, k)?)),
        PerturbKind::Shift { dx, dy } => Ok((image.clone(), perturb_shift(label, dx, dy)?)),
    }
}

/// Scores a dataset-wide confusion tally.
pub type MetricHook = dyn Fn(&ConfusionAccumulator) -> Result<f64> + Sync;

/// Default sweep metric: mIoU where pixels a perturbation left unlabeled
/// count as misses.
pub fn void_as_miss_miou(acc: &ConfusionAccumulator) -> Result<f64> {
    acc.miou_void_as_miss().map(|r| r.mean)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub kind: String,
    pub magnitude: String,
    pub target: String,
    #[serde(rename = "mean_mIoU")]
    pub mean_miou: f64,
    pub n_samples: usize,
}

#[derive(Clone, Debug, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// `(sample index, message)` for samples that failed to load or
    /// perturb.
    pub failures: Vec<(usize, String)>,
}

impl SweepReport {
    /// Writes `kind,magnitude,target,mean_mIoU,n_samples`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for row in &self.rows {
            writer
                .serialize(row)
                .map_err(|e| Error::io("<csv>", std::io::Error::other(e)))?;
        }
        writer.flush().map_err(|e| Error::io("<csv>", e))
    }
}

type SpecTallies = Vec<(ConfusionAccumulator, usize)>;

/// Perturbs every sample with every spec and scores the result against the
/// clean labels. Elastic specs draw from `substream(seed, [spec, sample])`.
pub fn sweep<S: SampleSource + ?Sized>(
    source: &S,
    grid: &[PerturbSpec],
    seed: u64,
    metric: &MetricHook,
) -> Result<SweepReport> {
    if grid.is_empty() {
        return Err(Error::invalid("sweep grid is empty"));
    }
    for spec in grid {
        spec.validate()?;
    }
    // Class values are u8 with 255 reserved, so 255 rows cover any map.
    let classes = usize::from(IGNORE_INDEX);
    let fresh = || -> SpecTallies { grid.iter().map(|_| (ConfusionAccumulator::new(classes), 0)).collect() };

    let per_sample: Vec<std::result::Result<SpecTallies, (usize, String)>> = (0..source.len())
        .into_par_iter()
        .map(|i| {
            let (image, label) = source.load(i).map_err(|e| (i, e.to_string()))?;
            let mut tallies = fresh();
            for (s, spec) in grid.iter().enumerate() {
                let mut rng = RngStream::substream(seed, &[s as u64, i as u64]);
                let (_, perturbed) = apply_spec(spec, &image, &label, &mut rng).map_err(|e| (i, e.to_string()))?;
                tallies[s]
                    .0
                    .accumulate(&label, &perturbed)
                    .map_err(|e| (i, e.to_string()))?;
                tallies[s].1 += 1;
            }
            Ok(tallies)
        })
        .collect();

    let mut totals = fresh();
    let mut failures = Vec::new();
    for result in per_sample {
        match result {
            Ok(tallies) => {
                for (t, (acc, n)) in totals.iter_mut().zip(tallies) {
                    t.0.merge(&acc)?;
                    t.1 += n;
                }
            }
            Err(f) => failures.push(f),
        }
    }

    let rows = grid
        .iter()
        .zip(&totals)
        .map(|(spec, (acc, n))| SweepRow {
            kind: spec.kind.name().to_string(),
            magnitude: spec.kind.magnitude(),
            target: spec.target.to_string(),
            mean_miou: metric(acc).unwrap_or(f64::NAN),
            n_samples: *n,
        })
        .collect();
    Ok(SweepReport { rows, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::miou;

    /// Brute-force square-window morphology over explicit neighbors.
    fn brute(mask: &ClassMask, k: usize, erode: bool) -> Vec<bool> {
        let (w, h) = mask.dims();
        let r = (k / 2) as i64;
        let mut out = vec![false; w * h];
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let mut all = true;
                let mut any = false;
                for oy in -r..=r {
                    for ox in -r..=r {
                        let (sx, sy) = (x + ox, y + oy);
                        if sx < 0 || sy < 0 || sx >= w as i64 || sy >= h as i64 {
                            continue;
                        }
                        let b = mask.get(sx as usize, sy as usize);
                        all &= b;
                        any |= b;
                    }
                }
                out[(y * w as i64 + x) as usize] = if erode { all } else { any };
            }
        }
        out
    }

    fn random_mask(w: usize, h: usize, seed: u64) -> ClassMask {
        let mut rng = RngStream::new(seed);
        let bits = (0..w * h).map(|_| rng.chance(0.6)).collect();
        ClassMask::from_bits(w, h, bits, 0)
    }

    #[test]
    fn morphology_matches_brute_force() {
        for seed in 0..20 {
            let m = random_mask(23, 17, seed);
            for k in [1, 3, 5, 7] {
                assert_eq!(erode_mask(&m, k).unwrap().bits(), brute(&m, k, true).as_slice());
                assert_eq!(dilate_mask(&m, k).unwrap().bits(), brute(&m, k, false).as_slice());
            }
        }
    }

    #[test]
    fn unit_kernel_is_identity() {
        let label = LabelMap::new(3, 2, vec![0, 1, 255, 2, 2, 1], 3).unwrap();
        assert_eq!(perturb_morph(&label, MorphOp::Erode, 1).unwrap(), label);
        assert_eq!(perturb_morph(&label, MorphOp::Dilate, 1).unwrap(), label);
    }

    #[test]
    fn dilate_single_pixel() {
        let m = ClassMask::from_pixels(7, 7, 0, &[(3, 3)]);
        let d = dilate_mask(&m, 3).unwrap();
        assert_eq!(d.area(), 9);
        for (x, y) in d.pixels() {
            assert!((2..=4).contains(&x) && (2..=4).contains(&y));
        }
    }

    #[test]
    fn opening_recovers_square() {
        let pixels: Vec<_> = (22..42).flat_map(|y| (22..42).map(move |x| (x, y))).collect();
        let square = ClassMask::from_pixels(64, 64, 1, &pixels);
        for k in [3, 7, 15] {
            let opened = dilate_mask(&erode_mask(&square, k).unwrap(), k).unwrap();
            assert_eq!(opened, square);
        }
    }

    #[test]
    fn even_kernel_rejected_and_mapped() {
        let label = LabelMap::filled(4, 4, 0, 1).unwrap();
        assert!(perturb_morph(&label, MorphOp::Erode, 14).is_err());
        assert!(perturb_morph(&label, MorphOp::Erode, 0).is_err());
        assert_eq!(odd_kernel_size(14), 15);
        assert_eq!(odd_kernel_size(28), 29);
        assert_eq!(odd_kernel_size(21), 21);
    }

    #[test]
    fn shift_cases() {
        let label = LabelMap::new(3, 3, vec![0, 1, 2, 0, 1, 2, 0, 1, 2], 3).unwrap();
        assert_eq!(perturb_shift(&label, 0, 0).unwrap(), label);
        let s = perturb_shift(&label, 1, 0).unwrap();
        assert_eq!(s.data(), &[255, 0, 1, 255, 0, 1, 255, 0, 1]);
        let back = perturb_shift(&perturb_shift(&label, -1, -1).unwrap(), 1, 1).unwrap();
        assert_ne!(back, label);
        assert!(perturb_shift(&label, 3, 0).is_err());
        assert!(perturb_shift(&label, 0, -3).is_err());
    }

    #[test]
    fn elastic_zero_alpha_and_label_only() {
        let mut img = Image::black(20, 20);
        img.set_pixel(5, 5, [9, 9, 9]);
        let label = LabelMap::new(20, 20, (0..400).map(|i| u8::from(i % 20 > 9)).collect(), 2).unwrap();
        let p = DeformParams::new(0.0, 3.0).unwrap();
        let (oi, ol) = perturb_elastic(&img, &label, p, PerturbTarget::Synchronized, &mut RngStream::new(1)).unwrap();
        assert_eq!((oi, ol), (img.clone(), label.clone()));
        let p = DeformParams::new(8.0, 3.0).unwrap();
        let (oi, _) = perturb_elastic(&img, &label, p, PerturbTarget::LabelOnly, &mut RngStream::new(1)).unwrap();
        assert_eq!(oi, img);
    }

    #[test]
    fn sweep_zero_spec_scores_one() {
        let label = LabelMap::new(8, 8, (0..64).map(|i| u8::from(i % 8 > 3)).collect(), 2).unwrap();
        let samples = vec![(Image::black(8, 8), label.clone())];
        let grid = [
            PerturbSpec::label_only(PerturbKind::Shift { dx: 0, dy: 0 }),
            PerturbSpec::label_only(PerturbKind::Erode { k: 1 }),
            PerturbSpec::label_only(PerturbKind::Elastic { alpha: 0.0, sigma: 3.0 }),
            PerturbSpec::label_only(PerturbKind::Shift { dx: 2, dy: 2 }),
        ];
        let report = sweep(&samples, &grid, 0, &void_as_miss_miou).unwrap();
        assert_eq!(report.rows.len(), 4);
        for row in &report.rows[..3] {
            assert_eq!(row.mean_miou, 1.0);
            assert_eq!(row.n_samples, 1);
        }
        assert!(report.rows[3].mean_miou < 1.0);
        assert!(sweep(&samples, &[], 0, &void_as_miss_miou).is_err());

        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("kind,magnitude,target,mean_mIoU,n_samples\n"));
        assert_eq!(text.lines().count(), 5);
        // The plain metric ignores vacated pixels and stays perfect.
        assert_eq!(miou(&label, &perturb_shift(&label, 0, 0).unwrap()).unwrap().mean, 1.0);
    }
}
