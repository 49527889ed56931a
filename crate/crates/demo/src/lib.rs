//! WebAssembly front for the label-deformation library. A `Scene` holds one
//! synthetic sample; every method returns an RGBA buffer the page blits to
//! a canvas.

use wasm_bindgen::prelude::*;

use nsegment::fields::build_displacement;
use nsegment::metrics::ConfusionAccumulator;
use nsegment::perturb::{apply_spec, odd_kernel_size, PerturbKind, PerturbSpec};
use nsegment::pipeline::suppress_small_regions;
use nsegment::synthetic::{colorize, random_label, textured_image};
use nsegment::{DeformParams, DisplacementField, Image, LabelMap, RngStream, SuppressionScope, IGNORE_INDEX};

const CLASSES: usize = 6;
const SHAPES: usize = 10;

fn rgba(img: &Image) -> Vec<u8> {
    img.data()
        .chunks_exact(3)
        .flat_map(|p| [p[0], p[1], p[2], 255])
        .collect()
}

fn hsv(h: f64, s: f64, v: f64) -> [u8; 3] {
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - f * s), v * (1.0 - (1.0 - f) * s));
    let (r, g, b) = match i as i64 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [
        (r * 255.0).round() as u8,
        (g * 255.0).round() as u8,
        (b * 255.0).round() as u8,
    ]
}

/// Direction as hue, magnitude as brightness; zeroed (suppressed) pixels
/// come out black.
pub fn field_colors(field: &DisplacementField, alpha: f64) -> Image {
    let (w, h) = field.dims();
    // Smoothed fields rarely approach alpha; normalize by the observed peak.
    let peak = f64::from(field.max_abs()).max(1e-9).min(alpha.max(1e-9));
    let mut img = Image::black(w, h);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = field.at(x, y);
            let (dx, dy) = (f64::from(dx), f64::from(dy));
            let mag = (dx * dx + dy * dy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let hue = (dy.atan2(dx) / std::f64::consts::TAU).rem_euclid(1.0);
            img.set_pixel(x, y, hsv(hue, 1.0, (mag / peak).min(1.0)));
        }
    }
    img
}

#[wasm_bindgen]
pub struct Scene {
    image: Image,
    label: LabelMap,
}

/// Deformation knobs shared by [`Scene::deform`] and [`Scene::field`].
#[derive(Clone, Copy, Debug)]
pub struct Knobs {
    pub alpha: f64,
    pub sigma: f64,
    pub theta: usize,
    pub plus: bool,
    pub seed: u64,
}

impl Scene {
    pub fn label(&self) -> &LabelMap {
        &self.label
    }

    /// The field a deformation with these knobs would apply, after
    /// suppression when `plus` is set.
    pub fn displacement(&self, k: Knobs) -> Result<(DisplacementField, Vec<u8>), String> {
        let params = DeformParams::new(k.alpha, k.sigma).map_err(|e| e.to_string())?;
        let (w, h) = self.label.dims();
        let mut rng = RngStream::new(k.seed);
        let mut field = build_displacement(w, h, params, &mut rng).map_err(|e| e.to_string())?;
        let suppressed = if k.plus {
            suppress_small_regions(&self.label, &mut field, k.alpha, k.theta, SuppressionScope::Class)
        } else {
            Vec::new()
        };
        Ok((field, suppressed))
    }

    pub fn deformed(&self, k: Knobs) -> Result<LabelMap, String> {
        let (field, _) = self.displacement(k)?;
        nsegment::warp_label(&self.label, &field).map_err(|e| e.to_string())
    }

    pub fn perturbed(&self, kind: &str, magnitude: f64, seed: u64) -> Result<LabelMap, String> {
        let kind = match kind {
            "shift" => {
                let m = magnitude.round() as i64;
                PerturbKind::Shift { dx: m, dy: m }
            }
            "erode" => PerturbKind::Erode {
                k: odd_kernel_size(magnitude.round().max(1.0) as usize),
            },
            "dilate" => PerturbKind::Dilate {
                k: odd_kernel_size(magnitude.round().max(1.0) as usize),
            },
            "elastic" => PerturbKind::Elastic {
                alpha: magnitude,
                sigma: 5.0,
            },
            other => return Err(format!("unknown perturbation {other:?}")),
        };
        let spec = PerturbSpec::label_only(kind);
        let (_, out) =
            apply_spec(&spec, &self.image, &self.label, &mut RngStream::new(seed)).map_err(|e| e.to_string())?;
        Ok(out)
    }
}

#[wasm_bindgen]
impl Scene {
    /// A `size x size` scene of random discs and rectangles.
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, seed: u32) -> Result<Scene, String> {
        if !(8..=1024).contains(&size) {
            return Err(format!("size must be in [8, 1024], got {size}"));
        }
        let mut rng = RngStream::new(u64::from(seed));
        let label = random_label(size, size, SHAPES, CLASSES, &mut rng);
        let image = textured_image(&label, &mut rng);
        Ok(Scene { image, label })
    }

    pub fn width(&self) -> usize {
        self.label.width()
    }

    pub fn height(&self) -> usize {
        self.label.height()
    }

    pub fn image_rgba(&self) -> Vec<u8> {
        rgba(&self.image)
    }

    pub fn label_rgba(&self) -> Vec<u8> {
        rgba(&colorize(&self.label))
    }

    /// Class areas as `class:pixels` pairs, for the page's legend.
    pub fn class_areas(&self) -> String {
        let hist = self.label.histogram();
        (0..CLASSES)
            .filter(|&c| hist[c] > 0)
            .map(|c| format!("{c}:{}", hist[c]))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Deformed label, colored.
    pub fn deform(&self, alpha: f64, sigma: f64, theta: usize, plus: bool, seed: u32) -> Result<Vec<u8>, String> {
        let k = Knobs {
            alpha,
            sigma,
            theta,
            plus,
            seed: u64::from(seed),
        };
        Ok(rgba(&colorize(&self.deformed(k)?)))
    }

    /// Classes the NSegment+ variant would freeze with this `alpha`/`theta`.
    pub fn suppressed(&self, alpha: f64, sigma: f64, theta: usize, seed: u32) -> Result<Vec<u8>, String> {
        let k = Knobs {
            alpha,
            sigma,
            theta,
            plus: true,
            seed: u64::from(seed),
        };
        Ok(self.displacement(k)?.1)
    }

    /// Displacement field as a color wheel image.
    pub fn field(&self, alpha: f64, sigma: f64, theta: usize, plus: bool, seed: u32) -> Result<Vec<u8>, String> {
        let k = Knobs {
            alpha,
            sigma,
            theta,
            plus,
            seed: u64::from(seed),
        };
        Ok(rgba(&field_colors(&self.displacement(k)?.0, alpha)))
    }

    /// Label after `shift` / `erode` / `dilate` / `elastic` noise, colored;
    /// unlabeled pixels are black.
    pub fn perturb(&self, kind: &str, magnitude: f64, seed: u32) -> Result<Vec<u8>, String> {
        Ok(rgba(&colorize(&self.perturbed(kind, magnitude, u64::from(seed))?)))
    }

    /// mIoU of the perturbed label against the clean one, unlabeled pixels
    /// counted as misses.
    pub fn perturb_miou(&self, kind: &str, magnitude: f64, seed: u32) -> Result<f64, String> {
        let out = self.perturbed(kind, magnitude, u64::from(seed))?;
        let mut acc = ConfusionAccumulator::new(usize::from(IGNORE_INDEX));
        acc.accumulate(&self.label, &out).map_err(|e| e.to_string())?;
        acc.miou_void_as_miss().map(|r| r.mean).map_err(|e| e.to_string())
    }
}
