//! Inverse-remap warping of label maps and images, and small-mask
//! suppression of displacement fields.
//!
//! Output pixel `(x, y)` samples the source at
//! `(clamp(x + dx, 0, w - 1), clamp(y + dy, 0, h - 1))` with bilinear
//! weights. Label maps are warped channel-wise: each class (and the ignore
//! value) is treated as a binary mask, sampled bilinearly, and the output
//! takes the class with the largest weight. Ties go to the lowest class
//! index, and the ignore value loses every tie against a real class.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Result};
use crate::fields::DisplacementField;
use crate::label::{class_bbox, BBox, ClassMask, Image, LabelMap};

const PAR_ROWS: usize = 64;

/// Warp convention recorded alongside augmentation outputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarpSemantics {
    #[default]
    InverseRemap,
}

/// Bilinear footprint of one sample: four source indices and their weights,
/// in the order top-left, top-right, bottom-left, bottom-right.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Footprint {
    pub idx: [usize; 4],
    pub weight: [f64; 4],
}

#[inline]
pub(crate) fn footprint(x: usize, y: usize, dx: f32, dy: f32, w: usize, h: usize) -> Footprint {
    let sx = (x as f64 + f64::from(dx)).clamp(0.0, (w - 1) as f64);
    let sy = (y as f64 + f64::from(dy)).clamp(0.0, (h - 1) as f64);
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    Footprint {
        idx: [y0 * w + x0, y0 * w + x1, y1 * w + x0, y1 * w + x1],
        weight: [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy],
    }
}

/// Winning class among the (up to four) values under a footprint.
#[inline]
fn vote(src: &[u8], fp: &Footprint, ignore: u8) -> u8 {
    let mut classes = [0u8; 4];
    let mut scores = [0.0f64; 4];
    let mut n = 0;
    for k in 0..4 {
        let c = src[fp.idx[k]];
        match classes[..n].iter().position(|&v| v == c) {
            Some(j) => scores[j] += fp.weight[k],
            None => {
                classes[n] = c;
                scores[n] = fp.weight[k];
                n += 1;
            }
        }
    }
    let mut best = 0;
    for j in 1..n {
        if beats(classes[j], scores[j], classes[best], scores[best], ignore) {
            best = j;
        }
    }
    classes[best]
}

#[inline]
fn beats(c: u8, s: f64, best_c: u8, best_s: f64, ignore: u8) -> bool {
    if s != best_s {
        return s > best_s;
    }
    match (c == ignore, best_c == ignore) {
        (false, true) => true,
        (true, false) => false,
        _ => c < best_c,
    }
}

/// Warps a label map with the given field. The output only contains values
/// present in the input.
pub fn warp_label(label: &LabelMap, field: &DisplacementField) -> Result<LabelMap> {
    check_dims(label.dims(), field.dims())?;
    let (w, h) = label.dims();
    let src = label.data();
    let ignore = label.ignore_index();
    let mut out = vec![0u8; w * h];
    let row = |(y, out_row): (usize, &mut [u8])| {
        for (x, o) in out_row.iter_mut().enumerate() {
            let (dx, dy) = field.at(x, y);
            if dx == 0.0 && dy == 0.0 {
                *o = src[y * w + x];
            } else {
                *o = vote(src, &footprint(x, y, dx, dy, w, h), ignore);
            }
        }
    };
    if h >= PAR_ROWS {
        out.par_chunks_mut(w).enumerate().for_each(row);
    } else {
        out.chunks_mut(w).enumerate().for_each(row);
    }
    Ok(label.with_data_unchecked(out))
}

/// Warps an RGB image channel-wise with bilinear interpolation, rounding to
/// the nearest 8-bit value.
pub fn warp_image(image: &Image, field: &DisplacementField) -> Result<Image> {
    check_dims(image.dims(), field.dims())?;
    let (w, h) = image.dims();
    let src = image.data();
    let mut out = Image::black(w, h);
    let row = |(y, out_row): (usize, &mut [u8])| {
        for x in 0..w {
            let (dx, dy) = field.at(x, y);
            let fp = footprint(x, y, dx, dy, w, h);
            for c in 0..3 {
                let v: f64 = (0..4).map(|k| fp.weight[k] * f64::from(src[fp.idx[k] * 3 + c])).sum();
                out_row[x * 3 + c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    };
    if h >= PAR_ROWS {
        out.data_mut().par_chunks_mut(w * 3).enumerate().for_each(row);
    } else {
        out.data_mut().chunks_mut(w * 3).enumerate().for_each(row);
    }
    Ok(out)
}

/// Margin added around a protected box: `floor(alpha / 2)`.
pub fn suppression_margin(alpha: f64) -> usize {
    (alpha / 2.0).floor().max(0.0) as usize
}

/// The inclusive region zeroed for a box, clipped to the raster.
pub fn suppression_region(bbox: BBox, alpha: f64, width: usize, height: usize) -> BBox {
    let eps = suppression_margin(alpha);
    BBox {
        x_min: bbox.x_min.saturating_sub(eps),
        y_min: bbox.y_min.saturating_sub(eps),
        x_max: (bbox.x_max + eps).min(width - 1),
        y_max: (bbox.y_max + eps).min(height - 1),
    }
}

pub(crate) fn suppress_bbox(field: &mut DisplacementField, bbox: BBox, alpha: f64) -> BBox {
    let region = suppression_region(bbox, alpha, field.width(), field.height());
    field.zero_rect(region.x_min, region.y_min, region.x_max, region.y_max);
    region
}

/// Returns `field` with both components zeroed over the mask's bounding box
/// grown by `floor(alpha / 2)` on every side.
pub fn suppress_small_mask(mask: &ClassMask, field: &DisplacementField, alpha: f64) -> Result<DisplacementField> {
    check_dims(field.dims(), mask.dims())?;
    let bbox = class_bbox(mask)?;
    let mut out = field.clone();
    suppress_bbox(&mut out, bbox, alpha);
    Ok(out)
}

/// Area and bounding box of one connected region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Component {
    pub area: usize,
    pub bbox: BBox,
}

/// 4-connected components of a mask in raster-scan order of their first
/// pixel.
pub fn connected_components(mask: &ClassMask) -> Vec<Component> {
    let (w, h) = mask.dims();
    let bits = mask.bits();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !bits[start] || seen[start] {
            continue;
        }
        let mut area = 0;
        let mut bbox = BBox {
            x_min: start % w,
            y_min: start / w,
            x_max: start % w,
            y_max: start / w,
        };
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            area += 1;
            bbox.x_min = bbox.x_min.min(x);
            bbox.x_max = bbox.x_max.max(x);
            bbox.y_min = bbox.y_min.min(y);
            bbox.y_max = bbox.y_max.max(y);
            let mut push = |j: usize| {
                if bits[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < w {
                push(i + 1);
            }
            if y > 0 {
                push(i - w);
            }
            if y + 1 < h {
                push(i + w);
            }
        }
        out.push(Component { area, bbox });
    }
    out
}
