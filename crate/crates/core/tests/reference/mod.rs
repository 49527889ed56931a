//! Deliberately slow reference implementations used as test oracles.

#![allow(dead_code)]

use nsegment::fields::ScalarField;
use nsegment::{DisplacementField, GaussianKernel, LabelMap};

/// Direct 2-D convolution of `alpha * raw` with the outer-product kernel,
/// zero padding, all in f64.
pub fn dense_smooth(raw: &ScalarField, alpha: f64, kernel: &GaussianKernel) -> Vec<f64> {
    let (w, h) = raw.dims();
    let side = kernel.side();
    let r = kernel.radius() as isize;
    let k2 = kernel.to_2d();
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for j in -r..=r {
                for i in -r..=r {
                    let (sx, sy) = (x + i, y + j);
                    if sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize {
                        continue;
                    }
                    let weight = k2[((j + r) as usize) * side + (i + r) as usize];
                    acc += weight * alpha * f64::from(raw.get(sx as usize, sy as usize));
                }
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
    out
}

/// Per-pixel inverse remap with one bilinear channel per class value and an
/// argmax; ties go to the lowest class, and ignore loses every tie.
pub fn naive_warp(label: &LabelMap, field: &DisplacementField) -> Vec<u8> {
    let (w, h) = label.dims();
    let ignore = label.ignore_index();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = field.at(x, y);
            let sx = (x as f64 + f64::from(dx)).clamp(0.0, (w - 1) as f64);
            let sy = (y as f64 + f64::from(dy)).clamp(0.0, (h - 1) as f64);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let corners = [
                (label.get(x0, y0), (1.0 - fx) * (1.0 - fy)),
                (label.get(x1, y0), fx * (1.0 - fy)),
                (label.get(x0, y1), (1.0 - fx) * fy),
                (label.get(x1, y1), fx * fy),
            ];
            let channel = |c: u8| {
                corners
                    .iter()
                    .filter(|(v, _)| *v == c)
                    .fold(0.0, |acc, (_, wt)| acc + wt)
            };
            let mut best: Option<(u8, f64)> = None;
            // Ignore is visited last so it can only win outright.
            let candidates = (0..=u8::MAX).filter(|&c| c != ignore).chain([ignore]);
            for c in candidates {
                if !corners.iter().any(|(v, _)| *v == c) {
                    continue;
                }
                let s = channel(c);
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((c, s));
                }
            }
            out.push(best.unwrap().0);
        }
    }
    out
}
