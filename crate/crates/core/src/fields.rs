//! Random displacement fields smoothed by a separable Gaussian.

use rayon::prelude::*;

use crate::error::{check_dims, Error, Result};
use crate::params::DeformParams;
use crate::rng::RngStream;

/// Rasters below this many pixels are convolved on the calling thread.
const PAR_THRESHOLD: usize = 64 * 64;

/// Normalized 1-D Gaussian taps; the 2-D kernel is their outer product.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    sigma: f64,
    weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Number of taps, always odd.
    pub fn side(&self) -> usize {
        self.weights.len()
    }

    pub fn radius(&self) -> usize {
        self.weights.len() / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn center_tap(&self) -> f64 {
        self.weights[self.radius()]
    }

    pub fn max_tap(&self) -> f64 {
        self.center_tap()
    }

    /// Dense `side x side` kernel, row-major.
    pub fn to_2d(&self) -> Vec<f64> {
        self.weights
            .iter()
            .flat_map(|&wy| self.weights.iter().map(move |&wx| wy * wx))
            .collect()
    }
}

/// Gaussian kernel with `2 * round(3 * sigma) + 1` taps, rounding half to
/// even as OpenCV does.
pub fn gaussian_kernel(sigma: f64) -> Result<GaussianKernel> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    let radius = (3.0 * sigma).round_ties_even() as usize;
    let denom = 2.0 * sigma * sigma;
    let mut weights: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let t = i as f64 - radius as f64;
            (-t * t / denom).exp()
        })
        .collect();
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(GaussianKernel { sigma, weights })
}

/// Single-channel `f32` raster, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::invalid(format!(
                "field buffer of {} values does not fit {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }
}

/// Per-pixel `(dx, dy)` offsets in pixels. Output pixel `(x, y)` samples the
/// source at `(x + dx, y + dy)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    width: usize,
    height: usize,
    dx: Vec<f32>,
    dy: Vec<f32>,
}

impl DisplacementField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            dx: vec![0.0; width * height],
            dy: vec![0.0; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, dx: f32, dy: f32) -> Self {
        Self {
            width,
            height,
            dx: vec![dx; width * height],
            dy: vec![dy; width * height],
        }
    }

    pub fn from_components(dx: ScalarField, dy: ScalarField) -> Result<Self> {
        check_dims(dx.dims(), dy.dims())?;
        Ok(Self {
            width: dx.width,
            height: dx.height,
            dx: dx.data,
            dy: dy.data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn dx(&self) -> &[f32] {
        &self.dx
    }

    pub fn dy(&self) -> &[f32] {
        &self.dy
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }

    pub fn max_abs(&self) -> f32 {
        self.dx.iter().chain(&self.dy).fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.dx.iter().chain(&self.dy).all(|&v| v == 0.0)
    }

    /// Zeroes both components on the inclusive rectangle, clipped to the
    /// raster.
    pub fn zero_rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize) {
        let x1 = x1.min(self.width - 1);
        let y1 = y1.min(self.height - 1);
        if x0 > x1 || y0 > y1 {
            return;
        }
        for y in y0..=y1 {
            let row = y * self.width;
            self.dx[row + x0..=row + x1].fill(0.0);
            self.dy[row + x0..=row + x1].fill(0.0);
        }
    }
}

/// Two `width x height` rasters of uniform values in `[-1, 1)`. The x
/// component consumes the first `width * height` draws, the y component the
/// next `width * height`.
pub fn raw_field(width: usize, height: usize, rng: &mut RngStream) -> (ScalarField, ScalarField) {
    let n = width * height;
    let mut draw = || (0..n).map(|_| 2.0 * rng.uniform_f32() - 1.0).collect::<Vec<f32>>();
    let dx = draw();
    let dy = draw();
    (
        ScalarField {
            width,
            height,
            data: dx,
        },
        ScalarField {
            width,
            height,
            data: dy,
        },
    )
}

/// Convolves `alpha * raw` with the Gaussian of width `sigma` under zero
/// padding. Output has the input's dimensions and magnitude at most `alpha`.
pub fn smooth_field(raw: &ScalarField, alpha: f64, sigma: f64) -> Result<ScalarField> {
    DeformParams::new(alpha, sigma)?;
    let kernel = gaussian_kernel(sigma)?;
    Ok(convolve_separable(raw, &kernel, alpha))
}

/// Separable zero-padded convolution of `scale * input`. Accumulates in
/// `f64`, stores `f32`.
pub(crate) fn convolve_separable(input: &ScalarField, kernel: &GaussianKernel, scale: f64) -> ScalarField {
    let (w, h) = input.dims();
    let taps = kernel.weights();
    let r = kernel.radius() as isize;
    let parallel = w * h >= PAR_THRESHOLD;

    let mut tmp = vec![0.0f64; w * h];
    let row_pass = |(y, out_row): (usize, &mut [f64])| {
        let src = &input.data[y * w..(y + 1) * w];
        for (x, o) in out_row.iter_mut().enumerate() {
            let lo = (x as isize - r).max(0) as usize;
            let hi = (x as isize + r).min(w as isize - 1) as usize;
            let mut acc = 0.0f64;
            let first_tap = (lo as isize - x as isize + r) as usize;
            for (tap, v) in taps[first_tap..].iter().zip(&src[lo..=hi]) {
                acc += tap * f64::from(*v);
            }
            *o = acc * scale;
        }
    };
    if parallel {
        tmp.par_chunks_mut(w).enumerate().for_each(row_pass);
    } else {
        tmp.chunks_mut(w).enumerate().for_each(row_pass);
    }

    let bound = scale.abs();
    let mut out = vec![0.0f32; w * h];
    let col_pass = |(y, out_row): (usize, &mut [f32])| {
        let lo = (y as isize - r).max(0) as usize;
        let hi = (y as isize + r).min(h as isize - 1) as usize;
        let mut acc = vec![0.0f64; w];
        for sy in lo..=hi {
            let t = taps[(sy as isize - y as isize + r) as usize];
            for (a, &v) in acc.iter_mut().zip(&tmp[sy * w..(sy + 1) * w]) {
                *a += t * v;
            }
        }
        for (o, a) in out_row.iter_mut().zip(acc) {
            *o = a.clamp(-bound, bound) as f32;
        }
    };
    if parallel {
        out.par_chunks_mut(w).enumerate().for_each(col_pass);
    } else {
        out.chunks_mut(w).enumerate().for_each(col_pass);
    }

    ScalarField {
        width: w,
        height: h,
        data: out,
    }
}

/// Draws raw noise for both axes and smooths each with the same `(alpha,
/// sigma)`.
pub fn build_displacement(
    width: usize,
    height: usize,
    params: DeformParams,
    rng: &mut RngStream,
) -> Result<DisplacementField> {
    params.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::invalid("field dimensions must be positive"));
    }
    let kernel = gaussian_kernel(params.sigma)?;
    let (raw_x, raw_y) = raw_field(width, height, rng);
    let dx = convolve_separable(&raw_x, &kernel, params.alpha);
    let dy = convolve_separable(&raw_y, &kernel, params.alpha);
    DisplacementField::from_components(dx, dy)
}
