//! Raster domain types: label maps, per-class masks, bounding boxes and RGB
//! images.

use crate::error::{Error, Result};

/// Class value reserved for "no label".
pub const IGNORE_INDEX: u8 = 255;

/// Dense per-pixel class-index raster.
///
/// Every pixel holds either a class index `< num_classes` or the ignore
/// index. Values are stored row-major, `data[y * width + x]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    data: Vec<u8>,
    ignore_index: u8,
    num_classes: usize,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, data: Vec<u8>, num_classes: usize) -> Result<Self> {
        Self::with_ignore(width, height, data, num_classes, IGNORE_INDEX)
    }

    pub fn with_ignore(
        width: usize,
        height: usize,
        data: Vec<u8>,
        num_classes: usize,
        ignore_index: u8,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidLabel(format!(
                "raster must be non-empty, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidLabel(format!(
                "expected {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        if num_classes > usize::from(ignore_index) {
            return Err(Error::InvalidLabel(format!(
                "num_classes {num_classes} collides with ignore index {ignore_index}"
            )));
        }
        if let Some(bad) = data
            .iter()
            .find(|&&v| v != ignore_index && usize::from(v) >= num_classes)
        {
            return Err(Error::InvalidLabel(format!(
                "pixel value {bad} is neither < {num_classes} nor the ignore index"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            ignore_index,
            num_classes,
        })
    }

    /// Builds a map whose class count is one past the largest non-ignore
    /// value present.
    pub fn infer_classes(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        let num_classes = data
            .iter()
            .filter(|&&v| v != IGNORE_INDEX)
            .map(|&v| usize::from(v) + 1)
            .max()
            .unwrap_or(0);
        Self::new(width, height, data, num_classes)
    }

    pub fn filled(width: usize, height: usize, value: u8, num_classes: usize) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], num_classes)
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn ignore_index(&self) -> u8 {
        self.ignore_index
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Returns a copy with the pixel buffer replaced, keeping class count and
    /// ignore index. The new buffer is validated.
    pub fn with_data(&self, data: Vec<u8>) -> Result<Self> {
        Self::with_ignore(self.width, self.height, data, self.num_classes, self.ignore_index)
    }

    /// Internal constructor for buffers already known to satisfy the
    /// invariants (values drawn from an existing valid map).
    pub(crate) fn with_data_unchecked(&self, data: Vec<u8>) -> Self {
        debug_assert_eq!(data.len(), self.width * self.height);
        Self {
            width: self.width,
            height: self.height,
            data,
            ignore_index: self.ignore_index,
            num_classes: self.num_classes,
        }
    }

    /// Sorted list of class values present, excluding the ignore index.
    pub fn classes_present(&self) -> Vec<u8> {
        let hist = self.histogram();
        (0..=u8::MAX)
            .filter(|&c| c != self.ignore_index && hist[usize::from(c)] > 0)
            .collect()
    }

    pub fn histogram(&self) -> [usize; 256] {
        let mut hist = [0usize; 256];
        for &v in &self.data {
            hist[usize::from(v)] += 1;
        }
        hist
    }

    pub fn class_mask(&self, class_id: u8) -> ClassMask {
        let bits: Vec<bool> = self.data.iter().map(|&v| v == class_id).collect();
        ClassMask::from_bits(self.width, self.height, bits, class_id)
    }
}

/// Binary membership raster for one class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
    class_id: u8,
    area: usize,
}

impl ClassMask {
    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>, class_id: u8) -> Self {
        assert_eq!(bits.len(), width * height, "mask buffer size");
        let area = bits.iter().filter(|&&b| b).count();
        Self {
            width,
            height,
            bits,
            class_id,
            area,
        }
    }

    /// Mask with the listed `(x, y)` pixels set.
    pub fn from_pixels(width: usize, height: usize, class_id: u8, pixels: &[(usize, usize)]) -> Self {
        let mut bits = vec![false; width * height];
        for &(x, y) in pixels {
            bits[y * width + x] = true;
        }
        Self::from_bits(width, height, bits, class_id)
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

    pub fn class_id(&self) -> u8 {
        self.class_id
    }

    pub fn area(&self) -> usize {
        self.area
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn complement(&self) -> ClassMask {
        let bits = self.bits.iter().map(|&b| !b).collect();
        ClassMask::from_bits(self.width, self.height, bits, self.class_id)
    }
}

/// Inclusive axis-aligned pixel box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl BBox {
    pub fn width(&self) -> usize {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> usize {
        self.y_max - self.y_min + 1
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }
}

/// Splits a label map into one mask per class present, in ascending class
/// order. Ignore pixels belong to no mask.
pub fn decompose(label: &LabelMap) -> Vec<ClassMask> {
    label
        .classes_present()
        .into_iter()
        .map(|c| label.class_mask(c))
        .collect()
}

/// Inverse of [`decompose`]: the lowest class claiming a pixel wins, pixels
/// claimed by no mask become the ignore index.
pub fn recompose(template: &LabelMap, masks: &[ClassMask]) -> LabelMap {
    let mut sorted: Vec<&ClassMask> = masks.iter().collect();
    sorted.sort_by_key(|m| m.class_id());
    let mut data = vec![template.ignore_index(); template.width() * template.height()];
    for (i, px) in data.iter_mut().enumerate() {
        if let Some(m) = sorted.iter().find(|m| m.bits[i]) {
            *px = m.class_id();
        }
    }
    template.with_data_unchecked(data)
}

/// Tightest box around every set pixel of the mask.
pub fn class_bbox(mask: &ClassMask) -> Result<BBox> {
    let mut bbox: Option<BBox> = None;
    for (x, y) in mask.pixels() {
        let b = bbox.get_or_insert(BBox {
            x_min: x,
            y_min: y,
            x_max: x,
            y_max: y,
        });
        b.x_min = b.x_min.min(x);
        b.y_min = b.y_min.min(y);
        b.x_max = b.x_max.max(x);
        b.y_max = b.y_max.max(y);
    }
    bbox.ok_or(Error::EmptySegment)
}

/// Interleaved 8-bit RGB raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Image {
    pub const CHANNELS: usize = 3;

    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height * Self::CHANNELS {
            return Err(Error::invalid(format!(
                "RGB buffer of {} bytes does not fit {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn black(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height * Self::CHANNELS],
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * Self::CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * Self::CHANNELS;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}
