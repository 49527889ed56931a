//! Synthetic label maps and images built from convex shapes, for tests,
//! sweeps without a dataset, and demos.

use crate::label::{Image, LabelMap};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Rect { x0: usize, y0: usize, x1: usize, y1: usize },
    Disc { cx: f64, cy: f64, r: f64 },
}

impl Shape {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        match *self {
            Shape::Rect { x0, y0, x1, y1 } => (x0..=x1).contains(&x) && (y0..=y1).contains(&y),
            Shape::Disc { cx, cy, r } => {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                dx * dx + dy * dy <= r * r
            }
        }
    }
}

/// Paints shapes in order over a background class; later shapes win.
pub fn paint(width: usize, height: usize, background: u8, shapes: &[(Shape, u8)], num_classes: usize) -> LabelMap {
    let mut data = vec![background; width * height];
    for y in 0..height {
        for x in 0..width {
            for &(shape, class) in shapes {
                if shape.contains(x, y) {
                    data[y * width + x] = class;
                }
            }
        }
    }
    LabelMap::new(width, height, data, num_classes).expect("painted classes are in range")
}

/// Background class 0 with `shapes` random rectangles and discs of classes
/// `1..num_classes`. Shape sizes span roughly 1/16 to 1/3 of the shorter
/// side.
pub fn random_label(width: usize, height: usize, shapes: usize, num_classes: usize, rng: &mut RngStream) -> LabelMap {
    assert!(num_classes >= 2, "need a background and at least one shape class");
    let short = width.min(height) as f64;
    let list: Vec<(Shape, u8)> = (0..shapes)
        .map(|_| {
            let class = rng.int_inclusive(1, num_classes - 1) as u8;
            let size = rng.uniform_range(short / 16.0, short / 3.0).max(1.0);
            let cx = rng.uniform_range(0.0, width as f64);
            let cy = rng.uniform_range(0.0, height as f64);
            let shape = if rng.chance(0.5) {
                Shape::Disc { cx, cy, r: size / 2.0 }
            } else {
                let half = (size / 2.0) as usize;
                let (x, y) = (cx as usize, cy as usize);
                Shape::Rect {
                    x0: x.saturating_sub(half),
                    y0: y.saturating_sub(half),
                    x1: (x + half).min(width - 1),
                    y1: (y + half).min(height - 1),
                }
            };
            (shape, class)
        })
        .collect();
    paint(width, height, 0, &list, num_classes)
}

/// Uniformly random class per pixel, with an optional share of ignore
/// pixels. Useful for fuzzing.
pub fn noise_label(
    width: usize,
    height: usize,
    num_classes: usize,
    ignore_share: f64,
    rng: &mut RngStream,
) -> LabelMap {
    let data = (0..width * height)
        .map(|_| {
            if rng.chance(ignore_share) {
                crate::label::IGNORE_INDEX
            } else {
                rng.index(num_classes) as u8
            }
        })
        .collect();
    LabelMap::new(width, height, data, num_classes).expect("values are in range")
}

/// Fixed display color for a class; ignore is black.
pub fn class_color(class: u8, ignore: u8) -> [u8; 3] {
    if class == ignore {
        return [0, 0, 0];
    }
    const PALETTE: [[u8; 3]; 12] = [
        [128, 64, 128],
        [70, 130, 180],
        [220, 20, 60],
        [107, 142, 35],
        [250, 170, 30],
        [0, 0, 142],
        [152, 251, 152],
        [190, 153, 153],
        [255, 255, 255],
        [102, 102, 156],
        [0, 80, 100],
        [244, 35, 232],
    ];
    let base = PALETTE[usize::from(class) % PALETTE.len()];
    let turn = (usize::from(class) / PALETTE.len()) as u8;
    [
        base[0].wrapping_add(turn.wrapping_mul(37)),
        base[1].wrapping_add(turn.wrapping_mul(91)),
        base[2].wrapping_add(turn.wrapping_mul(53)),
    ]
}

/// Renders a label map with [`class_color`].
pub fn colorize(label: &LabelMap) -> Image {
    let mut img = Image::black(label.width(), label.height());
    for y in 0..label.height() {
        for x in 0..label.width() {
            img.set_pixel(x, y, class_color(label.get(x, y), label.ignore_index()));
        }
    }
    img
}

/// A photo-like stand-in: class colors plus per-pixel noise.
pub fn textured_image(label: &LabelMap, rng: &mut RngStream) -> Image {
    let mut img = colorize(label);
    for v in img.data_mut() {
        let jitter = rng.int_inclusive(0, 40) as i32 - 20;
        *v = (i32::from(*v) + jitter).clamp(0, 255) as u8;
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_label_is_valid_and_seeded() {
        let a = random_label(64, 48, 6, 4, &mut RngStream::new(3));
        let b = random_label(64, 48, 6, 4, &mut RngStream::new(3));
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&v| v < 4));
        assert!(a.classes_present().contains(&0));
    }

    #[test]
    fn shapes_paint_in_order() {
        let l = paint(
            10,
            10,
            0,
            &[
                (
                    Shape::Rect {
                        x0: 0,
                        y0: 0,
                        x1: 4,
                        y1: 4,
                    },
                    1,
                ),
                (
                    Shape::Disc {
                        cx: 4.0,
                        cy: 4.0,
                        r: 1.0,
                    },
                    2,
                ),
            ],
            3,
        );
        assert_eq!(l.get(0, 0), 1);
        assert_eq!(l.get(4, 4), 2);
        assert_eq!(l.get(9, 9), 0);
    }
}
