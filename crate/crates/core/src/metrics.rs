//! Confusion tallies and (mean) intersection-over-union.

use crate::error::{check_dims, Error, Result};
use crate::label::LabelMap;

/// `C x C` pixel tallies, row = reference class, column = other class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionAccumulator {
    num_classes: usize,
    counts: Vec<u64>,
    ignored: u64,
    /// Per reference class: pixels whose other-side value is ignore.
    ref_to_void: Vec<u64>,
}

/// Per-class IoU (`None` where the class has an empty union) and the mean
/// over the defined entries.
#[derive(Clone, Debug, PartialEq)]
pub struct MiouReport {
    pub per_class: Vec<Option<f64>>,
    pub mean: f64,
}

impl ConfusionAccumulator {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
            ignored: 0,
            ref_to_void: vec![0; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn count(&self, reference: usize, other: usize) -> u64 {
        self.counts[reference * self.num_classes + other]
    }

    pub fn ignored(&self) -> u64 {
        self.ignored
    }

    pub fn counted(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn check_value(&self, v: u8, ignore: u8) -> Result<()> {
        if v != ignore && usize::from(v) >= self.num_classes {
            return Err(Error::InvalidLabel(format!(
                "class {v} out of range for {} classes",
                self.num_classes
            )));
        }
        Ok(())
    }

    /// Tallies every pixel where neither map holds the ignore index; every
    /// other pixel is counted as ignored.
    pub fn accumulate(&mut self, reference: &LabelMap, other: &LabelMap) -> Result<()> {
        check_dims(reference.dims(), other.dims())?;
        let (ri, oi) = (reference.ignore_index(), other.ignore_index());
        for (&r, &o) in reference.data().iter().zip(other.data()) {
            self.check_value(r, ri)?;
            self.check_value(o, oi)?;
        }
        for (&r, &o) in reference.data().iter().zip(other.data()) {
            if r == ri || o == oi {
                self.ignored += 1;
                if r != ri {
                    self.ref_to_void[usize::from(r)] += 1;
                }
            } else {
                self.counts[usize::from(r) * self.num_classes + usize::from(o)] += 1;
            }
        }
        Ok(())
    }

    /// Adds another accumulator's tallies. Class counts must agree.
    pub fn merge(&mut self, other: &ConfusionAccumulator) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::invalid(format!(
                "cannot merge accumulators over {} and {} classes",
                self.num_classes, other.num_classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.ref_to_void.iter_mut().zip(&other.ref_to_void) {
            *a += b;
        }
        self.ignored += other.ignored;
        Ok(())
    }

    fn report(&self, extra_union: impl Fn(usize) -> u64) -> Result<MiouReport> {
        let c = self.num_classes;
        let per_class: Vec<Option<f64>> = (0..c)
            .map(|k| {
                let tp = self.count(k, k);
                let row: u64 = (0..c).map(|j| self.count(k, j)).sum();
                let col: u64 = (0..c).map(|i| self.count(i, k)).sum();
                let union = row + col - tp + extra_union(k);
                (union > 0).then(|| tp as f64 / union as f64)
            })
            .collect();
        let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
        if defined.is_empty() {
            return Err(Error::NoData);
        }
        let mean = defined.iter().sum::<f64>() / defined.len() as f64;
        Ok(MiouReport { per_class, mean })
    }

    /// IoU per class and their mean; classes with an empty union are left
    /// out of the mean.
    pub fn miou(&self) -> Result<MiouReport> {
        self.report(|_| 0)
    }

    /// Like [`miou`](Self::miou), but a reference pixel whose counterpart is
    /// the ignore index counts against its class. Used to score label
    /// perturbations that vacate pixels.
    pub fn miou_void_as_miss(&self) -> Result<MiouReport> {
        self.report(|k| self.ref_to_void[k])
    }
}

/// One-shot mIoU between two maps.
pub fn miou(reference: &LabelMap, other: &LabelMap) -> Result<MiouReport> {
    let classes = reference.num_classes().max(other.num_classes());
    let mut acc = ConfusionAccumulator::new(classes);
    acc.accumulate(reference, other)?;
    acc.miou()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halves() -> (LabelMap, LabelMap) {
        let data = (0..16).map(|i| u8::from(i % 4 >= 2)).collect();
        let reference = LabelMap::new(4, 4, data, 2).unwrap();
        let other = LabelMap::filled(4, 4, 0, 2).unwrap();
        (reference, other)
    }

    #[test]
    fn identical_maps_are_diagonal() {
        let (r, _) = halves();
        let mut acc = ConfusionAccumulator::new(2);
        acc.accumulate(&r, &r).unwrap();
        assert_eq!(acc.count(0, 1) + acc.count(1, 0), 0);
        assert_eq!(acc.count(0, 0) + acc.count(1, 1), 16);
        let rep = acc.miou().unwrap();
        assert_eq!(rep.mean, 1.0);
    }

    #[test]
    fn all_ignore_reference() {
        let r = LabelMap::filled(3, 3, 255, 2).unwrap();
        let o = LabelMap::filled(3, 3, 1, 2).unwrap();
        let mut acc = ConfusionAccumulator::new(2);
        acc.accumulate(&r, &o).unwrap();
        assert_eq!(acc.counted(), 0);
        assert_eq!(acc.ignored(), 9);
        assert!(matches!(acc.miou(), Err(Error::NoData)));
    }

    #[test]
    fn two_pixel_tally() {
        let r = LabelMap::new(2, 1, vec![0, 1], 2).unwrap();
        let o = LabelMap::new(2, 1, vec![0, 0], 2).unwrap();
        let mut acc = ConfusionAccumulator::new(2);
        acc.accumulate(&r, &o).unwrap();
        assert_eq!((acc.count(0, 0), acc.count(1, 0)), (1, 1));
    }

    #[test]
    fn hand_counted_quarter() {
        let (r, o) = halves();
        let rep = miou(&r, &o).unwrap();
        assert_eq!(rep.per_class, vec![Some(0.5), Some(0.0)]);
        assert_eq!(rep.mean, 0.25);
    }

    #[test]
    fn disjoint_via_ignore_is_no_data() {
        let r = LabelMap::new(2, 1, vec![0, 255], 1).unwrap();
        let o = LabelMap::new(2, 1, vec![255, 0], 1).unwrap();
        assert!(matches!(miou(&r, &o), Err(Error::NoData)));
    }

    #[test]
    fn void_as_miss_penalizes_vacated_pixels() {
        let r = LabelMap::filled(2, 2, 0, 1).unwrap();
        let o = LabelMap::new(2, 2, vec![0, 0, 0, 255], 1).unwrap();
        let mut acc = ConfusionAccumulator::new(1);
        acc.accumulate(&r, &o).unwrap();
        assert_eq!(acc.miou().unwrap().mean, 1.0);
        assert_eq!(acc.miou_void_as_miss().unwrap().mean, 0.75);
    }

    #[test]
    fn rejects_out_of_range_and_mismatch() {
        let r = LabelMap::filled(2, 2, 3, 4).unwrap();
        let mut acc = ConfusionAccumulator::new(2);
        assert!(acc.accumulate(&r, &r).is_err());
        let o = LabelMap::filled(2, 3, 0, 4).unwrap();
        assert!(ConfusionAccumulator::new(4).accumulate(&r, &o).is_err());
        assert!(ConfusionAccumulator::new(2)
            .merge(&ConfusionAccumulator::new(3))
            .is_err());
    }
}
