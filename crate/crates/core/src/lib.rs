//! Label-only elastic deformation for semantic segmentation training data.
//!
//! The crate deforms segmentation label maps with a smooth random
//! displacement field while leaving the input image untouched (NSegment),
//! optionally freezing the field around small class masks so thin or tiny
//! objects keep their shape (NSegment+). It also ships the companion joint
//! transforms used alongside it (CutOut, CutMix, Random Erasing), a label
//! perturbation harness, mIoU metrics and dataset I/O with a replayable
//! manifest.
//!
//! Coordinates are fixed throughout: `x` is the column in `[0, width)`, `y`
//! is the row in `[0, height)`, and rasters are stored row-major.

pub mod companions;
pub mod dataio;
pub mod error;
pub mod fields;
pub mod label;
pub mod manifest;
pub mod metrics;
pub mod params;
pub mod perturb;
pub mod pipeline;
pub mod rng;
pub mod synthetic;
pub mod warp;

pub use error::{Error, Result};
pub use fields::{build_displacement, gaussian_kernel, DisplacementField, GaussianKernel};
pub use label::{class_bbox, decompose, BBox, ClassMask, Image, LabelMap, IGNORE_INDEX};
pub use params::{AugmentConfig, DeformParams, Mode, OmegaSpace, SuppressionScope, Target};
pub use pipeline::{nsegment, nsegment_plus, AugmentOutcome};
pub use rng::RngStream;
pub use warp::{suppress_small_mask, warp_image, warp_label, WarpSemantics};

/// Library version, shared by the CLI and the manifest header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
