//! Radiograph view classification core.
//!
//! Everything here is pure computation over in-memory values and builds
//! without `std` (only `alloc` is required). File formats, the command line
//! and filesystem IO live in the companion `radview` crate.
//!
//! Module map:
//!
//! * [`taxonomy`]: the 48 view classes, parsing and laterality collapse.
//! * [`imaging`]: 16-bit rasters, orientation, padding, resampling, redaction.
//! * [`dataset`]: view-name standardization, set audits, splits, statistics.
//! * [`engine`]: tensors, layers with hand-written backward passes, SGDM.
//! * [`archzoo`]: trainable mini-ResNet and static descriptors of the six
//!   reference architectures with exact parameter counts.
//! * [`augment`]: seeded zoom / crop / histogram-shift augmentation.
//! * [`trainer`]: training and evaluation loops.
//! * [`metrics`]: accuracy, ROC AUC, confusion and laterality analytics.
//! * [`stats`]: 2×2 chi-squared association tests.
//! * [`cam`]: class activation maps and overlay rendering.
//! * [`synthgen`]: procedural phantom corpus with laterality asymmetry.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod archzoo;
pub mod augment;
pub mod cam;
pub mod dataset;
pub mod engine;
pub mod imaging;
pub mod metrics;
pub mod rng;
pub mod stats;
pub mod synthgen;
pub mod taxonomy;
pub mod trainer;

pub use engine::{Real, Scalar, Tensor};
pub use imaging::{Image16, Orientation, RectRegion};
pub use taxonomy::{NeutralViewLabel, ViewLabel};
