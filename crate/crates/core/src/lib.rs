//! Frequency-restriction image augmentation and the Tail Interaction layer.
//!
//! The crate is split along the processing chain:
//!
//! * [`raster`]: the shared image types, grayscale conversion and PNG/PNM codecs.
//! * [`spatial`]: Gaussian low-pass and grayscale high-frequency extraction.
//! * [`spectral`]: the two-step high-pass filter (mask, then amplitude/phase scaling).
//! * [`tail`]: Tail Interaction attention with dual normalization and an exact backward pass.
//! * [`harness`]: a small leave-one-domain-out experiment built on the pieces above.
//! * [`gradcheck`]: central-difference checks of the hand-written gradients.
//!
//! Batch entry points go through [`par`], which uses rayon when the `parallel`
//! feature is enabled and plain iterators otherwise. Results never depend on
//! which path ran.

pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod par;
pub mod raster;
pub mod seed;
pub mod spatial;
pub mod spectral;
pub mod tail;

pub use error::{Error, Result};
pub use raster::{GrayImage, Image};
