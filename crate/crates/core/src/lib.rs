//! Random Fourier features with per-feature standardization on a training
//! window, Monte-Carlo limit kernels, sample-complexity bounds and the
//! experiment harness that ties them together.

pub mod bounds;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod oracle;
mod par;
pub mod rff;
pub mod stats;
pub mod stream;

pub use error::{Error, Result};
pub use par::with_workers;
pub use rff::{FeatureBank, ScaleMode, StandardizedBank, WindowId};
pub use stream::{derive_stream, StreamKey};
