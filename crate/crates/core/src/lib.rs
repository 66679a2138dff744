//! Music-conditioned 3D dance generation at desk scale.
//!
//! A three-transformer sequence model (motion tower, audio tower, cross-modal
//! stack) predicts future 219-dim pose frames from a seed motion window and a
//! 35-dim music feature stream; long sequences come from sliding-window
//! autoregression. The crate also carries the full evaluation suite (Frechet
//! distances over kinetic/geometric motion features, diversity, beat
//! alignment) and a synthetic beat-locked dataset generator so the whole
//! pipeline is verifiable end to end without external data.

pub mod audio;
pub mod data;
pub mod error;
pub mod generate;
pub mod metrics;
pub mod model;
pub mod motion;
pub mod numerics;
pub mod pipeline;

pub use error::{Error, Result};
pub use numerics::Tensor;
