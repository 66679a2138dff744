//! Music-conditioned motion model: configuration, parameters, forward pass,
//! training loop, and checkpointing.

pub mod checkpoint;
pub mod config;
pub mod forward;
pub mod params;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{FactConfig, Fusion, MaskMode, RunConfig, Supervision, TrainSettings};
pub use forward::{attention_forward, build_forward, fact_forward, future_n_loss, ForwardGraph};
pub use params::{init_model, parameter_catalog, FactParams, Tower, INIT_STD};
pub use train::{train_model, train_step, TrainReport, WindowedData};
