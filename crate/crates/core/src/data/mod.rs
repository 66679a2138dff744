//! Dataset plumbing: synthesis, windowing, and leakage-free splits.

mod dataset;
mod split;
mod synth;
mod window;

pub use dataset::{
    build_synthetic_dataset, SyntheticDataset, DATASET_BPMS, DATASET_NOISE, MIN_DURATION_S,
};
pub use split::{split_dataset, DatasetIndex, IndexEntry, Split};
pub use synth::{synthesize_pair, SyntheticPair, SyntheticSpec, PATTERN_COUNT};
pub use window::{make_windows, WindowSpec};
