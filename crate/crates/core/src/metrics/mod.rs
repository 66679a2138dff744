//! Evaluation metrics: motion feature extractors, distribution distances,
//! and music/motion beat alignment.

mod beats;
mod frechet;
mod geometric;
mod kinetic;
mod report;

pub use beats::{
    beat_align, detect_kinematic_beats, moving_average, strict_local_minima, BeatKind, BeatSet,
    BEAT_SIGMA,
};
pub use frechet::{diversity, frechet_distance};
pub use geometric::{geometric_features, GEOMETRIC_DIM};
pub use kinetic::{kinetic_features, KINETIC_DIM};
pub use report::{evaluate_sets, MetricReport};
