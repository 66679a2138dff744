//! Kinematic beat detection and the music/motion beat alignment score.

use crate::error::{Error, Result};
use crate::motion::{joint_velocities, MotionSequence, Skeleton, JOINT_COUNT};

/// Gaussian kernel width for alignment scoring, in frames at 60 FPS.
pub const BEAT_SIGMA: f64 = 3.0;

const SMOOTH_RADIUS: usize = 2; // 5-frame centered window

/// Finite differences of joint positions carry cancellation noise around
/// 1e-13 relative; minima this shallow are numeric artifacts, not beats.
const NOISE_MARGIN_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeatKind {
    Kinematic,
    Music,
}

/// Strictly increasing beat positions in frame indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeatSet {
    frames: Vec<usize>,
    kind: BeatKind,
}

impl BeatSet {
    pub fn new(frames: Vec<usize>, kind: BeatKind) -> Result<Self> {
        for w in frames.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::MetricInput(format!(
                    "beat frames must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { frames, kind })
    }

    pub fn frames(&self) -> &[usize] {
        &self.frames
    }

    pub fn kind(&self) -> BeatKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Centered moving average with the window truncated at the edges, so the
/// output has the same length as the input.
pub fn moving_average(curve: &[f64], radius: usize) -> Vec<f64> {
    let n = curve.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            curve[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Indices i where both neighbors exceed curve[i] by more than `margin`;
/// endpoints never qualify. Margin 0 is exact strictness.
pub fn strict_local_minima(curve: &[f64], margin: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 1..curve.len().saturating_sub(1) {
        if curve[i - 1] > curve[i] + margin && curve[i + 1] > curve[i] + margin {
            out.push(i);
        }
    }
    out
}

/// Beats are strict local minima of the 5-frame-smoothed mean joint speed.
/// A beat at index t marks the frame transition t -> t+1 as the slow point.
pub fn detect_kinematic_beats(m: &MotionSequence, s: &Skeleton) -> Result<BeatSet> {
    if m.len() < 5 {
        return Err(Error::InsufficientFrames(format!(
            "beat detection needs at least 5 frames, got {}",
            m.len()
        )));
    }
    let vels = joint_velocities(m, s)?;
    let speed: Vec<f64> = vels
        .iter()
        .map(|v| {
            v.iter()
                .map(|j| (j[0] * j[0] + j[1] * j[1] + j[2] * j[2]).sqrt())
                .sum::<f64>()
                / JOINT_COUNT as f64
        })
        .collect();
    let smoothed = moving_average(&speed, SMOOTH_RADIUS);
    let peak = smoothed.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    BeatSet::new(
        strict_local_minima(&smoothed, NOISE_MARGIN_REL * peak),
        BeatKind::Kinematic,
    )
}

/// Mean over kinematic beats of exp(-d^2 / (2 sigma^2)) where d is the
/// distance to the nearest music beat. One-directional: music beats with no
/// nearby kinematic beat do not lower the score.
pub fn beat_align(kin: &BeatSet, mus: &BeatSet, sigma: f64) -> Result<f64> {
    if kin.is_empty() {
        return Err(Error::MetricInput("no kinematic beats to score".into()));
    }
    if mus.is_empty() {
        return Err(Error::MetricInput("no music beats to score against".into()));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::MetricInput(format!("sigma must be positive, got {sigma}")));
    }
    let denom = 2.0 * sigma * sigma;
    let total: f64 = kin
        .frames
        .iter()
        .map(|&t| {
            let nearest = mus
                .frames
                .iter()
                .map(|&u| (t as f64 - u as f64).abs())
                .fold(f64::INFINITY, f64::min);
            (-nearest * nearest / denom).exp()
        })
        .sum();
    Ok(total / kin.len() as f64)
}
