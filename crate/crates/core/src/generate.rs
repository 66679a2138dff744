//! Long-horizon motion synthesis by sliding-window autoregression, plus a
//! freeze diagnostic over the produced motion.
//!
//! Each step runs the full model on the current (motion, music) windows,
//! keeps only the next-frame prediction, and advances both windows by one
//! frame. The emitted frame (rotations projected back onto the orthonormal
//! manifold) is what gets fed back: re-projection each step keeps the input
//! window on the pose manifold, which long rollouts need at this training
//! scale.

use crate::audio::AudioFeatureSequence;
use crate::error::{Error, Result};
use crate::model::{fact_forward, FactParams};
use crate::motion::{decode_pose, encode_pose, forward_kinematics, MotionSequence, Skeleton, JOINT_COUNT};
use crate::numerics::Tensor;

#[derive(Debug, Clone)]
pub struct GenerationRequest {
    /// Exactly seed_frames of starting motion.
    pub seed: MotionSequence,
    /// Features covering at least music_frames + horizon - 1 frames.
    pub music: AudioFeatureSequence,
    /// Output frame count.
    pub horizon: usize,
}

pub fn generate(params: &FactParams, req: &GenerationRequest) -> Result<MotionSequence> {
    let cfg = &params.config;
    if req.horizon == 0 {
        return Err(Error::Config("generation horizon must be at least 1".into()));
    }
    if req.seed.len() != cfg.seed_frames {
        return Err(Error::dimension(
            "generate",
            format!(
                "seed must have exactly {} frames, got {}",
                cfg.seed_frames,
                req.seed.len()
            ),
        ));
    }
    let required = cfg.music_frames + req.horizon - 1;
    if req.music.len() < required {
        return Err(Error::Coverage {
            required,
            available: req.music.len(),
        });
    }

    let t = cfg.seed_frames;
    let dim = cfg.motion_dim;
    let music = req.music.tensor();
    let mcols = music.shape()[1];
    let mut window = req.seed.to_tensor().into_data();
    let next_row = cfg.next_frame_row();
    let mut frames = Vec::with_capacity(req.horizon);
    for k in 0..req.horizon {
        let motion = Tensor::new(&[t, dim], window.clone())?;
        let audio = Tensor::new(
            &[cfg.music_frames, mcols],
            music.data()[k * mcols..(k + cfg.music_frames) * mcols].to_vec(),
        )?;
        let pred = fact_forward(params, &motion, &audio)?;
        let frame = decode_pose(pred.row(next_row))?;
        window.drain(..dim);
        window.extend_from_slice(&encode_pose(&frame));
        frames.push(frame);
    }
    MotionSequence::new(frames)
}

/// Smallest mean per-frame joint displacement over any 2-second span: the
/// mean over 120 consecutive frame-to-frame steps of the mean joint travel,
/// minimized over all span starts. Near-zero values flag frozen output.
pub fn freeze_diagnostic(seq: &MotionSequence, skeleton: &Skeleton) -> Result<f64> {
    const SPAN_STEPS: usize = 120; // 2 seconds of frame-to-frame steps
    if seq.len() < SPAN_STEPS + 1 {
        return Err(Error::InsufficientFrames(format!(
            "freeze diagnostic needs at least {} frames, got {}",
            SPAN_STEPS + 1,
            seq.len()
        )));
    }
    let positions: Vec<[[f64; 3]; JOINT_COUNT]> = seq
        .frames
        .iter()
        .map(|f| forward_kinematics(f, skeleton))
        .collect();
    let steps: Vec<f64> = positions
        .windows(2)
        .map(|w| {
            let mut sum = 0.0;
            for j in 0..JOINT_COUNT {
                let dx = w[1][j][0] - w[0][j][0];
                let dy = w[1][j][1] - w[0][j][1];
                let dz = w[1][j][2] - w[0][j][2];
                sum += (dx * dx + dy * dy + dz * dz).sqrt();
            }
            sum / JOINT_COUNT as f64
        })
        .collect();
    let mut prefix = vec![0.0];
    for s in &steps {
        prefix.push(prefix.last().unwrap() + s);
    }
    let mut min = f64::INFINITY;
    for start in 0..=steps.len() - SPAN_STEPS {
        let span = (prefix[start + SPAN_STEPS] - prefix[start]) / SPAN_STEPS as f64;
        if span < min {
            min = span;
        }
    }
    Ok(min)
}
