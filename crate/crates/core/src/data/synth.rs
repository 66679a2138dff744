//! Synthetic beat-locked music/motion pairs with known ground truth.
//!
//! Music is a click track over a steady two-tone bed. Motion drives every
//! moving degree of freedom through one warped phase w = phi - sin(phi),
//! whose rate 1 - cos(phi) vanishes exactly on beats: the whole body pauses
//! there, so kinematic beats are recoverable by construction.

use crate::audio::{AudioClip, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::motion::rotation::mat3_mul;
use crate::motion::{axis_angle_to_matrix, joints, MotionSequence, PoseFrame, FPS};
use crate::numerics::{rng_from_seed, standard_normal};
use rand::Rng;
use std::f64::consts::TAU;

pub const PATTERN_COUNT: u8 = 3;

const CLICK_AMP: f64 = 0.8;
const CLICK_HZ: f64 = 2000.0;
const CLICK_DECAY_S: f64 = 0.002;
const CLICK_LEN_S: f64 = 0.01;
const BED_HZ: [f64; 2] = [220.0, 330.0];
const BED_AMP: [f64; 2] = [0.08, 0.05];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub bpm: f64,
    pub duration_s: f64,
    /// Which choreography family the joints follow (0..PATTERN_COUNT).
    pub pattern: u8,
    /// Scale of smooth rotational jitter, radians.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// `min_seconds` is the shortest clip the consumer can use (typically
    /// music_frames / 60 for a model config).
    pub fn validate(&self, min_seconds: f64) -> Result<()> {
        if !(self.bpm >= 60.0 && self.bpm <= 180.0) {
            return Err(Error::Config(format!(
                "bpm must be in [60,180], got {}",
                self.bpm
            )));
        }
        if !(self.duration_s.is_finite() && self.duration_s >= min_seconds && self.duration_s > 0.0)
        {
            return Err(Error::Config(format!(
                "duration {} s is below the required {min_seconds} s",
                self.duration_s
            )));
        }
        if self.pattern >= PATTERN_COUNT {
            return Err(Error::Config(format!(
                "pattern id {} out of range 0..{PATTERN_COUNT}",
                self.pattern
            )));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config(format!("noise must be >= 0, got {}", self.noise)));
        }
        Ok(())
    }

    pub fn frames(&self) -> usize {
        (self.duration_s * FPS).round() as usize
    }

    /// Beat period in feature frames (60 FPS), possibly fractional.
    pub fn period_frames(&self) -> f64 {
        60.0 * FPS / self.bpm
    }
}

pub struct SyntheticPair {
    pub clip: AudioClip,
    pub motion: MotionSequence,
    /// Ground-truth beat positions in 60 FPS frames.
    pub beat_frames: Vec<usize>,
}

pub fn synthesize_pair(spec: &SyntheticSpec) -> Result<SyntheticPair> {
    spec.validate(0.0)?;
    let frames = spec.frames();
    let period = spec.period_frames();
    let mut beat_frames = Vec::new();
    let mut k = 0usize;
    loop {
        let f = (k as f64 * period).round() as usize;
        if f >= frames {
            break;
        }
        beat_frames.push(f);
        k += 1;
    }
    let motion = synth_motion(spec, frames)?;
    let clip = synth_music(spec, frames, &beat_frames)?;
    Ok(SyntheticPair {
        clip,
        motion,
        beat_frames,
    })
}

/// One smooth jitter harmonic: amp * sin(2 pi freq t + phase), per axis.
struct Wobble {
    amp: [f64; 3],
    freq: [f64; 3],
    phase: [f64; 3],
}

impl Wobble {
    fn draw(rng: &mut impl Rng, scale: f64) -> Wobble {
        let mut w = Wobble {
            amp: [0.0; 3],
            freq: [0.0; 3],
            phase: [0.0; 3],
        };
        for a in 0..3 {
            w.amp[a] = scale * rng.gen::<f64>();
            w.freq[a] = 0.3 + 1.2 * rng.gen::<f64>();
            w.phase[a] = TAU * rng.gen::<f64>();
        }
        w
    }

    fn at(&self, seconds: f64) -> [f64; 3] {
        let mut v = [0.0; 3];
        for a in 0..3 {
            v[a] = self.amp[a] * (TAU * self.freq[a] * seconds + self.phase[a]).sin();
        }
        v
    }
}

/// Per-pattern DOF table: (joint, axis-angle direction, amplitude multiplier,
/// phase function id). Phase functions of the warped phase w keep every
/// velocity proportional to 1 - cos(phi).
fn pattern_dofs(pattern: u8) -> Vec<(usize, [f64; 3], PhaseFn)> {
    use joints::*;
    match pattern {
        // Swinging arms, swaying walk.
        0 => vec![
            (L_SHOULDER, [0.0, 0.9, 0.0], PhaseFn::Sin),
            (R_SHOULDER, [0.0, -0.9, 0.0], PhaseFn::Sin),
            (PELVIS, [0.0, 0.25, 0.0], PhaseFn::SinHalf),
            (NECK, [0.15, 0.0, 0.0], PhaseFn::Sin),
        ],
        // Overhead arm raises with knee dips.
        1 => vec![
            (L_SHOULDER, [0.0, 0.0, 1.5], PhaseFn::RaisedCos),
            (R_SHOULDER, [0.0, 0.0, -1.5], PhaseFn::RaisedCos),
            (L_KNEE, [1.0, 0.0, 0.0], PhaseFn::RaisedCos),
            (R_KNEE, [1.0, 0.0, 0.0], PhaseFn::RaisedCos),
        ],
        // Torso lean with elbow pumps.
        _ => vec![
            (SPINE1, [0.45, 0.0, 0.0], PhaseFn::RaisedCos),
            (SPINE2, [0.45, 0.0, 0.0], PhaseFn::RaisedCos),
            (L_ELBOW, [0.0, 0.0, 1.4], PhaseFn::RaisedCos),
            (R_ELBOW, [0.0, 0.0, -1.4], PhaseFn::RaisedCos),
            (HEAD, [0.2, 0.0, 0.0], PhaseFn::Sin),
        ],
    }
}

enum PhaseFn {
    Sin,       // sin(w)
    SinHalf,   // sin(w/2)
    RaisedCos, // (1 - cos(w)) / 2, in [0,1]
}

impl PhaseFn {
    fn eval(&self, w: f64) -> f64 {
        match self {
            PhaseFn::Sin => w.sin(),
            PhaseFn::SinHalf => (w / 2.0).sin(),
            PhaseFn::RaisedCos => (1.0 - w.cos()) / 2.0,
        }
    }
}

/// Root travel per pattern: a cycloid walk A*w along one axis. Its speed
/// A*(1 - cos(phi)) is strictly unimodal between beats, which keeps the mean
/// joint speed free of spurious minima away from beats.
fn travel_axis(pattern: u8) -> ([f64; 3], f64) {
    match pattern {
        0 => ([1.0, 0.0, 0.0], 0.05),
        1 => ([0.0, 0.0, 1.0], 0.04),
        _ => ([0.70710678, 0.0, 0.70710678], 0.045),
    }
}

fn synth_motion(spec: &SyntheticSpec, frames: usize) -> Result<MotionSequence> {
    let mut rng = rng_from_seed(spec.seed);
    // Per-sequence amplitude individuality, same beat structure.
    let scale = 0.85 + 0.3 * rng.gen::<f64>();
    let dofs = pattern_dofs(spec.pattern);
    let wobbles: Vec<Wobble> = (0..PoseFrame::rest().rotations.len())
        .map(|_| Wobble::draw(&mut rng, spec.noise))
        .collect();
    let trans_wobble = Wobble::draw(&mut rng, spec.noise * 0.2);

    let (axis, travel_amp) = travel_axis(spec.pattern);
    let period = spec.period_frames();
    let mut out = Vec::with_capacity(frames);
    for f in 0..frames {
        let phi = TAU * f as f64 / period;
        let w = phi - phi.sin();
        let seconds = f as f64 / FPS;
        let mut pose = PoseFrame::rest();
        let step = travel_amp * scale * w;
        let wob = trans_wobble.at(seconds);
        for a in 0..3 {
            pose.translation[a] = axis[a] * step + wob[a];
        }
        for (joint, dir, phase) in &dofs {
            let angle = scale * phase.eval(w);
            let aa = [dir[0] * angle, dir[1] * angle, dir[2] * angle];
            pose.rotations[*joint] = axis_angle_to_matrix(&aa);
        }
        if spec.noise > 0.0 {
            for (joint, wobble) in wobbles.iter().enumerate() {
                let jitter = axis_angle_to_matrix(&wobble.at(seconds));
                pose.rotations[joint] = mat3_mul(&pose.rotations[joint], &jitter);
            }
        }
        out.push(pose);
    }
    MotionSequence::new(out)
}

fn synth_music(spec: &SyntheticSpec, frames: usize, beat_frames: &[usize]) -> Result<AudioClip> {
    let sr = DEFAULT_SAMPLE_RATE;
    let hop = sr as usize / FPS as usize;
    let n = frames * hop;
    let mut samples = vec![0.0f64; n];

    let mut rng = rng_from_seed(spec.seed ^ 0x5bd1_e995_9b5f_17c3);
    let bed_gain = 0.8 + 0.4 * rng.gen::<f64>();
    for i in 0..n {
        let t = i as f64 / sr as f64;
        for (hz, amp) in BED_HZ.iter().zip(BED_AMP) {
            samples[i] += bed_gain * amp * (TAU * hz * t).sin();
        }
        if spec.noise > 0.0 {
            samples[i] += spec.noise * 0.05 * standard_normal(&mut rng);
        }
    }

    let click_len = (CLICK_LEN_S * sr as f64) as usize;
    for &frame in beat_frames {
        let start = frame * hop;
        for i in 0..click_len {
            if start + i >= n {
                break;
            }
            let dt = i as f64 / sr as f64;
            samples[start + i] +=
                CLICK_AMP * (TAU * CLICK_HZ * dt).sin() * (-dt / CLICK_DECAY_S).exp();
        }
    }
    AudioClip::new(samples, sr)
}
