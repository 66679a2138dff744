//! Tempo estimation by envelope autocorrelation and beat placement by
//! dynamic programming.

use crate::error::{Error, Result};

/// Lag bounds in 60 FPS frames: 20 frames = 180 BPM, 60 frames = 60 BPM.
pub const MIN_LAG: usize = 20;
pub const MAX_LAG: usize = 60;
/// Weight of the squared-log interval deviation in the DP objective.
pub const TEMPO_PENALTY: f64 = 100.0;
/// Four seconds of envelope at 60 FPS.
pub const MIN_FRAMES: usize = 240;

#[derive(Debug, Clone)]
pub struct BeatTrack {
    /// Beat positions, ascending frame indices.
    pub frames: Vec<usize>,
    /// 0.0 for degenerate (silent) input.
    pub tempo_bpm: f64,
    pub n_frames: usize,
}

impl BeatTrack {
    pub fn one_hot(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n_frames];
        for &f in &self.frames {
            v[f] = 1.0;
        }
        v
    }
}

/// Tempo from the argmax of the mean-subtracted autocorrelation over the
/// 60-180 BPM lag range (parabolic refinement), then beats maximizing
/// sum env[t_i] - TEMPO_PENALTY * sum ln((t_{i+1}-t_i)/period)^2.
pub fn track_beats(env: &[f64]) -> Result<BeatTrack> {
    let n = env.len();
    if n < MIN_FRAMES {
        return Err(Error::InsufficientAudio(format!(
            "beat tracking needs at least {MIN_FRAMES} envelope frames (4 s at 60 FPS), got {n}"
        )));
    }
    let gmax = env.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if gmax <= 0.0 {
        return Ok(BeatTrack {
            frames: Vec::new(),
            tempo_bpm: 0.0,
            n_frames: n,
        });
    }

    let mu = env.iter().sum::<f64>() / n as f64;
    let mut r = vec![0.0; MAX_LAG + 2];
    for (lag, r_lag) in r.iter_mut().enumerate().take(MAX_LAG + 2).skip(MIN_LAG - 1) {
        *r_lag = (0..n - lag).map(|t| (env[t] - mu) * (env[t + lag] - mu)).sum();
    }
    let mut best = MIN_LAG;
    for lag in MIN_LAG + 1..=MAX_LAG {
        if r[lag] > r[best] {
            best = lag;
        }
    }
    let (ym, y0, yp) = (r[best - 1], r[best], r[best + 1]);
    let denom = ym - 2.0 * y0 + yp;
    let delta = if denom.abs() > 1e-12 {
        (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let period = best as f64 + delta;
    let tempo_bpm = 3600.0 / period;

    // score[t] = env[t] + best continuation; a chain starts fresh when no
    // predecessor beats the empty score of zero.
    let d_lo = ((period / 2.0).round() as usize).max(1);
    let d_hi = (period * 2.0).round() as usize;
    let mut score = vec![0.0; n];
    let mut link = vec![usize::MAX; n];
    for t in 0..n {
        let mut best_v = 0.0;
        let mut best_p = usize::MAX;
        for d in d_lo..=d_hi.min(t) {
            let p = t - d;
            let pen = TEMPO_PENALTY * (d as f64 / period).ln().powi(2);
            let v = score[p] - pen;
            if v > best_v {
                best_v = v;
                best_p = p;
            }
        }
        score[t] = env[t] + best_v;
        link[t] = best_p;
    }
    let mut end = 0;
    for t in 1..n {
        if score[t] > score[end] {
            end = t;
        }
    }
    let mut frames = Vec::new();
    let mut t = end;
    loop {
        frames.push(t);
        if link[t] == usize::MAX {
            break;
        }
        t = link[t];
    }
    frames.reverse();
    Ok(BeatTrack {
        frames,
        tempo_bpm,
        n_frames: n,
    })
}
