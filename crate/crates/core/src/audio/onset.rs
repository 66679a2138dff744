//! Onset envelope (log-mel spectral flux) and peak picking.

use crate::audio::mel::{log_mel_spectrogram, MEL_BANDS};
use crate::audio::stft::{power_spectrogram, StftParams};
use crate::audio::AudioClip;
use crate::error::Result;

/// Half-wave-rectified flux of a log-mel spectrogram, mean over bands;
/// env[0] = 0 by definition.
pub fn envelope_from_log_mel(log_mel: &[f64], bands: usize) -> Vec<f64> {
    let frames = log_mel.len() / bands;
    let mut env = vec![0.0; frames];
    for t in 1..frames {
        let prev = &log_mel[(t - 1) * bands..t * bands];
        let cur = &log_mel[t * bands..(t + 1) * bands];
        env[t] = prev
            .iter()
            .zip(cur)
            .map(|(&a, &b)| (b - a).max(0.0))
            .sum::<f64>()
            / bands as f64;
    }
    env
}

pub fn onset_envelope(clip: &AudioClip, params: &StftParams) -> Result<Vec<f64>> {
    let spec = power_spectrogram(clip, params)?;
    let lm = log_mel_spectrogram(&spec);
    Ok(envelope_from_log_mel(&lm, MEL_BANDS))
}

/// Frames that are strict local maxima over +-3 frames and exceed the
/// +-10-frame mean by 0.1x the global maximum. All-zero input has no peaks.
pub fn pick_peaks(env: &[f64]) -> Vec<usize> {
    let n = env.len();
    let gmax = env.iter().cloned().fold(0.0, f64::max);
    if gmax <= 0.0 {
        return Vec::new();
    }
    let delta = 0.1 * gmax;
    let mut peaks = Vec::new();
    for i in 0..n {
        let lo = i.saturating_sub(3);
        let hi = (i + 3).min(n - 1);
        if !(lo..=hi).all(|j| j == i || env[j] < env[i]) {
            continue;
        }
        let lo = i.saturating_sub(10);
        let hi = (i + 10).min(n - 1);
        let mean = env[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
        if env[i] >= mean + delta {
            peaks.push(i);
        }
    }
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn params() -> StftParams {
        StftParams::for_rate(30720).unwrap()
    }

    /// Decaying 2 kHz click summed in at each given sample offset.
    pub(crate) fn add_clicks(samples: &mut [f64], starts: &[usize], amp: f64, sr: u32) {
        let len = sr as usize / 100; // 10 ms
        for &start in starts {
            for i in 0..len {
                if start + i >= samples.len() {
                    break;
                }
                let dt = i as f64 / sr as f64;
                samples[start + i] += amp * (TAU * 2000.0 * dt).sin() * (-dt / 0.002).exp();
            }
        }
    }

    #[test]
    fn silence_has_zero_envelope() {
        let clip = AudioClip::new(vec![0.0; 30720], 30720).unwrap();
        let env = onset_envelope(&clip, &params()).unwrap();
        assert_eq!(env.len(), 60);
        assert!(env.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn clicks_raise_local_maxima_within_one_frame() {
        let mut s = vec![0.0; 30720 * 2];
        let click_frames = [20usize, 50, 80, 110];
        let starts: Vec<usize> = click_frames.iter().map(|&f| f * 512).collect();
        add_clicks(&mut s, &starts, 0.8, 30720);
        let clip = AudioClip::new(s, 30720).unwrap();
        let env = onset_envelope(&clip, &params()).unwrap();
        for &f in &click_frames {
            let local = (f - 1..=f + 1)
                .max_by(|&a, &b| env[a].total_cmp(&env[b]))
                .unwrap();
            let around: f64 = env[f - 5..=f + 5].iter().cloned().fold(0.0, f64::max);
            assert_eq!(env[local], around, "click at frame {f} is the local max");
            assert!(env[local] > 1.0, "click energy visible");
        }
    }

    #[test]
    fn steady_tone_has_near_zero_flux_after_onset() {
        // Half a second of silence, then a 480 Hz tone starting at frame 30.
        // 480 Hz advances exactly 8 cycles per hop, so once the tone fills the
        // window every analysis frame is identical and the flux vanishes.
        let mut s = vec![0.0; 30720];
        for i in 15360..30720 {
            s[i] = 0.7 * (TAU * 480.0 * (i - 15360) as f64 / 30720.0).sin();
        }
        let clip = AudioClip::new(s, 30720).unwrap();
        let env = onset_envelope(&clip, &params()).unwrap();
        let onset_peak = env[28..=31].iter().cloned().fold(0.0, f64::max);
        assert!(onset_peak > 1.0, "tone onset visible: {onset_peak}");
        // The final frame's window runs past the clip and is zero-padded,
        // which cuts the tone mid-window; skip it.
        for (t, &v) in env.iter().enumerate().take(env.len() - 1).skip(33) {
            assert!(v < 0.01 * onset_peak, "frame {t}: {v} vs peak {onset_peak}");
        }
    }

    #[test]
    fn pick_peaks_on_zero_envelope_is_empty() {
        assert!(pick_peaks(&[0.0; 100]).is_empty());
    }

    #[test]
    fn single_impulse_is_a_peak() {
        let mut env = vec![0.0; 50];
        env[23] = 2.0;
        assert_eq!(pick_peaks(&env), vec![23]);
    }

    #[test]
    fn close_impulses_keep_only_the_larger() {
        let mut env = vec![0.0; 50];
        env[20] = 1.0;
        env[22] = 3.0;
        assert_eq!(pick_peaks(&env), vec![22]);
    }

    #[test]
    fn small_bumps_below_the_mean_threshold_are_skipped() {
        // A strict local max that fails the mean + 0.1*gmax test.
        let mut env = vec![1.0; 60];
        env[10] = 10.0; // sets the global max and the floor delta = 1.0
        env[40] = 1.5; // strict local max but below mean(~1) + 1.0
        assert_eq!(pick_peaks(&env), vec![10]);
    }
}
