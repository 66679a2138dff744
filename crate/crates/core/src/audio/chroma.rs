//! Pitch-class energy folding of the magnitude spectrum.

use crate::audio::stft::PowerSpectrogram;

pub const PITCH_CLASSES: usize = 12;

/// Nearest equal-tempered pitch class, C = 0, A4 = 440 Hz (class 9).
fn pitch_class(freq: f64) -> usize {
    let midi = 69.0 + 12.0 * (freq / 440.0).log2();
    (midi.round() as i64).rem_euclid(12) as usize
}

/// Row-major (frames x 12): bin magnitudes folded by pitch class, each frame
/// max-normalized; silent frames stay all-zero.
pub fn chroma_from_power(spec: &PowerSpectrogram) -> Vec<f64> {
    let class_of_bin: Vec<usize> = (0..spec.bins)
        .map(|b| pitch_class((b.max(1)) as f64 * spec.params.bin_hz()))
        .collect();
    let mut out = vec![0.0; spec.frames * PITCH_CLASSES];
    for t in 0..spec.frames {
        let row = spec.row(t);
        let chroma = &mut out[t * PITCH_CLASSES..(t + 1) * PITCH_CLASSES];
        for b in 1..spec.bins {
            chroma[class_of_bin[b]] += row[b].sqrt();
        }
        let max = chroma.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            for v in chroma.iter_mut() {
                *v /= max;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::stft::{power_spectrogram, StftParams};
    use crate::audio::AudioClip;
    use std::f64::consts::TAU;

    fn params() -> StftParams {
        StftParams::for_rate(30720).unwrap()
    }

    fn mix(freqs: &[(f64, f64)], n: usize) -> AudioClip {
        let s: Vec<f64> = (0..n)
            .map(|i| {
                freqs
                    .iter()
                    .map(|&(f, a)| a * (TAU * f * i as f64 / 30720.0).sin())
                    .sum()
            })
            .collect();
        AudioClip::new(s, 30720).unwrap()
    }

    fn chroma_of(clip: &AudioClip) -> (Vec<f64>, usize) {
        let spec = power_spectrogram(clip, &params()).unwrap();
        (chroma_from_power(&spec), spec.frames)
    }

    #[test]
    fn pitch_class_arithmetic() {
        assert_eq!(pitch_class(440.0), 9); // A4
        assert_eq!(pitch_class(880.0), 9); // A5
        assert_eq!(pitch_class(261.63), 0); // C4
        assert_eq!(pitch_class(493.88), 11); // B4
    }

    #[test]
    fn a440_peaks_at_class_a_every_frame() {
        let (c, frames) = chroma_of(&mix(&[(440.0, 0.8)], 8192));
        for t in 0..frames {
            let row = &c[t * 12..(t + 1) * 12];
            let argmax = (0..12).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(argmax, 9, "frame {t}: {row:?}");
            assert!((row[9] - 1.0).abs() < 1e-12, "max-normalized");
        }
    }

    #[test]
    fn octave_pair_keeps_the_same_class() {
        let (c, frames) = chroma_of(&mix(&[(440.0, 0.4), (880.0, 0.4)], 8192));
        for t in 0..frames {
            let row = &c[t * 12..(t + 1) * 12];
            let argmax = (0..12).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(argmax, 9, "frame {t}");
        }
    }

    #[test]
    fn silence_gives_zero_chroma() {
        let (c, _) = chroma_of(&AudioClip::new(vec![0.0; 4096], 30720).unwrap());
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gain_leaves_normalized_chroma_unchanged() {
        let a = mix(&[(440.0, 0.25)], 4096);
        let b = AudioClip::new(a.samples.iter().map(|s| 3.0 * s).collect(), 30720).unwrap();
        let (ca, _) = chroma_of(&a);
        let (cb, _) = chroma_of(&b);
        for (x, y) in ca.iter().zip(&cb) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
