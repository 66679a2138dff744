//! Mel filterbank, log-mel spectrogram, and cepstral coefficients.

use crate::audio::stft::{power_spectrogram, PowerSpectrogram, StftParams};
use crate::audio::AudioClip;
use crate::error::Result;
use std::f64::consts::PI;

pub const MEL_BANDS: usize = 64;
pub const MFCC_COEFFS: usize = 20;
/// Power floor applied before the log.
pub const LOG_FLOOR: f64 = 1e-10;
pub const MEL_FMIN_HZ: f64 = 20.0;

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters, row-major (MEL_BANDS x bins), spanning 20 Hz to Nyquist.
pub fn mel_filterbank(params: &StftParams) -> Vec<f64> {
    let bins = params.bins();
    let m_lo = hz_to_mel(MEL_FMIN_HZ);
    let m_hi = hz_to_mel(params.sample_rate as f64 / 2.0);
    let pts: Vec<f64> = (0..MEL_BANDS + 2)
        .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (MEL_BANDS + 1) as f64))
        .collect();
    let mut fb = vec![0.0; MEL_BANDS * bins];
    for m in 0..MEL_BANDS {
        let (l, c, r) = (pts[m], pts[m + 1], pts[m + 2]);
        for b in 0..bins {
            let f = b as f64 * params.bin_hz();
            let w = if f <= c { (f - l) / (c - l) } else { (r - f) / (r - c) };
            if w > 0.0 {
                fb[m * bins + b] = w;
            }
        }
    }
    fb
}

/// Row-major (frames x MEL_BANDS) of ln(max(power, LOG_FLOOR)).
pub fn log_mel_spectrogram(spec: &PowerSpectrogram) -> Vec<f64> {
    let fb = mel_filterbank(&spec.params);
    let bins = spec.bins;
    let mut out = vec![0.0; spec.frames * MEL_BANDS];
    for t in 0..spec.frames {
        let row = spec.row(t);
        for m in 0..MEL_BANDS {
            let f = &fb[m * bins..(m + 1) * bins];
            let p: f64 = row.iter().zip(f).map(|(a, b)| a * b).sum();
            out[t * MEL_BANDS + m] = p.max(LOG_FLOOR).ln();
        }
    }
    out
}

/// Orthonormal DCT-II matrix, row-major (n_out x n_in).
pub fn dct_matrix(n_out: usize, n_in: usize) -> Vec<f64> {
    let mut m = vec![0.0; n_out * n_in];
    for k in 0..n_out {
        let a = if k == 0 {
            (1.0 / n_in as f64).sqrt()
        } else {
            (2.0 / n_in as f64).sqrt()
        };
        for j in 0..n_in {
            m[k * n_in + j] = a * (PI * k as f64 * (2 * j + 1) as f64 / (2 * n_in) as f64).cos();
        }
    }
    m
}

/// First MFCC_COEFFS DCT-II coefficients per frame, row-major (frames x 20).
pub fn mfcc_from_log_mel(log_mel: &[f64], frames: usize) -> Vec<f64> {
    debug_assert_eq!(log_mel.len(), frames * MEL_BANDS);
    let dct = dct_matrix(MFCC_COEFFS, MEL_BANDS);
    let mut out = vec![0.0; frames * MFCC_COEFFS];
    for t in 0..frames {
        let x = &log_mel[t * MEL_BANDS..(t + 1) * MEL_BANDS];
        for k in 0..MFCC_COEFFS {
            let row = &dct[k * MEL_BANDS..(k + 1) * MEL_BANDS];
            out[t * MFCC_COEFFS + k] = x.iter().zip(row).map(|(a, b)| a * b).sum();
        }
    }
    out
}

pub fn mfcc(clip: &AudioClip, params: &StftParams) -> Result<Vec<f64>> {
    let spec = power_spectrogram(clip, params)?;
    let lm = log_mel_spectrogram(&spec);
    Ok(mfcc_from_log_mel(&lm, spec.frames))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng_from_seed;
    use rand::Rng;
    use std::f64::consts::TAU;

    fn params() -> StftParams {
        StftParams::for_rate(30720).unwrap()
    }

    fn tone(freq: f64, amp: f64, n: usize) -> AudioClip {
        let s: Vec<f64> = (0..n)
            .map(|i| amp * (TAU * freq * i as f64 / 30720.0).sin())
            .collect();
        AudioClip::new(s, 30720).unwrap()
    }

    fn noise(amp: f64, n: usize, seed: u64) -> AudioClip {
        let mut rng = rng_from_seed(seed);
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-amp..amp)).collect();
        AudioClip::new(s, 30720).unwrap()
    }

    #[test]
    fn filterbank_covers_every_band() {
        let p = params();
        let fb = mel_filterbank(&p);
        assert_eq!(fb.len(), MEL_BANDS * p.bins());
        for m in 0..MEL_BANDS {
            let row = &fb[m * p.bins()..(m + 1) * p.bins()];
            assert!(row.iter().all(|&w| w >= 0.0));
            assert!(row.iter().sum::<f64>() > 0.0, "band {m} captures no bin");
        }
    }

    #[test]
    fn silence_mfcc_is_the_dct_of_the_log_floor() {
        let clip = AudioClip::new(vec![0.0; 8192], 30720).unwrap();
        let c = mfcc(&clip, &params()).unwrap();
        // Constant input: c0 = sqrt(N) * ln(floor), higher coefficients zero.
        let want_c0 = (MEL_BANDS as f64).sqrt() * LOG_FLOOR.ln();
        for t in 0..c.len() / MFCC_COEFFS {
            assert!((c[t * MFCC_COEFFS] - want_c0).abs() < 1e-9);
            for k in 1..MFCC_COEFFS {
                assert!(c[t * MFCC_COEFFS + k].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tone_peaks_in_the_nearest_mel_band() {
        let p = params();
        let spec = power_spectrogram(&tone(480.0, 0.9, 8192), &p).unwrap();
        let lm = log_mel_spectrogram(&spec);
        // Band whose triangle center is nearest 480 Hz.
        let m_lo = hz_to_mel(MEL_FMIN_HZ);
        let m_hi = hz_to_mel(15360.0);
        let step = (m_hi - m_lo) / (MEL_BANDS + 1) as f64;
        let want = (0..MEL_BANDS)
            .min_by(|&a, &b| {
                let ca = (mel_to_hz(m_lo + step * (a + 1) as f64) - 480.0).abs();
                let cb = (mel_to_hz(m_lo + step * (b + 1) as f64) - 480.0).abs();
                ca.total_cmp(&cb)
            })
            .unwrap();
        for t in 0..spec.frames {
            let row = &lm[t * MEL_BANDS..(t + 1) * MEL_BANDS];
            let got = (0..MEL_BANDS).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert!(
                (got as i64 - want as i64).abs() <= 1,
                "frame {t}: band {got}, expected near {want}"
            );
        }
    }

    #[test]
    fn gain_shifts_only_c0() {
        // Broadband noise keeps every band above the log floor, so doubling
        // amplitude adds ln(4) to each band: c0 moves by sqrt(N)*ln(4),
        // c1..c19 cancel exactly.
        let a = noise(0.4, 8192, 7);
        let b = AudioClip::new(a.samples.iter().map(|s| 2.0 * s).collect(), 30720).unwrap();
        let ca = mfcc(&a, &params()).unwrap();
        let cb = mfcc(&b, &params()).unwrap();
        let want_shift = (MEL_BANDS as f64).sqrt() * 4f64.ln();
        for t in 0..ca.len() / MFCC_COEFFS {
            let d0 = cb[t * MFCC_COEFFS] - ca[t * MFCC_COEFFS];
            assert!((d0 - want_shift).abs() < 1e-6, "frame {t}: {d0}");
            for k in 1..MFCC_COEFFS {
                let d = cb[t * MFCC_COEFFS + k] - ca[t * MFCC_COEFFS + k];
                assert!(d.abs() < 1e-6, "frame {t} c{k}: {d}");
            }
        }
    }

    #[test]
    fn tone_and_noise_have_distinct_profiles() {
        let ct = mfcc(&tone(480.0, 0.5, 8192), &params()).unwrap();
        let cn = mfcc(&noise(0.5, 8192, 11), &params()).unwrap();
        let frames = ct.len() / MFCC_COEFFS;
        let mut max_gap = 0.0f64;
        for t in 1..frames.min(cn.len() / MFCC_COEFFS) {
            for k in 1..MFCC_COEFFS {
                max_gap = max_gap.max((ct[t * MFCC_COEFFS + k] - cn[t * MFCC_COEFFS + k]).abs());
            }
        }
        assert!(max_gap > 1.0, "profiles too similar: {max_gap}");
    }

    #[test]
    fn dct_matrix_is_orthonormal() {
        let d = dct_matrix(MEL_BANDS, MEL_BANDS);
        for i in 0..MEL_BANDS {
            for j in 0..MEL_BANDS {
                let dot: f64 = (0..MEL_BANDS)
                    .map(|k| d[i * MEL_BANDS + k] * d[j * MEL_BANDS + k])
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }
}
