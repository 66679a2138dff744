//! Short-time Fourier analysis pinned to the 60 FPS hop grid.

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use rustfft::{num_complex::Complex, FftPlanner};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftParams {
    pub sample_rate: u32,
    /// Samples per 60 FPS frame: sample_rate / 60.
    pub hop: usize,
    /// Analysis window, two hops.
    pub window: usize,
}

impl StftParams {
    pub fn for_rate(sample_rate: u32) -> Result<StftParams> {
        if sample_rate == 0 || sample_rate % 60 != 0 {
            return Err(Error::Config(format!(
                "sample rate {sample_rate} is not a positive multiple of 60; resample first"
            )));
        }
        let hop = (sample_rate / 60) as usize;
        Ok(StftParams {
            sample_rate,
            hop,
            window: 2 * hop,
        })
    }

    /// One-sided bin count.
    pub fn bins(&self) -> usize {
        self.window / 2 + 1
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate as f64 / self.window as f64
    }
}

/// One-sided power spectrogram, row-major (frames x bins).
#[derive(Debug, Clone)]
pub struct PowerSpectrogram {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<f64>,
    pub params: StftParams,
}

impl PowerSpectrogram {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }
}

/// Frame k covers samples [k*hop, k*hop + window), Hann-weighted and
/// zero-padded past the end; frame count floor(len/hop) matches the 60 FPS
/// feature grid.
pub fn power_spectrogram(clip: &AudioClip, params: &StftParams) -> Result<PowerSpectrogram> {
    if clip.sample_rate != params.sample_rate {
        return Err(Error::Config(format!(
            "clip at {} Hz does not match analysis rate {} Hz",
            clip.sample_rate, params.sample_rate
        )));
    }
    let n = clip.samples.len();
    if n < params.window {
        return Err(Error::InsufficientAudio(format!(
            "need at least {} samples for one analysis window, got {}",
            params.window, n
        )));
    }
    let hann: Vec<f64> = (0..params.window)
        .map(|i| 0.5 - 0.5 * (TAU * i as f64 / params.window as f64).cos())
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(params.window);
    let n_frames = n / params.hop;
    let bins = params.bins();
    let mut data = vec![0.0; n_frames * bins];
    let mut buf = vec![Complex { re: 0.0, im: 0.0 }; params.window];
    for k in 0..n_frames {
        let start = k * params.hop;
        for i in 0..params.window {
            let s = if start + i < n { clip.samples[start + i] } else { 0.0 };
            buf[i] = Complex { re: s * hann[i], im: 0.0 };
        }
        fft.process(&mut buf);
        for b in 0..bins {
            data[k * bins + b] = buf[b].norm_sqr();
        }
    }
    Ok(PowerSpectrogram {
        frames: n_frames,
        bins,
        data,
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> StftParams {
        StftParams::for_rate(30720).unwrap()
    }

    #[test]
    fn rate_must_be_multiple_of_60() {
        assert!(StftParams::for_rate(22050).is_err());
        assert!(StftParams::for_rate(0).is_err());
        let p = params();
        assert_eq!(p.hop, 512);
        assert_eq!(p.window, 1024);
        assert_eq!(p.bins(), 513);
        assert_eq!(p.bin_hz(), 30.0);
    }

    #[test]
    fn frame_count_is_floor_of_hops() {
        let clip = AudioClip::new(vec![0.01; 5120], 30720).unwrap();
        let s = power_spectrogram(&clip, &params()).unwrap();
        assert_eq!(s.frames, 10);
        let clip = AudioClip::new(vec![0.01; 5119], 30720).unwrap();
        assert_eq!(power_spectrogram(&clip, &params()).unwrap().frames, 9);
    }

    #[test]
    fn short_clip_is_rejected() {
        let clip = AudioClip::new(vec![0.0; 1023], 30720).unwrap();
        assert!(matches!(
            power_spectrogram(&clip, &params()),
            Err(Error::InsufficientAudio(_))
        ));
    }

    #[test]
    fn silence_is_all_zero() {
        let clip = AudioClip::new(vec![0.0; 4096], 30720).unwrap();
        let s = power_spectrogram(&clip, &params()).unwrap();
        assert!(s.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dc_input_matches_hann_window_transform() {
        // The periodic Hann transform is N/2 at bin 0, N/4 magnitude at
        // bins +-1, and zero beyond.
        let clip = AudioClip::new(vec![1.0; 2048], 30720).unwrap();
        let s = power_spectrogram(&clip, &params()).unwrap();
        let row = s.row(0);
        assert!((row[0] - 512.0 * 512.0).abs() < 1e-6);
        assert!((row[1] - 256.0 * 256.0).abs() < 1e-6);
        for b in 2..s.bins {
            assert!(row[b].abs() < 1e-9, "bin {b} = {}", row[b]);
        }
    }

    #[test]
    fn bin_centered_tone_concentrates_power() {
        // 480 Hz at 30720 Hz / 1024-window is exactly bin 16; the windowed
        // magnitude is A*N/4 at the bin and A*N/8 at its neighbors.
        let a = 0.9;
        let samples: Vec<f64> = (0..4096)
            .map(|i| a * (TAU * 480.0 * i as f64 / 30720.0).sin())
            .collect();
        let clip = AudioClip::new(samples, 30720).unwrap();
        let s = power_spectrogram(&clip, &params()).unwrap();
        let row = s.row(1);
        let amp16 = row[16].sqrt();
        let amp15 = row[15].sqrt();
        let amp17 = row[17].sqrt();
        assert!((amp16 - a * 256.0).abs() < 1e-6 * 256.0, "{amp16}");
        assert!((amp15 - a * 128.0).abs() < 1e-6 * 128.0);
        assert!((amp17 - a * 128.0).abs() < 1e-6 * 128.0);
        for b in 0..s.bins {
            if !(15..=17).contains(&b) {
                assert!(row[b] < 1e-12, "bin {b} = {}", row[b]);
            }
        }
        // Hop of 512 samples is exactly 8 periods, so frames repeat.
        for b in 0..s.bins {
            assert!((s.row(2)[b] - s.row(1)[b]).abs() < 1e-9);
        }
    }
}
