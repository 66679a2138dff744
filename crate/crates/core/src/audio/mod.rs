//! Audio ingestion and music feature extraction on a fixed 60 FPS frame grid.

pub mod beat;
pub mod chroma;
pub mod features;
pub mod mel;
pub mod onset;
pub mod stft;
pub mod wav;

use crate::error::{Error, Result};

pub use beat::{track_beats, BeatTrack};
pub use chroma::chroma_from_power;
pub use features::{
    channels, extract_music_features, extract_music_features_at, AudioFeatureSequence,
    DEFAULT_SAMPLE_RATE, FEATURE_DIM,
};
pub use mel::{log_mel_spectrogram, mel_filterbank, mfcc, mfcc_from_log_mel, MEL_BANDS, MFCC_COEFFS};
pub use onset::{onset_envelope, pick_peaks};
pub use stft::{power_spectrogram, PowerSpectrogram, StftParams};
pub use wav::{decode_wav, encode_wav_pcm16, read_wav, write_wav_pcm16};

/// Mono audio; samples are clamped into [-1, 1] at construction.
#[derive(Debug, Clone)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<AudioClip> {
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Data("audio clip has no samples".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Data("audio samples must be finite".into()));
        }
        let samples = samples.into_iter().map(|s| s.clamp(-1.0, 1.0)).collect();
        Ok(AudioClip {
            samples,
            sample_rate,
        })
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Duration-preserving linear-interpolation resample.
    pub fn resampled(&self, to_rate: u32) -> Result<AudioClip> {
        if to_rate == 0 {
            return Err(Error::Config("target sample rate must be positive".into()));
        }
        if to_rate == self.sample_rate {
            return Ok(self.clone());
        }
        let n_in = self.samples.len();
        let n_out = (n_in as u128 * to_rate as u128 / self.sample_rate as u128) as usize;
        let ratio = self.sample_rate as f64 / to_rate as f64;
        let mut out = Vec::with_capacity(n_out);
        for i in 0..n_out {
            let pos = i as f64 * ratio;
            let j = (pos.floor() as usize).min(n_in - 1);
            let frac = pos - j as f64;
            let a = self.samples[j];
            let b = self.samples[(j + 1).min(n_in - 1)];
            out.push(a + frac * (b - a));
        }
        AudioClip::new(out, to_rate)
    }
}
