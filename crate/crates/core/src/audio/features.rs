//! Assembly of the 35-dim per-frame music feature at 60 FPS.

use crate::audio::beat::track_beats;
use crate::audio::chroma::chroma_from_power;
use crate::audio::mel::{log_mel_spectrogram, mfcc_from_log_mel, MEL_BANDS, MFCC_COEFFS};
use crate::audio::onset::{envelope_from_log_mel, pick_peaks};
use crate::audio::stft::{power_spectrogram, StftParams};
use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const FEATURE_DIM: usize = 35;
pub const DEFAULT_SAMPLE_RATE: u32 = 30_720;
/// Feature frame rate; matches the motion frame rate.
pub const FEATURE_FPS: f64 = 60.0;
const MIN_SECONDS: usize = 4;

/// Column layout of a feature frame.
pub mod channels {
    use std::ops::Range;

    pub const ENVELOPE: usize = 0;
    pub const MFCC: Range<usize> = 1..21;
    pub const CHROMA: Range<usize> = 21..33;
    pub const PEAK: usize = 33;
    pub const BEAT: usize = 34;
}

/// (T', 35) feature rows: [envelope | mfcc x20 | chroma x12 | peak | beat].
#[derive(Debug, Clone)]
pub struct AudioFeatureSequence {
    data: Tensor,
}

impl AudioFeatureSequence {
    /// Validates shape (T', 35), non-negative envelope, binary peak/beat.
    pub fn new(data: Tensor) -> Result<AudioFeatureSequence> {
        if data.rank() != 2 || data.shape()[1] != FEATURE_DIM {
            return Err(Error::dimension(
                "audio_features",
                format!("expected (frames, {FEATURE_DIM}), got {:?}", data.shape()),
            ));
        }
        let t = data.shape()[0];
        let d = data.data();
        for f in 0..t {
            let row = &d[f * FEATURE_DIM..(f + 1) * FEATURE_DIM];
            if row[channels::ENVELOPE] < 0.0 {
                return Err(Error::Data(format!(
                    "frame {f}: envelope must be non-negative, got {}",
                    row[channels::ENVELOPE]
                )));
            }
            for ch in [channels::PEAK, channels::BEAT] {
                if row[ch] != 0.0 && row[ch] != 1.0 {
                    return Err(Error::Data(format!(
                        "frame {f}: channel {ch} must be 0 or 1, got {}",
                        row[ch]
                    )));
                }
            }
        }
        Ok(AudioFeatureSequence { data })
    }

    pub fn len(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tensor(&self) -> &Tensor {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor {
        self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data.data()[t * FEATURE_DIM..(t + 1) * FEATURE_DIM]
    }

    pub fn envelope(&self) -> Vec<f64> {
        (0..self.len()).map(|t| self.frame(t)[channels::ENVELOPE]).collect()
    }

    pub fn peak_frames(&self) -> Vec<usize> {
        (0..self.len()).filter(|&t| self.frame(t)[channels::PEAK] == 1.0).collect()
    }

    pub fn beat_frames(&self) -> Vec<usize> {
        (0..self.len()).filter(|&t| self.frame(t)[channels::BEAT] == 1.0).collect()
    }
}

/// Extracts at the clip's own rate when it sits on the 60 FPS grid, otherwise
/// resamples to DEFAULT_SAMPLE_RATE first.
pub fn extract_music_features(clip: &AudioClip) -> Result<AudioFeatureSequence> {
    let target = if clip.sample_rate % 60 == 0 {
        clip.sample_rate
    } else {
        DEFAULT_SAMPLE_RATE
    };
    extract_music_features_at(clip, target)
}

pub fn extract_music_features_at(
    clip: &AudioClip,
    sample_rate: u32,
) -> Result<AudioFeatureSequence> {
    let params = StftParams::for_rate(sample_rate)?;
    let resampled;
    let clip = if clip.sample_rate == sample_rate {
        clip
    } else {
        resampled = clip.resampled(sample_rate)?;
        &resampled
    };
    if clip.samples.len() < MIN_SECONDS * sample_rate as usize {
        return Err(Error::InsufficientAudio(format!(
            "feature extraction needs at least {MIN_SECONDS} s of audio, got {:.2} s",
            clip.duration_seconds()
        )));
    }
    let spec = power_spectrogram(clip, &params)?;
    let log_mel = log_mel_spectrogram(&spec);
    let env = envelope_from_log_mel(&log_mel, MEL_BANDS);
    let cepstra = mfcc_from_log_mel(&log_mel, spec.frames);
    let chroma = chroma_from_power(&spec);
    let peaks = pick_peaks(&env);
    let beats = track_beats(&env)?;

    let t = spec.frames;
    let mut data = vec![0.0; t * FEATURE_DIM];
    for f in 0..t {
        let row = &mut data[f * FEATURE_DIM..(f + 1) * FEATURE_DIM];
        row[channels::ENVELOPE] = env[f];
        row[channels::MFCC].copy_from_slice(&cepstra[f * MFCC_COEFFS..(f + 1) * MFCC_COEFFS]);
        row[channels::CHROMA].copy_from_slice(&chroma[f * 12..(f + 1) * 12]);
    }
    for &p in &peaks {
        data[p * FEATURE_DIM + channels::PEAK] = 1.0;
    }
    for &b in &beats.frames {
        data[b * FEATURE_DIM + channels::BEAT] = 1.0;
    }
    AudioFeatureSequence::new(Tensor::new(&[t, FEATURE_DIM], data)?)
}
