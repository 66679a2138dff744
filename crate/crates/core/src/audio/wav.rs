//! Minimal RIFF/WAVE reader and writer: PCM16 and float32, stereo averaged.

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use std::path::Path;

fn format_err(path: &str, offset: u64, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.into(),
        offset,
        reason: reason.into(),
    }
}

/// Decodes a RIFF/WAVE byte stream; multi-channel input is averaged to mono.
/// `label` names the source in errors (usually the file path).
pub fn decode_wav(bytes: &[u8], label: &str) -> Result<AudioClip> {
    if bytes.len() < 12 {
        return Err(format_err(label, 0, "truncated RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(format_err(label, 0, "missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(format_err(label, 8, "missing WAVE form type"));
    }
    let mut off = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<(usize, usize)> = None;
    while off + 8 <= bytes.len() {
        let id = &bytes[off..off + 4];
        let size = u32::from_le_bytes(bytes[off + 4..off + 8].try_into().unwrap()) as usize;
        let body = off + 8;
        if body + size > bytes.len() {
            return Err(format_err(
                label,
                off as u64,
                format!("chunk {:?} runs past end of file", String::from_utf8_lossy(id)),
            ));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(format_err(label, off as u64, "fmt chunk shorter than 16 bytes"));
                }
                let f = u16::from_le_bytes([bytes[body], bytes[body + 1]]);
                let ch = u16::from_le_bytes([bytes[body + 2], bytes[body + 3]]);
                let rate = u32::from_le_bytes(bytes[body + 4..body + 8].try_into().unwrap());
                let bits = u16::from_le_bytes([bytes[body + 14], bytes[body + 15]]);
                fmt = Some((f, ch, rate, bits));
            }
            b"data" => data = Some((body, size)),
            _ => {} // skip LIST, fact, cue, ...
        }
        off = body + size + (size & 1); // chunks are word-aligned
    }
    let (format, channels, rate, bits) =
        fmt.ok_or_else(|| format_err(label, off as u64, "no fmt chunk"))?;
    let (dbody, dlen) = data.ok_or_else(|| format_err(label, off as u64, "no data chunk"))?;
    if channels == 0 {
        return Err(format_err(label, dbody as u64, "fmt declares zero channels"));
    }
    if rate == 0 {
        return Err(format_err(label, dbody as u64, "fmt declares zero sample rate"));
    }
    let ch = channels as usize;
    let samples: Vec<f64> = match (format, bits) {
        (1, 16) => {
            let frame = 2 * ch;
            (0..dlen / frame)
                .map(|i| {
                    (0..ch)
                        .map(|c| {
                            let p = dbody + i * frame + c * 2;
                            i16::from_le_bytes([bytes[p], bytes[p + 1]]) as f64 / 32768.0
                        })
                        .sum::<f64>()
                        / ch as f64
                })
                .collect()
        }
        (3, 32) => {
            let frame = 4 * ch;
            (0..dlen / frame)
                .map(|i| {
                    (0..ch)
                        .map(|c| {
                            let p = dbody + i * frame + c * 4;
                            f32::from_le_bytes(bytes[p..p + 4].try_into().unwrap()) as f64
                        })
                        .sum::<f64>()
                        / ch as f64
                })
                .collect()
        }
        _ => {
            return Err(format_err(
                label,
                dbody as u64,
                format!("unsupported encoding: format tag {format}, {bits} bits"),
            ))
        }
    };
    if samples.is_empty() {
        return Err(format_err(label, dbody as u64, "empty data chunk"));
    }
    AudioClip::new(samples, rate)
}

pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let bytes = std::fs::read(path)?;
    decode_wav(&bytes, &path.display().to_string())
}

/// Encodes mono PCM16; samples are clamped into [-1, 1].
pub fn encode_wav_pcm16(samples: &[f64], sample_rate: u32) -> Vec<u8> {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_wav_pcm16(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    std::fs::write(path, encode_wav_pcm16(samples, sample_rate))?;
    Ok(())
}
