//! Training-window enumeration over aligned motion/music sequence pairs.

use crate::error::{Error, Result};
use crate::model::{FactConfig, Supervision, WindowedData};
use crate::numerics::Tensor;

/// Window geometry: a window starting at frame f consumes motion
/// [f, f+seed_frames), music [f, f+music_frames), and is supervised on the
/// future_n motion frames after the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub seed_frames: usize,
    pub music_frames: usize,
    pub future_n: usize,
    pub stride: usize,
}

impl WindowSpec {
    pub fn from_config(cfg: &FactConfig, stride: usize) -> WindowSpec {
        WindowSpec {
            seed_frames: cfg.seed_frames,
            music_frames: cfg.music_frames,
            future_n: cfg.future_n,
            stride,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.music_frames < self.seed_frames {
            return Err(Error::Config(format!(
                "music_frames {} must cover seed_frames {}",
                self.music_frames, self.seed_frames
            )));
        }
        if self.future_n == 0 {
            return Err(Error::Config("future_n must be at least 1".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Start frames 0, stride, 2*stride, ... keeping only windows whose
    /// motion (seed + future_n) and music spans fit inside the sequences.
    pub fn starts(&self, motion_frames: usize, audio_frames: usize) -> Vec<usize> {
        starts_with_reach(
            self.stride,
            self.seed_frames + self.future_n,
            self.music_frames,
            motion_frames,
            audio_frames,
        )
    }
}

fn starts_with_reach(
    stride: usize,
    motion_reach: usize,
    music_frames: usize,
    motion_frames: usize,
    audio_frames: usize,
) -> Vec<usize> {
    if motion_frames < motion_reach || audio_frames < music_frames {
        return Vec::new();
    }
    let last = (motion_frames - motion_reach).min(audio_frames - music_frames);
    (0..=last).step_by(stride).collect()
}

/// Enumerate every valid window over each motion/audio pair and package them
/// for training. The motion reach follows the supervision mode: future-N
/// windows must leave future_n target frames, shift-by-one windows one.
pub fn make_windows(
    cfg: &FactConfig,
    stride: usize,
    motions: Vec<Tensor>,
    audios: Vec<Tensor>,
) -> Result<WindowedData> {
    cfg.validate()?;
    if stride == 0 {
        return Err(Error::Config("stride must be at least 1".into()));
    }
    let reach = match cfg.supervision {
        Supervision::FutureN => cfg.seed_frames + cfg.future_n,
        Supervision::ShiftByOne => cfg.seed_frames + 1,
    };
    let mut windows = Vec::new();
    for (entry, (m, a)) in motions.iter().zip(&audios).enumerate() {
        let (mf, _) = m.as_matrix_view();
        let (af, _) = a.as_matrix_view();
        for start in starts_with_reach(stride, reach, cfg.music_frames, mf, af) {
            windows.push((entry, start));
        }
    }
    if windows.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no window fits: motion needs {reach} frames and music {} frames",
            cfg.music_frames
        )));
    }
    WindowedData::new(cfg, motions, audios, windows)
}
