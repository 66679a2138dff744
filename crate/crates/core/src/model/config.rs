//! Model and training configuration with flat key=value files.

use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    Full,
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Supervision {
    /// Targets are the N frames after the seed window; readout is the last N
    /// positions of the cross-modal output.
    FutureN,
    /// Targets are the inputs shifted one frame; readout is the motion block.
    ShiftByOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fusion {
    /// Shallow towers, deep cross-modal stack.
    Early,
    /// Deep towers, single cross-modal layer.
    Late,
    /// Motion tower only; audio never enters the model.
    None,
}

impl fmt::Display for MaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskMode::Full => "full",
            MaskMode::Causal => "causal",
        })
    }
}

impl FromStr for MaskMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<MaskMode> {
        match s {
            "full" => Ok(MaskMode::Full),
            "causal" => Ok(MaskMode::Causal),
            other => Err(Error::Config(format!(
                "mask_mode must be full or causal, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for Supervision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Supervision::FutureN => "future_n",
            Supervision::ShiftByOne => "shift_by_1",
        })
    }
}

impl FromStr for Supervision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Supervision> {
        match s {
            "future_n" => Ok(Supervision::FutureN),
            "shift_by_1" => Ok(Supervision::ShiftByOne),
            other => Err(Error::Config(format!(
                "supervision must be future_n or shift_by_1, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for Fusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fusion::Early => "early",
            Fusion::Late => "late",
            Fusion::None => "none",
        })
    }
}

impl FromStr for Fusion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Fusion> {
        match s {
            "early" => Ok(Fusion::Early),
            "late" => Ok(Fusion::Late),
            "none" => Ok(Fusion::None),
            other => Err(Error::Config(format!(
                "fusion must be early, late, or none, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactConfig {
    pub hidden: usize,
    pub heads: usize,
    pub motion_layers: usize,
    pub audio_layers: usize,
    pub cross_layers: usize,
    /// Seed motion window length T.
    pub seed_frames: usize,
    /// Music window length T'.
    pub music_frames: usize,
    /// Predicted future frames N.
    pub future_n: usize,
    pub mask_mode: MaskMode,
    pub supervision: Supervision,
    pub fusion: Fusion,
    pub motion_dim: usize,
    pub audio_dim: usize,
}

impl FactConfig {
    /// Full-size preset: 800 hidden, 10 heads, 2/2/12 layers, 120+240 window.
    pub fn paper() -> FactConfig {
        FactConfig {
            hidden: 800,
            heads: 10,
            motion_layers: 2,
            audio_layers: 2,
            cross_layers: 12,
            seed_frames: 120,
            music_frames: 240,
            future_n: 20,
            mask_mode: MaskMode::Full,
            supervision: Supervision::FutureN,
            fusion: Fusion::Early,
            motion_dim: 219,
            audio_dim: 35,
        }
    }

    /// Budget preset trainable on one CPU core in minutes.
    pub fn desk() -> FactConfig {
        FactConfig {
            hidden: 64,
            heads: 4,
            motion_layers: 2,
            audio_layers: 2,
            cross_layers: 4,
            seed_frames: 40,
            music_frames: 80,
            future_n: 8,
            ..FactConfig::paper()
        }
    }

    /// Smallest config exercising every code path; used for gradient checks.
    pub fn tiny() -> FactConfig {
        FactConfig {
            hidden: 16,
            heads: 2,
            motion_layers: 1,
            audio_layers: 1,
            cross_layers: 2,
            seed_frames: 8,
            music_frames: 16,
            future_n: 4,
            ..FactConfig::paper()
        }
    }

    /// Rebudgets the layer stack for a fusion variant while preserving the
    /// input-to-output path depth D = motion_layers + cross_layers:
    /// late = (D-1, D-1, 1), none = (D, 0, 0).
    pub fn with_fusion(&self, fusion: Fusion) -> FactConfig {
        let depth = self.motion_layers + self.cross_layers;
        let mut cfg = self.clone();
        cfg.fusion = fusion;
        match fusion {
            Fusion::Early => {}
            Fusion::Late => {
                cfg.motion_layers = depth - 1;
                cfg.audio_layers = depth - 1;
                cfg.cross_layers = 1;
            }
            Fusion::None => {
                cfg.motion_layers = depth;
                cfg.audio_layers = 0;
                cfg.cross_layers = 0;
            }
        }
        cfg
    }

    pub fn has_audio(&self) -> bool {
        self.fusion != Fusion::None
    }

    /// Sequence length entering the cross-modal stack (or the head, for the
    /// no-fusion variant).
    pub fn concat_len(&self) -> usize {
        match self.fusion {
            Fusion::None => self.seed_frames,
            _ => self.seed_frames + self.music_frames,
        }
    }

    /// Rows produced by the output head under the configured supervision.
    pub fn readout_rows(&self) -> usize {
        match self.supervision {
            Supervision::FutureN => self.future_n,
            Supervision::ShiftByOne => self.seed_frames,
        }
    }

    /// Row of the prediction holding the next motion frame during generation.
    pub fn next_frame_row(&self) -> usize {
        match self.supervision {
            Supervision::FutureN => 0,
            Supervision::ShiftByOne => self.seed_frames - 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.heads == 0 {
            return Err(Error::Config("hidden and heads must be positive".into()));
        }
        if self.hidden % self.heads != 0 {
            return Err(Error::Config(format!(
                "hidden {} not divisible by heads {}",
                self.hidden, self.heads
            )));
        }
        if self.motion_dim == 0 || self.audio_dim == 0 {
            return Err(Error::Config("motion_dim and audio_dim must be positive".into()));
        }
        if self.seed_frames == 0 || self.future_n == 0 {
            return Err(Error::Config("seed_frames and future_n must be positive".into()));
        }
        if self.music_frames < self.seed_frames {
            return Err(Error::Config(format!(
                "music_frames {} must be at least seed_frames {}",
                self.music_frames, self.seed_frames
            )));
        }
        if self.motion_layers == 0 {
            return Err(Error::Config("motion_layers must be at least 1".into()));
        }
        match self.fusion {
            Fusion::None => {
                if self.audio_layers != 0 || self.cross_layers != 0 {
                    return Err(Error::Config(format!(
                        "fusion=none requires audio_layers=0 and cross_layers=0, got {}/{}",
                        self.audio_layers, self.cross_layers
                    )));
                }
                if self.future_n > self.seed_frames {
                    return Err(Error::Config(format!(
                        "fusion=none reads the last {} of {} motion positions; \
                         future_n must not exceed seed_frames",
                        self.future_n, self.seed_frames
                    )));
                }
            }
            _ => {
                if self.audio_layers == 0 || self.cross_layers == 0 {
                    return Err(Error::Config(format!(
                        "fusion={} requires audio_layers>=1 and cross_layers>=1, got {}/{}",
                        self.fusion, self.audio_layers, self.cross_layers
                    )));
                }
                if self.future_n > self.music_frames {
                    return Err(Error::Config(format!(
                        "future_n {} must not exceed music_frames {}",
                        self.future_n, self.music_frames
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        format!(
            "hidden={}\nheads={}\nmotion_layers={}\naudio_layers={}\ncross_layers={}\n\
             seed_frames={}\nmusic_frames={}\nfuture_n={}\nmask_mode={}\nsupervision={}\n\
             fusion={}\nmotion_dim={}\naudio_dim={}\n",
            self.hidden,
            self.heads,
            self.motion_layers,
            self.audio_layers,
            self.cross_layers,
            self.seed_frames,
            self.music_frames,
            self.future_n,
            self.mask_mode,
            self.supervision,
            self.fusion,
            self.motion_dim,
            self.audio_dim
        )
    }

    /// Applies one key=value pair; unknown keys are errors.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        fn num(key: &str, value: &str) -> Result<usize> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("{key}: expected an integer, got {value:?}")))
        }
        match key {
            "hidden" => self.hidden = num(key, value)?,
            "heads" => self.heads = num(key, value)?,
            "motion_layers" => self.motion_layers = num(key, value)?,
            "audio_layers" => self.audio_layers = num(key, value)?,
            "cross_layers" => self.cross_layers = num(key, value)?,
            "seed_frames" => self.seed_frames = num(key, value)?,
            "music_frames" => self.music_frames = num(key, value)?,
            "future_n" => self.future_n = num(key, value)?,
            "mask_mode" => self.mask_mode = value.parse()?,
            "supervision" => self.supervision = value.parse()?,
            "fusion" => self.fusion = value.parse()?,
            "motion_dim" => self.motion_dim = num(key, value)?,
            "audio_dim" => self.audio_dim = num(key, value)?,
            other => return Err(Error::Config(format!("unknown model config key {other:?}"))),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub batch_size: usize,
    pub steps: u64,
    /// Window start stride in frames.
    pub stride: usize,
    pub seed: u64,
    /// (step threshold, learning rate), threshold 0 first.
    pub lr_schedule: Vec<(u64, f64)>,
}

impl Default for TrainSettings {
    fn default() -> TrainSettings {
        TrainSettings {
            batch_size: 8,
            steps: 400,
            stride: 10,
            seed: 7,
            lr_schedule: vec![(0, 1e-3)],
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be positive".into()));
        }
        if self.lr_schedule.is_empty() || self.lr_schedule[0].0 != 0 {
            return Err(Error::Config(
                "lr_schedule must be non-empty and start at step 0".into(),
            ));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let sched = self
            .lr_schedule
            .iter()
            .map(|(s, r)| format!("{s}:{r}"))
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "batch_size={}\nsteps={}\nstride={}\ntrain_seed={}\nlr_schedule={}\n",
            self.batch_size, self.steps, self.stride, self.seed, sched
        )
    }

    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "batch_size" => {
                self.batch_size = value
                    .parse()
                    .map_err(|_| Error::Config(format!("batch_size: bad integer {value:?}")))?
            }
            "steps" => {
                self.steps = value
                    .parse()
                    .map_err(|_| Error::Config(format!("steps: bad integer {value:?}")))?
            }
            "stride" => {
                self.stride = value
                    .parse()
                    .map_err(|_| Error::Config(format!("stride: bad integer {value:?}")))?
            }
            "train_seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("train_seed: bad integer {value:?}")))?
            }
            "lr_schedule" => {
                let mut sched = Vec::new();
                for part in value.split(',') {
                    let (s, r) = part.split_once(':').ok_or_else(|| {
                        Error::Config(format!("lr_schedule entry {part:?}: expected step:rate"))
                    })?;
                    let step = s.parse().map_err(|_| {
                        Error::Config(format!("lr_schedule step {s:?}: bad integer"))
                    })?;
                    let rate = r.parse().map_err(|_| {
                        Error::Config(format!("lr_schedule rate {r:?}: bad number"))
                    })?;
                    sched.push((step, rate));
                }
                self.lr_schedule = sched;
            }
            other => return Err(Error::Config(format!("unknown train config key {other:?}"))),
        }
        Ok(())
    }
}

/// One flat config file covering the model and the training loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: FactConfig,
    pub train: TrainSettings,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            model: FactConfig::desk(),
            train: TrainSettings::default(),
        }
    }
}

const MODEL_KEYS: &[&str] = &[
    "hidden",
    "heads",
    "motion_layers",
    "audio_layers",
    "cross_layers",
    "seed_frames",
    "music_frames",
    "future_n",
    "mask_mode",
    "supervision",
    "fusion",
    "motion_dim",
    "audio_dim",
];

impl RunConfig {
    /// Parses `key=value` lines over the desk-scale defaults; `#` starts a
    /// comment; unknown keys are config errors.
    pub fn from_text(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if MODEL_KEYS.contains(&key) {
                cfg.model.apply_kv(key, value)?;
            } else {
                cfg.train.apply_kv(key, value)?;
            }
        }
        cfg.model.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    /// Emits every effective setting so runs are self-describing.
    pub fn to_text(&self) -> String {
        format!("{}{}", self.model.to_kv(), self.train.to_kv())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        FactConfig::paper().validate().unwrap();
        FactConfig::desk().validate().unwrap();
        FactConfig::tiny().validate().unwrap();
    }

    #[test]
    fn indivisible_heads_are_rejected() {
        let mut cfg = FactConfig::paper();
        cfg.hidden = 801;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("801"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn fusion_variants_preserve_path_depth() {
        let desk = FactConfig::desk();
        let late = desk.with_fusion(Fusion::Late);
        assert_eq!(
            (late.motion_layers, late.audio_layers, late.cross_layers),
            (5, 5, 1)
        );
        late.validate().unwrap();
        let none = desk.with_fusion(Fusion::None);
        assert_eq!(
            (none.motion_layers, none.audio_layers, none.cross_layers),
            (6, 0, 0)
        );
        none.validate().unwrap();

        // The full-size budget reproduces the published triples.
        let paper = FactConfig::paper();
        let late = paper.with_fusion(Fusion::Late);
        assert_eq!(
            (late.motion_layers, late.audio_layers, late.cross_layers),
            (13, 13, 1)
        );
        let none = paper.with_fusion(Fusion::None);
        assert_eq!(
            (none.motion_layers, none.audio_layers, none.cross_layers),
            (14, 0, 0)
        );
    }

    #[test]
    fn none_fusion_layer_invariant_is_enforced() {
        let mut cfg = FactConfig::desk();
        cfg.fusion = Fusion::None;
        assert!(cfg.validate().is_err()); // audio/cross layers still nonzero
        let ok = FactConfig::desk().with_fusion(Fusion::None);
        ok.validate().unwrap();
    }

    #[test]
    fn readout_geometry_follows_supervision() {
        let mut cfg = FactConfig::desk();
        assert_eq!(cfg.readout_rows(), 8);
        assert_eq!(cfg.next_frame_row(), 0);
        cfg.supervision = Supervision::ShiftByOne;
        assert_eq!(cfg.readout_rows(), 40);
        assert_eq!(cfg.next_frame_row(), 39);
    }

    #[test]
    fn config_text_roundtrip() {
        let mut run = RunConfig::default();
        run.model.mask_mode = MaskMode::Causal;
        run.model.supervision = Supervision::ShiftByOne;
        run.train.lr_schedule = vec![(0, 1e-3), (200, 1e-4)];
        let text = run.to_text();
        let back = RunConfig::from_text(&text).unwrap();
        assert_eq!(run, back);
    }

    #[test]
    fn parse_rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_text("nonsense=1\n").is_err());
        assert!(RunConfig::from_text("hidden=abc\n").is_err());
        assert!(RunConfig::from_text("hidden\n").is_err());
        assert!(RunConfig::from_text("mask_mode=diagonal\n").is_err());
        // Comments and blank lines are fine.
        let run = RunConfig::from_text("# comment\n\nhidden=32 # inline\nheads=2\n").unwrap();
        assert_eq!(run.model.hidden, 32);
    }

    #[test]
    fn lr_schedule_parses_pairs() {
        let run = RunConfig::from_text("lr_schedule=0:0.0001,60000:0.00001,100000:0.000001\n")
            .unwrap();
        assert_eq!(
            run.train.lr_schedule,
            vec![(0, 1e-4), (60000, 1e-5), (100000, 1e-6)]
        );
        assert!(RunConfig::from_text("lr_schedule=5:0.1\n").is_err()); // must start at 0
    }
}
