//! Windowed training data and the Adam training loop.

use crate::error::{Error, Result};
use crate::model::config::{FactConfig, Supervision, TrainSettings};
use crate::model::forward::{forward_staged, stage_params};
use crate::model::params::{init_model, FactParams};
use crate::numerics::{adam_step, rng_from_seed, AdamState, Tape, Tensor};
use rand::seq::SliceRandom;

/// Training corpus: per-entry motion (F, motion_dim) and audio feature
/// (F', audio_dim) tensors, plus (entry, start frame) windows into them.
/// Windows are stored as references so overlapping strides cost no memory.
#[derive(Debug, Clone)]
pub struct WindowedData {
    seed_frames: usize,
    music_frames: usize,
    motions: Vec<Tensor>,
    audios: Vec<Tensor>,
    windows: Vec<(usize, usize)>,
}

fn slice_frames(t: &Tensor, start: usize, len: usize) -> Tensor {
    let (_, cols) = t.as_matrix_view();
    let data = t.data()[start * cols..(start + len) * cols].to_vec();
    Tensor::new(&[len, cols], data).expect("slice_frames: bounds pre-checked")
}

impl WindowedData {
    /// Validates that every window leaves room for the model inputs and for
    /// the supervision targets implied by `cfg`.
    pub fn new(
        cfg: &FactConfig,
        motions: Vec<Tensor>,
        audios: Vec<Tensor>,
        windows: Vec<(usize, usize)>,
    ) -> Result<WindowedData> {
        if motions.len() != audios.len() {
            return Err(Error::Data(format!(
                "{} motion entries but {} audio entries",
                motions.len(),
                audios.len()
            )));
        }
        let target_reach = match cfg.supervision {
            Supervision::FutureN => cfg.seed_frames + cfg.future_n,
            Supervision::ShiftByOne => cfg.seed_frames + 1,
        };
        for (i, t) in motions.iter().enumerate() {
            let (_, d) = t.as_matrix_view();
            if d != cfg.motion_dim {
                return Err(Error::Data(format!(
                    "motion entry {i} has width {d}, expected {}",
                    cfg.motion_dim
                )));
            }
        }
        for (i, t) in audios.iter().enumerate() {
            let (_, d) = t.as_matrix_view();
            if d != cfg.audio_dim {
                return Err(Error::Data(format!(
                    "audio entry {i} has width {d}, expected {}",
                    cfg.audio_dim
                )));
            }
        }
        for &(entry, start) in &windows {
            if entry >= motions.len() {
                return Err(Error::Data(format!(
                    "window references entry {entry}, only {} exist",
                    motions.len()
                )));
            }
            let (mf, _) = motions[entry].as_matrix_view();
            let (af, _) = audios[entry].as_matrix_view();
            if start + target_reach > mf {
                return Err(Error::Data(format!(
                    "window at entry {entry} start {start} needs {} motion frames, entry has {mf}",
                    start + target_reach
                )));
            }
            if start + cfg.music_frames > af {
                return Err(Error::Data(format!(
                    "window at entry {entry} start {start} needs {} audio frames, entry has {af}",
                    start + cfg.music_frames
                )));
            }
        }
        Ok(WindowedData {
            seed_frames: cfg.seed_frames,
            music_frames: cfg.music_frames,
            motions,
            audios,
            windows,
        })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn windows(&self) -> &[(usize, usize)] {
        &self.windows
    }

    pub fn motions(&self) -> &[Tensor] {
        &self.motions
    }

    pub fn audios(&self) -> &[Tensor] {
        &self.audios
    }

    /// (motion, audio, target) for one window under the given supervision.
    pub fn example(&self, cfg: &FactConfig, index: usize) -> (Tensor, Tensor, Tensor) {
        let (entry, start) = self.windows[index];
        let motion = slice_frames(&self.motions[entry], start, self.seed_frames);
        let audio = slice_frames(&self.audios[entry], start, self.music_frames);
        let target = match cfg.supervision {
            Supervision::FutureN => {
                slice_frames(&self.motions[entry], start + self.seed_frames, cfg.future_n)
            }
            Supervision::ShiftByOne => {
                slice_frames(&self.motions[entry], start + 1, self.seed_frames)
            }
        };
        (motion, audio, target)
    }

    pub fn batch(&self, cfg: &FactConfig, indices: &[usize]) -> Vec<(Tensor, Tensor, Tensor)> {
        indices.iter().map(|&i| self.example(cfg, i)).collect()
    }
}

/// One forward+backward+Adam update over a batch of (motion, audio, target)
/// windows. The loss is the mean of per-window MSE losses. Deterministic.
pub fn train_step(
    params: &mut FactParams,
    opt: &mut AdamState,
    batch: &[(Tensor, Tensor, Tensor)],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Data("train_step: empty batch".into()));
    }
    let cfg = params.config.clone();
    let mut tape = Tape::new();
    let (vars, param_vars) = stage_params(&mut tape, params, true);
    let mut losses = Vec::with_capacity(batch.len());
    for (motion, audio, target) in batch {
        let (pred, _, _) = forward_staged(&mut tape, &cfg, &vars, motion, audio, false)?;
        losses.push(tape.mse_loss(pred, target.data())?);
    }
    let total = tape.add_n(&losses)?;
    let mean = tape.scale(total, 1.0 / batch.len() as f64);
    let loss = tape.value(mean)[0];
    if !loss.is_finite() {
        return Err(Error::Divergence(format!(
            "non-finite loss {loss} at step {}",
            opt.step
        )));
    }
    tape.backward(mean)?;
    let grads: Vec<Vec<f64>> = param_vars
        .iter()
        .zip(params.tensors())
        .map(|(&v, t)| {
            tape.grad(v)
                .map(|g| g.to_vec())
                .unwrap_or_else(|| vec![0.0; t.data().len()])
        })
        .collect();
    let (names, tensors) = params.names_and_tensors_mut();
    adam_step(opt, tensors, &grads, names)?;
    Ok(loss)
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Batch-mean loss after each optimizer step.
    pub losses: Vec<f64>,
    pub steps: u64,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(f64::NAN)
    }
}

/// Trains a fresh model for `settings.steps` steps with epoch-wise shuffled
/// batches. The same seed drives init and batch order, so runs are repeatable.
pub fn train_model(
    cfg: &FactConfig,
    settings: &TrainSettings,
    data: &WindowedData,
) -> Result<(FactParams, TrainReport)> {
    settings.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset("no training windows".into()));
    }
    if data.seed_frames != cfg.seed_frames || data.music_frames != cfg.music_frames {
        return Err(Error::Config(format!(
            "windows were cut for ({}, {}) frames, config wants ({}, {})",
            data.seed_frames, data.music_frames, cfg.seed_frames, cfg.music_frames
        )));
    }
    let mut params = init_model(cfg, settings.seed)?;
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.data().len()).collect();
    let mut opt = AdamState::with_default_moments(&sizes, settings.lr_schedule.clone())?;

    let batch_size = settings.batch_size.min(data.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len(); // force a shuffle before the first batch
    let mut epoch = 0u64;
    let mut losses = Vec::with_capacity(settings.steps as usize);
    for _ in 0..settings.steps {
        if cursor + batch_size > order.len() {
            let mut rng = rng_from_seed(settings.seed.wrapping_add(epoch.wrapping_mul(0x9E37_79B9)));
            order.shuffle(&mut rng);
            epoch += 1;
            cursor = 0;
        }
        let batch = data.batch(cfg, &order[cursor..cursor + batch_size]);
        cursor += batch_size;
        losses.push(train_step(&mut params, &mut opt, &batch)?);
    }
    let report = TrainReport {
        steps: settings.steps,
        losses,
    };
    Ok((params, report))
}
