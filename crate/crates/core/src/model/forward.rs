//! Transformer forward pass: motion and audio towers, cross-modal stack,
//! supervised readout.
//!
//! Every block is pre-norm residual: x += Attn(LN(x)); x += FF(LN(x)).
//! Positional tables are added after the input embeddings only; the
//! cross-modal stack runs on the concatenated tower outputs (motion rows
//! first, then audio) with no positional table and no final normalization.

use crate::error::{Error, Result};
use crate::model::config::{FactConfig, MaskMode, Supervision};
use crate::model::params::{FactParams, Tower};
use crate::numerics::{Mask, Tape, Tensor, Var};
use std::collections::HashMap;
use std::rc::Rc;

pub const LN_EPS: f64 = 1e-5;

fn make_mask(mode: MaskMode, len: usize) -> Rc<Mask> {
    Rc::new(match mode {
        MaskMode::Full => Mask::full(len),
        MaskMode::Causal => Mask::causal(len),
    })
}

/// One transformer block on a staged sequence. `vars` maps parameter names to
/// staged leaves; the block reads the 16 entries of `{tower}.{layer}.*`.
fn tower_block(
    tape: &mut Tape,
    cfg: &FactConfig,
    vars: &HashMap<String, Var>,
    tower: Tower,
    layer: usize,
    x: Var,
    mask: Rc<Mask>,
) -> Result<Var> {
    let p = |suffix: &str| vars[&format!("{}.{layer}.{suffix}", tower.name())];
    let normed = tape.layer_norm(x, p("ln1.gamma"), p("ln1.beta"), LN_EPS)?;
    let q = tape.linear(normed, p("attn.wq"), p("attn.bq"))?;
    let k = tape.linear(normed, p("attn.wk"), p("attn.bk"))?;
    let v = tape.linear(normed, p("attn.wv"), p("attn.bv"))?;
    let dh = cfg.hidden / cfg.heads;
    let inv_sqrt_dh = 1.0 / (dh as f64).sqrt();
    let mut heads = Vec::with_capacity(cfg.heads);
    for head in 0..cfg.heads {
        let qh = tape.slice_cols(q, head * dh, dh)?;
        let kh = tape.slice_cols(k, head * dh, dh)?;
        let vh = tape.slice_cols(v, head * dh, dh)?;
        let scores = tape.matmul_trans_b(qh, kh)?;
        let scaled = tape.scale(scores, inv_sqrt_dh);
        let weights = tape.softmax_masked(scaled, mask.clone())?;
        heads.push(tape.matmul(weights, vh)?);
    }
    let cat = tape.concat_cols(&heads)?;
    let proj = tape.linear(cat, p("attn.wo"), p("attn.bo"))?;
    let x = tape.add(x, proj)?;
    let normed = tape.layer_norm(x, p("ln2.gamma"), p("ln2.beta"), LN_EPS)?;
    let inner = tape.linear(normed, p("ff.w1"), p("ff.b1"))?;
    let inner = tape.relu(inner);
    let out = tape.linear(inner, p("ff.w2"), p("ff.b2"))?;
    tape.add(x, out)
}

/// Runs a single block in isolation; `x` is (L, hidden) with L no longer than
/// the tower's configured window.
pub fn attention_forward(
    params: &FactParams,
    tower: Tower,
    layer: usize,
    x: &Tensor,
    mask_mode: MaskMode,
) -> Result<Tensor> {
    let cfg = &params.config;
    if layer >= tower.layers(cfg) {
        return Err(Error::dimension(
            "attention_forward",
            format!("tower {} has {} layers, layer {layer} requested", tower.name(), tower.layers(cfg)),
        ));
    }
    let (rows, cols) = x.as_matrix_view();
    let max_len = match tower {
        Tower::Motion => cfg.seed_frames,
        Tower::Audio => cfg.music_frames,
        Tower::Cross => cfg.concat_len(),
    };
    if cols != cfg.hidden || rows == 0 || rows > max_len {
        return Err(Error::dimension(
            "attention_forward",
            format!(
                "input must be (1..={max_len}, {}), got ({rows}, {cols})",
                cfg.hidden
            ),
        ));
    }
    let mut tape = Tape::new();
    let mut vars = HashMap::new();
    let prefix = format!("{}.{layer}.", tower.name());
    for (name, tensor) in params.names().iter().zip(params.tensors()) {
        if name.starts_with(&prefix) {
            let (r, c) = tensor.as_matrix_view();
            vars.insert(name.clone(), tape.leaf(r, c, tensor.data(), false));
        }
    }
    let x_var = tape.leaf(rows, cols, x.data(), false);
    let out = tower_block(&mut tape, cfg, &vars, tower, layer, x_var, make_mask(mask_mode, rows))?;
    Tensor::new(&[rows, cols], tape.value(out).to_vec())
}

/// A staged full forward pass, kept open so callers can attach a loss and run
/// backward. `param_vars` follows the parameter catalog order.
pub struct ForwardGraph {
    pub tape: Tape,
    pub pred: Var,
    pub param_vars: Vec<Var>,
    pub motion_in: Var,
    pub audio_in: Option<Var>,
}

/// Stages every parameter as a leaf; returns the name lookup used by the
/// forward pass plus the leaves in catalog order.
pub(crate) fn stage_params(
    tape: &mut Tape,
    params: &FactParams,
    needs_grad: bool,
) -> (HashMap<String, Var>, Vec<Var>) {
    let mut vars = HashMap::new();
    let mut param_vars = Vec::with_capacity(params.len());
    for (name, tensor) in params.names().iter().zip(params.tensors()) {
        let (r, c) = tensor.as_matrix_view();
        let var = tape.leaf(r, c, tensor.data(), needs_grad);
        vars.insert(name.clone(), var);
        param_vars.push(var);
    }
    (vars, param_vars)
}

/// Stages one window's computation on an existing tape with already-staged
/// parameters. Inputs must be exactly (seed_frames, motion_dim) and
/// (music_frames, audio_dim). Returns (prediction, motion leaf, audio leaf).
pub(crate) fn forward_staged(
    tape: &mut Tape,
    cfg: &FactConfig,
    vars: &HashMap<String, Var>,
    motion: &Tensor,
    audio: &Tensor,
    input_grad: bool,
) -> Result<(Var, Var, Option<Var>)> {
    let (mt, md) = motion.as_matrix_view();
    if mt != cfg.seed_frames || md != cfg.motion_dim {
        return Err(Error::dimension(
            "fact_forward",
            format!(
                "motion window must be ({}, {}), got ({mt}, {md})",
                cfg.seed_frames, cfg.motion_dim
            ),
        ));
    }
    let (at, ad) = audio.as_matrix_view();
    if at != cfg.music_frames || ad != cfg.audio_dim {
        return Err(Error::dimension(
            "fact_forward",
            format!(
                "audio window must be ({}, {}), got ({at}, {ad})",
                cfg.music_frames, cfg.audio_dim
            ),
        ));
    }

    let motion_in = tape.leaf(mt, md, motion.data(), input_grad);
    let mut m = tape.linear(motion_in, vars["embed.motion.w"], vars["embed.motion.b"])?;
    m = tape.add(m, vars["posenc.motion"])?;
    let motion_mask = make_mask(cfg.mask_mode, cfg.seed_frames);
    for layer in 0..cfg.motion_layers {
        m = tower_block(tape, cfg, vars, Tower::Motion, layer, m, motion_mask.clone())?;
    }

    let mut audio_in = None;
    let mut z = m;
    if cfg.has_audio() {
        let a_var = tape.leaf(at, ad, audio.data(), input_grad);
        audio_in = Some(a_var);
        let mut a = tape.linear(a_var, vars["embed.audio.w"], vars["embed.audio.b"])?;
        a = tape.add(a, vars["posenc.audio"])?;
        let audio_mask = make_mask(cfg.mask_mode, cfg.music_frames);
        for layer in 0..cfg.audio_layers {
            a = tower_block(tape, cfg, vars, Tower::Audio, layer, a, audio_mask.clone())?;
        }
        z = tape.concat_rows(&[m, a])?;
        let cross_mask = make_mask(cfg.mask_mode, cfg.concat_len());
        for layer in 0..cfg.cross_layers {
            z = tower_block(tape, cfg, vars, Tower::Cross, layer, z, cross_mask.clone())?;
        }
    }

    let readout = match cfg.supervision {
        Supervision::FutureN => {
            tape.slice_rows(z, cfg.concat_len() - cfg.future_n, cfg.future_n)?
        }
        Supervision::ShiftByOne => tape.slice_rows(z, 0, cfg.seed_frames)?,
    };
    let pred = tape.linear(readout, vars["head.w"], vars["head.b"])?;
    Ok((pred, motion_in, audio_in))
}

/// Stages the complete computation for one window on a fresh tape. When
/// `needs_grad` is set, parameters and both inputs accumulate gradients on
/// backward.
pub fn build_forward(
    params: &FactParams,
    motion: &Tensor,
    audio: &Tensor,
    needs_grad: bool,
) -> Result<ForwardGraph> {
    let mut tape = Tape::new();
    let (vars, param_vars) = stage_params(&mut tape, params, needs_grad);
    let (pred, motion_in, audio_in) =
        forward_staged(&mut tape, &params.config, &vars, motion, audio, needs_grad)?;
    Ok(ForwardGraph {
        tape,
        pred,
        param_vars,
        motion_in,
        audio_in,
    })
}

/// Inference-only forward: returns the predicted frames, (future_n, 219) under
/// future_n supervision or (seed_frames, 219) under shift_by_1.
pub fn fact_forward(params: &FactParams, motion: &Tensor, audio: &Tensor) -> Result<Tensor> {
    let graph = build_forward(params, motion, audio, false)?;
    let (r, c) = graph.tape.dims(graph.pred);
    Tensor::new(&[r, c], graph.tape.value(graph.pred).to_vec())
}

/// Mean squared error over all entries; shapes must match exactly.
pub fn future_n_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::dimension(
            "future_n_loss",
            format!("shape mismatch: {:?} vs {:?}", pred.shape(), target.shape()),
        ));
    }
    if pred.data().is_empty() {
        return Err(Error::dimension("future_n_loss", "empty tensors".to_string()));
    }
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.data().len() as f64)
}
