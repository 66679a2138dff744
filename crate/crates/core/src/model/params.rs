//! Parameter catalog: stable names, shapes, and seeded initialization.
//!
//! The catalog order is the contract for checkpoints and for the init RNG
//! stream, so two builds of the same config and seed produce bit-identical
//! models.

use crate::error::{Error, Result};
use crate::model::config::FactConfig;
use crate::numerics::{fill_normal, rng_from_seed, Tensor};
use std::collections::HashMap;

pub const INIT_STD: f64 = 0.02;

/// Transformer towers, in catalog order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tower {
    Motion,
    Audio,
    Cross,
}

impl Tower {
    pub fn name(self) -> &'static str {
        match self {
            Tower::Motion => "motion",
            Tower::Audio => "audio",
            Tower::Cross => "cross",
        }
    }

    pub fn layers(self, cfg: &FactConfig) -> usize {
        match self {
            Tower::Motion => cfg.motion_layers,
            Tower::Audio => cfg.audio_layers,
            Tower::Cross => cfg.cross_layers,
        }
    }
}

fn layer_entries(tower: Tower, layer: usize, hidden: usize) -> Vec<(String, Vec<usize>)> {
    let t = tower.name();
    let h = hidden;
    vec![
        (format!("{t}.{layer}.ln1.gamma"), vec![1, h]),
        (format!("{t}.{layer}.ln1.beta"), vec![1, h]),
        (format!("{t}.{layer}.attn.wq"), vec![h, h]),
        (format!("{t}.{layer}.attn.bq"), vec![1, h]),
        (format!("{t}.{layer}.attn.wk"), vec![h, h]),
        (format!("{t}.{layer}.attn.bk"), vec![1, h]),
        (format!("{t}.{layer}.attn.wv"), vec![h, h]),
        (format!("{t}.{layer}.attn.bv"), vec![1, h]),
        (format!("{t}.{layer}.attn.wo"), vec![h, h]),
        (format!("{t}.{layer}.attn.bo"), vec![1, h]),
        (format!("{t}.{layer}.ln2.gamma"), vec![1, h]),
        (format!("{t}.{layer}.ln2.beta"), vec![1, h]),
        (format!("{t}.{layer}.ff.w1"), vec![h, 2 * h]),
        (format!("{t}.{layer}.ff.b1"), vec![1, 2 * h]),
        (format!("{t}.{layer}.ff.w2"), vec![2 * h, h]),
        (format!("{t}.{layer}.ff.b2"), vec![1, h]),
    ]
}

/// Full (name, shape) catalog for a config, in storage order.
pub fn parameter_catalog(cfg: &FactConfig) -> Vec<(String, Vec<usize>)> {
    let h = cfg.hidden;
    let mut out = Vec::new();
    out.push(("embed.motion.w".into(), vec![cfg.motion_dim, h]));
    out.push(("embed.motion.b".into(), vec![1, h]));
    out.push(("posenc.motion".into(), vec![cfg.seed_frames, h]));
    if cfg.has_audio() {
        out.push(("embed.audio.w".into(), vec![cfg.audio_dim, h]));
        out.push(("embed.audio.b".into(), vec![1, h]));
        out.push(("posenc.audio".into(), vec![cfg.music_frames, h]));
    }
    for tower in [Tower::Motion, Tower::Audio, Tower::Cross] {
        for layer in 0..tower.layers(cfg) {
            out.extend(layer_entries(tower, layer, h));
        }
    }
    out.push(("head.w".into(), vec![h, cfg.motion_dim]));
    out.push(("head.b".into(), vec![1, cfg.motion_dim]));
    out
}

/// A complete model: config plus one tensor per catalog entry.
#[derive(Debug, Clone)]
pub struct FactParams {
    pub config: FactConfig,
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl FactParams {
    pub fn from_parts(config: FactConfig, names: Vec<String>, tensors: Vec<Tensor>) -> Result<FactParams> {
        config.validate()?;
        let catalog = parameter_catalog(&config);
        if names.len() != catalog.len() || tensors.len() != catalog.len() {
            return Err(Error::Config(format!(
                "expected {} parameters for this config, got {} names / {} tensors",
                catalog.len(),
                names.len(),
                tensors.len()
            )));
        }
        for (i, (name, shape)) in catalog.iter().enumerate() {
            if &names[i] != name {
                return Err(Error::Config(format!(
                    "parameter {i} should be {name:?}, got {:?}",
                    names[i]
                )));
            }
            if tensors[i].shape() != &shape[..] {
                return Err(Error::Config(format!(
                    "parameter {name:?} should have shape {shape:?}, got {:?}",
                    tensors[i].shape()
                )));
            }
        }
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Ok(FactParams {
            config,
            names,
            tensors,
            index,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    /// Split borrow for optimizer updates that also need parameter names.
    pub fn names_and_tensors_mut(&mut self) -> (&[String], &mut [Tensor]) {
        (&self.names, &mut self.tensors)
    }

    pub fn get(&self, name: &str) -> &Tensor {
        let i = self.index[name];
        &self.tensors[i]
    }

    pub fn position(&self, name: &str) -> usize {
        self.index[name]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data().len()).sum()
    }
}

/// Builds a model with seeded initialization: weights and positional tables
/// are normal(0, 0.02), biases and LayerNorm betas zero, gammas one. One RNG
/// stream is consumed in catalog order.
pub fn init_model(cfg: &FactConfig, seed: u64) -> Result<FactParams> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut names = Vec::new();
    let mut tensors = Vec::new();
    for (name, shape) in parameter_catalog(cfg) {
        let mut t = Tensor::zeros(&shape);
        let leaf = name.rsplit('.').next().unwrap_or(&name);
        match leaf {
            "gamma" => t.data_mut().fill(1.0),
            "beta" | "b" | "b1" | "b2" | "bq" | "bk" | "bv" | "bo" => {}
            _ => fill_normal(&mut rng, t.data_mut(), INIT_STD),
        }
        names.push(name);
        tensors.push(t.with_grad());
    }
    FactParams::from_parts(cfg.clone(), names, tensors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::Fusion;

    #[test]
    fn tiny_parameter_count_matches_closed_form() {
        let cfg = FactConfig::tiny();
        let model = init_model(&cfg, 0).unwrap();
        let h = cfg.hidden;
        let per_layer = 8 * h * h + 11 * h;
        let layers = cfg.motion_layers + cfg.audio_layers + cfg.cross_layers;
        let expected = layers * per_layer
            + (cfg.motion_dim * h + h)              // embed.motion
            + (cfg.audio_dim * h + h)               // embed.audio
            + (cfg.seed_frames + cfg.music_frames) * h // positional tables
            + (h * cfg.motion_dim + cfg.motion_dim); // head
        assert_eq!(expected, 17_099);
        assert_eq!(model.param_count(), 17_099);
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let cfg = FactConfig::tiny();
        let a = init_model(&cfg, 11).unwrap();
        let b = init_model(&cfg, 11).unwrap();
        let c = init_model(&cfg, 12).unwrap();
        for i in 0..a.len() {
            assert_eq!(a.tensors()[i].data(), b.tensors()[i].data());
        }
        let wa = a.get("motion.0.attn.wq").data();
        let wc = c.get("motion.0.attn.wq").data();
        assert_ne!(wa, wc);
    }

    #[test]
    fn init_fills_by_role() {
        let model = init_model(&FactConfig::tiny(), 3).unwrap();
        assert!(model.get("motion.0.ln1.gamma").data().iter().all(|&v| v == 1.0));
        assert!(model.get("motion.0.ln1.beta").data().iter().all(|&v| v == 0.0));
        assert!(model.get("motion.0.attn.bq").data().iter().all(|&v| v == 0.0));
        assert!(model.get("head.b").data().iter().all(|&v| v == 0.0));
        assert!(model.get("embed.motion.b").data().iter().all(|&v| v == 0.0));
        let w = model.get("motion.0.attn.wq").data();
        assert!(w.iter().any(|&v| v != 0.0));
        // std 0.02 puts essentially all mass inside +/- 0.2
        assert!(w.iter().all(|&v| v.abs() < 0.2));
        let pos = model.get("posenc.motion");
        assert_eq!(pos.shape(), &[8, 16]);
        assert!(pos.data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn no_fusion_catalog_drops_audio_entries() {
        let cfg = FactConfig::tiny().with_fusion(Fusion::None);
        let model = init_model(&cfg, 0).unwrap();
        assert!(!model.names().iter().any(|n| n.contains("audio")));
        assert!(!model.names().iter().any(|n| n.starts_with("cross.")));
        // depth is preserved: 1 + 2 motion layers
        assert!(model.names().iter().any(|n| n.starts_with("motion.2.")));
    }

    #[test]
    fn invalid_config_is_rejected_at_init() {
        let mut cfg = FactConfig::tiny();
        cfg.heads = 3;
        assert!(init_model(&cfg, 0).is_err());
    }

    #[test]
    fn every_parameter_requires_grad() {
        let model = init_model(&FactConfig::tiny(), 0).unwrap();
        assert!(model.tensors().iter().all(|t| t.requires_grad));
    }
}
