//! End-to-end driver: train a model variant on the synthetic dataset,
//! generate continuations for held-out windows, and score them.

use crate::audio::{extract_music_features, AudioFeatureSequence};
use crate::data::{synthesize_pair, Split, SyntheticDataset, SyntheticSpec, DATASET_NOISE};
use crate::error::{Error, Result};
use crate::generate::{freeze_diagnostic, generate, GenerationRequest};
use crate::metrics::{
    beat_align, detect_kinematic_beats, evaluate_sets, BeatKind, BeatSet, MetricReport, BEAT_SIGMA,
};
use crate::model::{
    train_model, FactConfig, FactParams, Fusion, MaskMode, Supervision, TrainReport, TrainSettings,
};
use crate::motion::{MotionSequence, Skeleton};
use crate::numerics::Tensor;

/// How held-out entries are turned into an evaluation set: per test entry,
/// several generation windows at staggered offsets, each generated sequence
/// scored against the real continuation of the same window.
#[derive(Debug, Clone, Copy)]
pub struct EvalProtocol {
    /// Frames generated (and compared) per window.
    pub horizon: usize,
    pub sequences_per_entry: usize,
    pub offset_stride: usize,
    /// One long run per variant for the freeze diagnostic.
    pub freeze_horizon: usize,
    pub freeze_music_s: f64,
}

impl Default for EvalProtocol {
    fn default() -> EvalProtocol {
        EvalProtocol {
            horizon: 240,
            sequences_per_entry: 10,
            offset_stride: 40,
            freeze_horizon: 1200,
            freeze_music_s: 24.0,
        }
    }
}

pub struct VariantEval {
    pub report: MetricReport,
    /// Alignment after swapping each window's music beats for those of a
    /// different-tempo test entry; honest models should beat this.
    pub repaired_beat_align: f64,
    pub freeze: f64,
}

pub struct AblationRow {
    pub name: String,
    pub eval: VariantEval,
    pub final_loss: f64,
}

/// The model grid: supervision/mask ablation plus the fusion ablation, all
/// sharing the base preset's size and path depth.
pub fn ablation_variants(base: &FactConfig) -> Vec<(String, FactConfig)> {
    let mut shift = base.clone();
    shift.mask_mode = MaskMode::Causal;
    shift.supervision = Supervision::ShiftByOne;
    vec![
        ("future_n_early".to_string(), base.clone()),
        ("causal_shift1".to_string(), shift),
        ("late_fusion".to_string(), base.with_fusion(Fusion::Late)),
        ("no_fusion".to_string(), base.with_fusion(Fusion::None)),
    ]
}

pub fn train_variant(
    cfg: &FactConfig,
    settings: &TrainSettings,
    data: &SyntheticDataset,
) -> Result<(FactParams, TrainReport)> {
    let windows = data.windows(cfg, settings.stride, Split::Train)?;
    train_model(cfg, settings, &windows)
}

fn slice_motion(m: &MotionSequence, start: usize, len: usize) -> Result<MotionSequence> {
    if start + len > m.len() {
        return Err(Error::Data(format!(
            "motion slice [{start}, {}) exceeds {} frames",
            start + len,
            m.len()
        )));
    }
    MotionSequence::new(m.frames[start..start + len].to_vec())
}

fn slice_features(f: &AudioFeatureSequence, start: usize) -> Result<AudioFeatureSequence> {
    let (rows, dim) = f.tensor().as_matrix_view();
    if start >= rows {
        return Err(Error::Data(format!(
            "feature slice from {start} exceeds {rows} frames"
        )));
    }
    let data = f.tensor().data()[start * dim..].to_vec();
    AudioFeatureSequence::new(Tensor::new(&[rows - start, dim], data)?)
}

/// Music for the freeze run: same tempo family as the first test entry, long
/// enough to cover freeze_horizon.
pub fn freeze_music(data: &SyntheticDataset, proto: &EvalProtocol) -> Result<AudioFeatureSequence> {
    let test = data.entry_indices(Split::Test);
    let first = *test.first().ok_or_else(|| Error::Data("no test entries".into()))?;
    let spec = SyntheticSpec {
        bpm: data.bpms[first],
        duration_s: proto.freeze_music_s,
        pattern: 0,
        noise: DATASET_NOISE,
        seed: 0xF5EE_2E00,
    };
    extract_music_features(&synthesize_pair(&spec)?.clip)
}

pub fn evaluate_variant(
    params: &FactParams,
    data: &SyntheticDataset,
    proto: &EvalProtocol,
    freeze_track: &AudioFeatureSequence,
) -> Result<VariantEval> {
    let cfg = &params.config;
    let skeleton = Skeleton::canonical();
    let test = data.entry_indices(Split::Test);
    if test.is_empty() {
        return Err(Error::Data("dataset has no test entries".into()));
    }

    let mut generated = Vec::new();
    let mut reference = Vec::new();
    let mut music_beats = Vec::new();
    for &e in &test {
        let motion_frames = data.motions[e].len();
        let feature_frames = data.features[e].len();
        for s in 0..proto.sequences_per_entry {
            let o = s * proto.offset_stride;
            let need_motion = o + cfg.seed_frames + proto.horizon;
            let need_music = o + cfg.music_frames + proto.horizon - 1;
            if need_motion > motion_frames || need_music > feature_frames {
                return Err(Error::Config(format!(
                    "evaluation window at offset {o} needs {need_motion} motion and \
                     {need_music} feature frames, entry has {motion_frames}/{feature_frames}"
                )));
            }
            let seed = slice_motion(&data.motions[e], o, cfg.seed_frames)?;
            let music = slice_features(&data.features[e], o)?;
            let gen = generate(
                params,
                &GenerationRequest {
                    seed,
                    music,
                    horizon: proto.horizon,
                },
            )?;
            reference.push(slice_motion(&data.motions[e], o + cfg.seed_frames, proto.horizon)?);
            // Beats on the generated timeline: frame 0 is the first frame
            // after the seed window.
            let base = o + cfg.seed_frames;
            let beats: Vec<usize> = data.beat_frames[e]
                .iter()
                .filter(|&&b| b >= base && b < base + proto.horizon)
                .map(|&b| b - base)
                .collect();
            music_beats.push(BeatSet::new(beats, BeatKind::Music)?);
            generated.push(gen);
        }
    }

    let report = evaluate_sets(&generated, &reference, &music_beats, &skeleton)?;

    // Re-pair each window with the beats of another entry's window at the
    // same offset. Rotating by half the entries swaps the tempo.
    let block = proto.sequences_per_entry;
    let rot = (test.len() / 2).max(1);
    let mut align_sum = 0.0;
    let mut used = 0usize;
    for (i, gen) in generated.iter().enumerate() {
        let entry_pos = i / block;
        let swapped = ((entry_pos + rot) % test.len()) * block + i % block;
        let kin = detect_kinematic_beats(gen, &skeleton)?;
        if kin.is_empty() || music_beats[swapped].is_empty() {
            continue;
        }
        align_sum += beat_align(&kin, &music_beats[swapped], BEAT_SIGMA)?;
        used += 1;
    }
    if used == 0 {
        return Err(Error::MetricInput("no window usable for re-paired alignment".into()));
    }

    let freeze_seed = slice_motion(&data.motions[test[0]], 0, cfg.seed_frames)?;
    let long = generate(
        params,
        &GenerationRequest {
            seed: freeze_seed,
            music: freeze_track.clone(),
            horizon: proto.freeze_horizon,
        },
    )?;
    let freeze = freeze_diagnostic(&long, &skeleton)?;

    Ok(VariantEval {
        report,
        repaired_beat_align: align_sum / used as f64,
        freeze,
    })
}

/// Train and evaluate every variant in the grid with shared settings.
pub fn run_ablation(
    data: &SyntheticDataset,
    base: &FactConfig,
    settings: &TrainSettings,
    proto: &EvalProtocol,
) -> Result<Vec<AblationRow>> {
    let track = freeze_music(data, proto)?;
    let mut rows = Vec::new();
    for (name, cfg) in ablation_variants(base) {
        let (params, train_report) = train_variant(&cfg, settings, data)?;
        let eval = evaluate_variant(&params, data, proto, &track)?;
        rows.push(AblationRow {
            name,
            eval,
            final_loss: train_report.final_loss(),
        });
    }
    Ok(rows)
}

pub fn format_ablation_table(rows: &[AblationRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>9} {:>9} {:>8} {:>8} {:>10} {:>10} {:>9} {:>10}\n",
        "variant", "fid_k", "fid_g", "dist_k", "dist_g", "beat_align", "re-paired", "freeze", "final_loss"
    ));
    for row in rows {
        let r = &row.eval.report;
        out.push_str(&format!(
            "{:<16} {:>9.4} {:>9.4} {:>8.4} {:>8.4} {:>10.4} {:>10.4} {:>9.5} {:>10.6}\n",
            row.name,
            r.fid_k,
            r.fid_g,
            r.dist_k,
            r.dist_g,
            r.beat_align,
            row.eval.repaired_beat_align,
            row.eval.freeze,
            row.final_loss
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_synthetic_dataset;
    use crate::model::init_model;

    fn small_proto() -> EvalProtocol {
        EvalProtocol {
            horizon: 130,
            sequences_per_entry: 2,
            offset_stride: 50,
            freeze_horizon: 130,
            freeze_music_s: 6.0,
        }
    }

    #[test]
    fn grid_covers_mask_supervision_and_fusion() {
        let base = FactConfig::desk();
        let grid = ablation_variants(&base);
        assert_eq!(grid.len(), 4);
        assert_eq!(grid[0].1, base);
        assert_eq!(grid[1].1.mask_mode, MaskMode::Causal);
        assert_eq!(grid[1].1.supervision, Supervision::ShiftByOne);
        assert_eq!(grid[2].1.fusion, Fusion::Late);
        assert_eq!(grid[2].1.cross_layers, 1);
        assert_eq!(
            grid[2].1.motion_layers + grid[2].1.cross_layers,
            base.motion_layers + base.cross_layers
        );
        assert_eq!(grid[3].1.fusion, Fusion::None);
        assert_eq!(grid[3].1.audio_layers, 0);
        assert_eq!(grid[3].1.cross_layers, 0);
        for (_, cfg) in &grid {
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn untrained_model_evaluates_deterministically() {
        let data = build_synthetic_dataset(5, 6.0).unwrap();
        let proto = small_proto();
        let params = init_model(&FactConfig::tiny(), 1).unwrap();
        let track = freeze_music(&data, &proto).unwrap();
        let a = evaluate_variant(&params, &data, &proto, &track).unwrap();
        a.report.validate().unwrap();
        assert!(a.freeze >= 0.0);
        assert!(a.repaired_beat_align > 0.0 && a.repaired_beat_align <= 1.0);
        assert_eq!(a.report.generated_count, 8);
        assert_eq!(a.report.reference_count, 8);

        let b = evaluate_variant(&params, &data, &proto, &track).unwrap();
        assert_eq!(a.report.fid_k, b.report.fid_k);
        assert_eq!(a.report.beat_align, b.report.beat_align);
        assert_eq!(a.freeze, b.freeze);
    }

    #[test]
    fn oversized_protocol_is_a_config_error() {
        let data = build_synthetic_dataset(5, 6.0).unwrap();
        let mut proto = small_proto();
        proto.horizon = 600; // 360-frame entries cannot cover this
        let params = init_model(&FactConfig::tiny(), 1).unwrap();
        let track = freeze_music(&data, &small_proto()).unwrap();
        let err = evaluate_variant(&params, &data, &proto, &track)
            .map(|_| ())
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    // Not part of the default suite: trains all four desk variants and prints
    // the ablation table with phase timings, for threshold calibration.
    // Run with: cargo test -p dancegen-core --release -- --ignored calibrate
    #[test]
    #[ignore = "manual calibration run, prints the desk-scale ablation table"]
    fn calibrate_desk_ablation() {
        let t0 = std::time::Instant::now();
        let data = build_synthetic_dataset(11, 12.0).unwrap();
        eprintln!("dataset build: {:.1?}", t0.elapsed());
        let base = FactConfig::desk();
        let mut settings = TrainSettings::default();
        if let Ok(steps) = std::env::var("CAL_STEPS") {
            settings.steps = steps.parse().unwrap();
        }
        if let Ok(sched) = std::env::var("CAL_LR") {
            settings.lr_schedule = sched
                .split(',')
                .map(|p| {
                    let (s, r) = p.split_once(':').unwrap();
                    (s.parse().unwrap(), r.parse().unwrap())
                })
                .collect();
        }
        let proto = EvalProtocol::default();
        let track = freeze_music(&data, &proto).unwrap();
        let mut rows = Vec::new();
        for (name, cfg) in ablation_variants(&base) {
            let t = std::time::Instant::now();
            let (params, report) = train_variant(&cfg, &settings, &data).unwrap();
            let t_train = t.elapsed();
            let t = std::time::Instant::now();
            let eval = evaluate_variant(&params, &data, &proto, &track).unwrap();
            eprintln!(
                "{name}: train {:.1?} (loss {:.6}) eval {:.1?}",
                t_train,
                report.final_loss(),
                t.elapsed()
            );
            rows.push(AblationRow {
                name,
                eval,
                final_loss: report.final_loss(),
            });
        }
        eprintln!("\n{}", format_ablation_table(&rows));
        eprintln!("total: {:.1?}", t0.elapsed());
    }

    #[test]
    fn table_has_a_row_per_variant() {
        let row = AblationRow {
            name: "future_n_early".into(),
            eval: VariantEval {
                report: MetricReport {
                    fid_k: 1.0,
                    fid_g: 0.5,
                    dist_k: 2.0,
                    dist_g: 0.3,
                    beat_align: 0.8,
                    generated_count: 8,
                    reference_count: 8,
                    beat_sequences_used: 8,
                },
                repaired_beat_align: 0.6,
                freeze: 0.01,
            },
            final_loss: 0.002,
        };
        let table = format_ablation_table(&[row]);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("beat_align") && lines[0].contains("freeze"));
        assert!(lines[1].starts_with("future_n_early"));
        assert!(lines[1].contains("0.8000") && lines[1].contains("0.6000"));
    }
}
