//! Subcommand implementations. Every function returns the core error type so
//! main can map it onto the documented exit codes.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dancegen_core::audio::{
    extract_music_features, extract_music_features_at, read_wav, write_wav_pcm16,
    AudioFeatureSequence, FEATURE_DIM,
};
use dancegen_core::data::{build_synthetic_dataset, split_dataset, DatasetIndex, Split};
use dancegen_core::generate::GenerationRequest;
use dancegen_core::metrics::{evaluate_sets, BeatKind, BeatSet};
use dancegen_core::model::{load_checkpoint, save_checkpoint, FactConfig, RunConfig};
use dancegen_core::motion::{MotionSequence, Skeleton, MOTION_DIM};
use dancegen_core::numerics::{read_tensor, write_tensor, Tensor};
use dancegen_core::pipeline::{
    ablation_variants, evaluate_variant, format_ablation_table, freeze_music, train_variant,
    AblationRow, EvalProtocol,
};
use dancegen_core::{Error, Result};
use sha2::{Digest, Sha256};

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn write_string(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn load_run_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_text(&read_to_string(p)?),
        None => Ok(RunConfig::default()),
    }
}

pub fn extract_features(input: &Path, output: &Path, sr: u32) -> Result<()> {
    let clip = read_wav(input)?;
    let feats = extract_music_features_at(&clip, sr)?;
    write_tensor(output, feats.tensor())?;
    println!(
        "{} frames x {FEATURE_DIM} channels -> {}",
        feats.len(),
        output.display()
    );
    Ok(())
}

pub fn make_windows(
    motion: &Path,
    music: &Path,
    out: &Path,
    seed_frames: usize,
    music_frames: usize,
    future_n: usize,
    stride: usize,
) -> Result<()> {
    let mut cfg = FactConfig::desk();
    cfg.seed_frames = seed_frames;
    cfg.music_frames = music_frames;
    cfg.future_n = future_n;
    let motion_t = read_tensor(motion)?;
    let music_t = read_tensor(music)?;
    let data =
        dancegen_core::data::make_windows(&cfg, stride, vec![motion_t], vec![music_t])?;

    let w = data.len();
    let (t, tp, n) = (cfg.seed_frames, cfg.music_frames, cfg.future_n);
    let mut seeds = Vec::with_capacity(w * t * MOTION_DIM);
    let mut feats = Vec::with_capacity(w * tp * FEATURE_DIM);
    let mut targets = Vec::with_capacity(w * n * MOTION_DIM);
    for &(entry, start) in data.windows() {
        let m = data.motions()[entry].data();
        let a = data.audios()[entry].data();
        seeds.extend_from_slice(&m[start * MOTION_DIM..(start + t) * MOTION_DIM]);
        feats.extend_from_slice(&a[start * FEATURE_DIM..(start + tp) * FEATURE_DIM]);
        targets.extend_from_slice(&m[(start + t) * MOTION_DIM..(start + t + n) * MOTION_DIM]);
    }
    create_dir(out)?;
    write_tensor(&out.join("seeds.ftns"), &Tensor::new(&[w, t, MOTION_DIM], seeds)?)?;
    write_tensor(&out.join("music.ftns"), &Tensor::new(&[w, tp, FEATURE_DIM], feats)?)?;
    write_tensor(&out.join("targets.ftns"), &Tensor::new(&[w, n, MOTION_DIM], targets)?)?;
    println!("{w} windows -> {}", out.display());
    Ok(())
}

pub fn split(index: &Path, test_fraction: f64, seed: u64, out: Option<&Path>) -> Result<()> {
    let mut idx = DatasetIndex::from_tsv(&read_to_string(index)?)?;
    split_dataset(&mut idx, test_fraction, seed)?;
    let dest = out.unwrap_or(index);
    write_string(dest, &idx.to_tsv())?;
    let train = idx.entries_in(Split::Train).len();
    let test = idx.entries_in(Split::Test).len();
    println!("{train} train / {test} test -> {}", dest.display());
    Ok(())
}

fn beats_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.beats"))
}

pub fn synth(out: &Path, seed: u64, duration: f64) -> Result<()> {
    let data = build_synthetic_dataset(seed, duration)?;
    create_dir(out)?;
    write_string(&out.join("index.tsv"), &data.index.to_tsv())?;
    let mut written_music: HashSet<&str> = HashSet::new();
    for (i, entry) in data.index.entries.iter().enumerate() {
        write_tensor(&out.join(&entry.motion_file), &data.motions[i].to_tensor())?;
        if written_music.insert(&entry.music_file) {
            let wav = out.join(&entry.music_file);
            write_wav_pcm16(&wav, &data.clips[i].samples, data.clips[i].sample_rate)?;
            write_tensor(&wav.with_extension("ftns"), data.features[i].tensor())?;
            let stem = wav.file_stem().unwrap().to_string_lossy().into_owned();
            let lines: Vec<String> =
                data.beat_frames[i].iter().map(|b| b.to_string()).collect();
            write_string(&beats_path(out, &stem), &(lines.join("\n") + "\n"))?;
        }
    }
    println!(
        "{} entries ({} musics) -> {}",
        data.index.entries.len(),
        written_music.len(),
        out.display()
    );
    Ok(())
}

/// Feature tensors are read from a sibling .ftns next to each WAV when
/// present (synth writes them); otherwise features are extracted on the fly.
fn load_features(dir: &Path, music_file: &str) -> Result<Tensor> {
    let wav = dir.join(music_file);
    let ftns = wav.with_extension("ftns");
    if ftns.exists() {
        return read_tensor(&ftns);
    }
    let feats = extract_music_features(&read_wav(&wav)?)?;
    Ok(feats.tensor().clone())
}

pub fn train(
    data: &Path,
    config: Option<&Path>,
    out: &Path,
    emit_config: Option<&Path>,
) -> Result<()> {
    let run = load_run_config(config)?;
    let idx = DatasetIndex::from_tsv(&read_to_string(&data.join("index.tsv"))?)?;
    let entries = idx.entries_in(Split::Train);
    if entries.is_empty() {
        return Err(Error::Data(
            "index has no train entries; run the split command first".into(),
        ));
    }
    let mut motions = Vec::new();
    let mut audios = Vec::new();
    let mut cache: HashMap<&str, Tensor> = HashMap::new();
    for entry in &entries {
        motions.push(read_tensor(&data.join(&entry.motion_file))?);
        let feats = match cache.get(entry.music_file.as_str()) {
            Some(t) => t.clone(),
            None => {
                let t = load_features(data, &entry.music_file)?;
                cache.insert(entry.music_file.as_str(), t.clone());
                t
            }
        };
        audios.push(feats);
    }
    let windows = dancegen_core::data::make_windows(&run.model, run.train.stride, motions, audios)?;
    let count = windows.len();
    let (params, report) = dancegen_core::model::train_model(&run.model, &run.train, &windows)?;
    save_checkpoint(out, &params, report.steps)?;
    let cfg_path = emit_config
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.with_extension("cfg"));
    write_string(&cfg_path, &run.to_text())?;
    println!(
        "{count} windows, {} steps, final loss {:.6} -> {}",
        report.steps,
        report.final_loss(),
        out.display()
    );
    Ok(())
}

pub fn generate(ckpt: &Path, seed: &Path, music: &Path, frames: usize, out: &Path) -> Result<()> {
    let ck = load_checkpoint(ckpt)?;
    let request = GenerationRequest {
        seed: MotionSequence::from_tensor(&read_tensor(seed)?)?,
        music: AudioFeatureSequence::new(read_tensor(music)?)?,
        horizon: frames,
    };
    let motion = dancegen_core::generate::generate(&ck.params, &request)?;
    write_tensor(out, &motion.to_tensor())?;
    println!("{} frames -> {}", motion.len(), out.display());
    Ok(())
}

fn list_ftns(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries =
        fs::read_dir(dir).map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ftns"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Data(format!("{}: no .ftns files", dir.display())));
    }
    Ok(files)
}

fn read_beats(path: &Path) -> Result<Vec<usize>> {
    let mut frames = Vec::new();
    for (lineno, line) in read_to_string(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        frames.push(line.parse().map_err(|_| {
            Error::Data(format!(
                "{} line {}: expected a frame index, got {line:?}",
                path.display(),
                lineno + 1
            ))
        })?);
    }
    Ok(frames)
}

pub fn evaluate(generated: &Path, reference: &Path, music_beats: &Path, report: &Path) -> Result<()> {
    let mut digest = Sha256::new();
    let mut hash_file = |path: &Path| -> Result<Vec<u8>> {
        let bytes = read_bytes(path)?;
        digest.update(path.file_name().unwrap().to_string_lossy().as_bytes());
        digest.update(&bytes);
        Ok(bytes)
    };

    let mut gen_seqs = Vec::new();
    let mut beat_sets = Vec::new();
    for path in list_ftns(generated)? {
        let bytes = hash_file(&path)?;
        let label = path.display().to_string();
        let file = dancegen_core::numerics::ftns::decode(&bytes, &label)?;
        gen_seqs.push(MotionSequence::from_tensor(&file.to_tensor()?)?);
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let beats = beats_path(music_beats, &stem);
        let frames = read_beats(&beats)?;
        hash_file(&beats)?;
        beat_sets.push(BeatSet::new(frames, BeatKind::Music)?);
    }
    let mut ref_seqs = Vec::new();
    for path in list_ftns(reference)? {
        let bytes = hash_file(&path)?;
        let label = path.display().to_string();
        let file = dancegen_core::numerics::ftns::decode(&bytes, &label)?;
        ref_seqs.push(MotionSequence::from_tensor(&file.to_tensor()?)?);
    }

    let hex: String = digest
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    let metrics = evaluate_sets(&gen_seqs, &ref_seqs, &beat_sets, &Skeleton::canonical())?;
    let jsonl = metrics.to_jsonl(&hex);
    write_string(report, &jsonl)?;
    print!("{jsonl}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn ablate(
    out: &Path,
    seed: u64,
    duration: f64,
    config: Option<&Path>,
    horizon: usize,
    per_entry: usize,
    offset_stride: usize,
    freeze_horizon: usize,
    freeze_music_s: f64,
) -> Result<()> {
    let run = load_run_config(config)?;
    let proto = EvalProtocol {
        horizon,
        sequences_per_entry: per_entry,
        offset_stride,
        freeze_horizon,
        freeze_music_s,
    };
    eprintln!("synthesizing dataset (seed {seed}, {duration} s)...");
    let data = build_synthetic_dataset(seed, duration)?;
    // Fail on a protocol/dataset mismatch before spending minutes training.
    let frames = data.motions[0].len();
    let feature_frames = data.features[0].len();
    let max_offset = (proto.sequences_per_entry.max(1) - 1) * proto.offset_stride;
    let need_motion = max_offset + run.model.seed_frames + proto.horizon;
    let need_features = max_offset + run.model.music_frames + proto.horizon - 1;
    if need_motion > frames || need_features > feature_frames {
        return Err(Error::Config(format!(
            "evaluation windows need {need_motion} motion and {need_features} feature frames \
             but entries have {frames}/{feature_frames}; raise --duration or shrink the protocol"
        )));
    }
    let freeze_frames = (proto.freeze_music_s * 60.0) as usize;
    if run.model.music_frames + proto.freeze_horizon - 1 > freeze_frames {
        return Err(Error::Config(format!(
            "freeze run needs {} feature frames but --freeze-music {} s provides only about {}",
            run.model.music_frames + proto.freeze_horizon - 1,
            proto.freeze_music_s,
            freeze_frames
        )));
    }
    let track = freeze_music(&data, &proto)?;
    let mut rows = Vec::new();
    for (name, cfg) in ablation_variants(&run.model) {
        let start = Instant::now();
        eprintln!("training {name}...");
        let (params, report) = train_variant(&cfg, &run.train, &data)?;
        eprintln!("evaluating {name}...");
        let eval = evaluate_variant(&params, &data, &proto, &track)?;
        eprintln!("{name} done in {:.0?}", start.elapsed());
        rows.push(AblationRow {
            name,
            eval,
            final_loss: report.final_loss(),
        });
    }
    let table = format_ablation_table(&rows);
    create_dir(out)?;
    write_string(&out.join("ablation.txt"), &table)?;
    write_string(&out.join("effective-config.txt"), &run.to_text())?;
    print!("{table}");
    Ok(())
}
