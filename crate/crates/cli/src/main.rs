//! Command-line front end: synthetic dataset generation, feature extraction,
//! windowing, leakage-free splits, training, generation, evaluation, and the
//! ablation grid.

mod commands;

use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};
use dancegen_core::audio::DEFAULT_SAMPLE_RATE;
use dancegen_core::model::FactConfig;

#[derive(Parser)]
#[command(name = "dancegen", version, about = "Music-conditioned dance generation toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Extract the 35-channel music feature stream from a WAV file.
    ExtractFeatures {
        /// Input WAV (PCM16 or float32, mono or stereo).
        input: PathBuf,
        /// Output feature tensor (frames x 35), FTNS format.
        output: PathBuf,
        /// Analysis sample rate; input is resampled to this.
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
        sr: u32,
    },
    /// Cut one motion/feature pair into training windows.
    MakeWindows {
        /// Motion tensor (frames x 219).
        motion: PathBuf,
        /// Music feature tensor (frames x 35).
        music: PathBuf,
        /// Output directory for seeds/music/targets tensors.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = FactConfig::desk().seed_frames)]
        seed_frames: usize,
        #[arg(long, default_value_t = FactConfig::desk().music_frames)]
        music_frames: usize,
        #[arg(long, default_value_t = FactConfig::desk().future_n)]
        future_n: usize,
        #[arg(long, default_value_t = 10)]
        stride: usize,
    },
    /// Assign train/test splits to an index without id leakage.
    Split {
        /// Dataset index TSV; rewritten in place unless --out is given.
        index: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        test_fraction: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the synthetic beat-locked dataset.
    Synth {
        /// Output directory; receives index.tsv, motions, music, features.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 11)]
        seed: u64,
        /// Length of every entry in seconds.
        #[arg(long, default_value_t = 12.0)]
        duration: f64,
    },
    /// Train a model on the train split of a dataset directory.
    Train {
        /// Dataset directory containing index.tsv (see synth).
        #[arg(long)]
        data: PathBuf,
        /// key=value config overriding the desk-scale defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        /// Where to write the effective config (default: <out>.cfg).
        #[arg(long)]
        emit_config: Option<PathBuf>,
    },
    /// Autoregressively generate motion from a seed window and music.
    Generate {
        #[arg(long)]
        ckpt: PathBuf,
        /// Seed motion tensor, exactly seed_frames x 219.
        #[arg(long)]
        seed: PathBuf,
        /// Music feature tensor covering the whole generation span.
        #[arg(long)]
        music: PathBuf,
        #[arg(long, default_value_t = 1200)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score generated motion against references and music beats.
    Evaluate {
        /// Directory of generated motion tensors (*.ftns).
        #[arg(long)]
        generated: PathBuf,
        /// Directory of reference motion tensors (*.ftns).
        #[arg(long)]
        reference: PathBuf,
        /// Directory of beat files: <generated stem>.beats, one frame per line.
        #[arg(long)]
        music_beats: PathBuf,
        /// Output report, one JSON record per metric.
        #[arg(long)]
        report: PathBuf,
    },
    /// Train and evaluate the supervision/mask and fusion ablation grid.
    Ablate {
        /// Output directory for the comparison table and effective config.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 11)]
        seed: u64,
        #[arg(long, default_value_t = 12.0)]
        duration: f64,
        /// key=value config overriding the desk-scale defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Frames generated per evaluation window.
        #[arg(long, default_value_t = 240)]
        horizon: usize,
        /// Evaluation windows per test entry.
        #[arg(long, default_value_t = 10)]
        per_entry: usize,
        #[arg(long, default_value_t = 40)]
        offset_stride: usize,
        /// Length of the long generation used by the freeze diagnostic.
        #[arg(long, default_value_t = 1200)]
        freeze_horizon: usize,
        /// Seconds of music synthesized for the freeze run.
        #[arg(long, default_value_t = 24.0)]
        freeze_music: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::ExtractFeatures { input, output, sr } => {
            commands::extract_features(&input, &output, sr)
        }
        Cmd::MakeWindows {
            motion,
            music,
            out,
            seed_frames,
            music_frames,
            future_n,
            stride,
        } => commands::make_windows(&motion, &music, &out, seed_frames, music_frames, future_n, stride),
        Cmd::Split {
            index,
            test_fraction,
            seed,
            out,
        } => commands::split(&index, test_fraction, seed, out.as_deref()),
        Cmd::Synth { out, seed, duration } => commands::synth(&out, seed, duration),
        Cmd::Train {
            data,
            config,
            out,
            emit_config,
        } => commands::train(&data, config.as_deref(), &out, emit_config.as_deref()),
        Cmd::Generate {
            ckpt,
            seed,
            music,
            frames,
            out,
        } => commands::generate(&ckpt, &seed, &music, frames, &out),
        Cmd::Evaluate {
            generated,
            reference,
            music_beats,
            report,
        } => commands::evaluate(&generated, &reference, &music_beats, &report),
        Cmd::Ablate {
            out,
            seed,
            duration,
            config,
            horizon,
            per_entry,
            offset_stride,
            freeze_horizon,
            freeze_music,
        } => commands::ablate(
            &out,
            seed,
            duration,
            config.as_deref(),
            horizon,
            per_entry,
            offset_stride,
            freeze_horizon,
            freeze_music,
        ),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        process::exit(e.exit_code());
    }
}
