//! The stock synthetic dataset: 3 disjoint groups, each with 2 musics and 2
//! choreographies, every choreography danced to both of its group's musics.
//! Groups share nothing, so a leakage-free split always exists and the test
//! group's patterns still appear (at other tempi/seeds) in training.

use crate::audio::{extract_music_features, AudioClip, AudioFeatureSequence};
use crate::data::split::{split_dataset, DatasetIndex, IndexEntry, Split};
use crate::data::synth::{synthesize_pair, SyntheticSpec};
use crate::data::window::make_windows;
use crate::error::Result;
use crate::model::{FactConfig, WindowedData};
use crate::motion::MotionSequence;
use crate::numerics::Tensor;

pub const DATASET_BPMS: [f64; 2] = [96.0, 132.0];
pub const DATASET_NOISE: f64 = 0.015;
const GROUPS: usize = 3;
const GROUP_PATTERNS: [[u8; 2]; GROUPS] = [[0, 1], [1, 2], [2, 0]];
/// Feature extraction needs 4 s of audio for its beat tracker.
pub const MIN_DURATION_S: f64 = 4.0;

pub struct SyntheticDataset {
    pub index: DatasetIndex,
    /// Parallel to index.entries.
    pub motions: Vec<MotionSequence>,
    pub features: Vec<AudioFeatureSequence>,
    pub clips: Vec<AudioClip>,
    pub beat_frames: Vec<Vec<usize>>,
    pub bpms: Vec<f64>,
    pub duration_s: f64,
}

fn music_seed(base: u64, group: usize, music: usize) -> u64 {
    base ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul((group * 2 + music + 1) as u64)
}

/// Twelve aligned music/motion pairs, split 8 train / 4 test (one group held
/// out). Deterministic in `seed`.
pub fn build_synthetic_dataset(seed: u64, duration_s: f64) -> Result<SyntheticDataset> {
    let mut index = DatasetIndex::default();
    let mut motions = Vec::new();
    let mut features = Vec::new();
    let mut clips = Vec::new();
    let mut beat_frames = Vec::new();
    let mut bpms = Vec::new();

    for g in 0..GROUPS {
        for (j, &bpm) in DATASET_BPMS.iter().enumerate() {
            let pair_seed = music_seed(seed, g, j);
            let mut music_features: Option<AudioFeatureSequence> = None;
            for (k, &pattern) in GROUP_PATTERNS[g].iter().enumerate() {
                let spec = SyntheticSpec {
                    bpm,
                    duration_s,
                    pattern,
                    noise: DATASET_NOISE,
                    seed: pair_seed,
                };
                spec.validate(MIN_DURATION_S)?;
                let pair = synthesize_pair(&spec)?;
                // Same seed and tempo per (group, music): the clip is
                // identical for both choreographies, extract it once.
                if music_features.is_none() {
                    music_features = Some(extract_music_features(&pair.clip)?);
                }
                index.entries.push(IndexEntry {
                    motion_file: format!("motion_c{g}{k}_m{g}{j}.ftns"),
                    music_file: format!("music_m{g}{j}.wav"),
                    choreography_id: format!("c{g}{k}"),
                    music_id: format!("m{g}{j}"),
                    genre: format!("g{g}"),
                    split: None,
                });
                motions.push(pair.motion);
                features.push(music_features.clone().unwrap());
                clips.push(pair.clip);
                beat_frames.push(pair.beat_frames);
                bpms.push(bpm);
            }
        }
    }
    split_dataset(&mut index, 0.3, seed)?;
    Ok(SyntheticDataset {
        index,
        motions,
        features,
        clips,
        beat_frames,
        bpms,
        duration_s,
    })
}

impl SyntheticDataset {
    pub fn entry_indices(&self, split: Split) -> Vec<usize> {
        self.index
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.split == Some(split))
            .map(|(i, _)| i)
            .collect()
    }

    /// Windowed training data for one model variant.
    pub fn windows(&self, cfg: &FactConfig, stride: usize, split: Split) -> Result<WindowedData> {
        let idx = self.entry_indices(split);
        let motions: Vec<Tensor> = idx.iter().map(|&i| self.motions[i].to_tensor()).collect();
        let audios: Vec<Tensor> =
            idx.iter().map(|&i| self.features[i].tensor().clone()).collect();
        make_windows(cfg, stride, motions, audios)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Supervision;

    #[test]
    fn twelve_entries_split_into_one_test_group() {
        let data = build_synthetic_dataset(5, 6.0).unwrap();
        assert_eq!(data.index.entries.len(), 12);
        data.index.validate_no_leakage().unwrap();
        let test = data.entry_indices(Split::Test);
        let train = data.entry_indices(Split::Train);
        assert_eq!(test.len(), 4);
        assert_eq!(train.len(), 8);
        // The test entries are one whole group: a single genre tag.
        let genres: std::collections::HashSet<&str> = test
            .iter()
            .map(|&i| data.index.entries[i].genre.as_str())
            .collect();
        assert_eq!(genres.len(), 1);
        // Both tempi appear on each side of the split.
        for idx in [&test, &train] {
            let musics: std::collections::HashSet<&str> = idx
                .iter()
                .map(|&i| data.index.entries[i].music_id.as_str())
                .collect();
            assert_eq!(musics.len(), if idx.len() == 4 { 2 } else { 4 });
        }
    }

    #[test]
    fn shared_music_is_bit_identical_within_a_pairing() {
        let data = build_synthetic_dataset(5, 6.0).unwrap();
        // Entries 0 and 1 are the two choreographies over the same music.
        assert_eq!(data.index.entries[0].music_id, data.index.entries[1].music_id);
        assert_eq!(data.features[0].tensor().data(), data.features[1].tensor().data());
        assert_eq!(data.beat_frames[0], data.beat_frames[1]);
        // Different motions though.
        assert_ne!(
            data.motions[0].to_tensor().data(),
            data.motions[1].to_tensor().data()
        );
    }

    #[test]
    fn build_is_deterministic() {
        let a = build_synthetic_dataset(9, 6.0).unwrap();
        let b = build_synthetic_dataset(9, 6.0).unwrap();
        assert_eq!(a.index, b.index);
        for i in 0..a.motions.len() {
            assert_eq!(a.motions[i].to_tensor().data(), b.motions[i].to_tensor().data());
        }
    }

    #[test]
    fn training_windows_cover_both_supervisions() {
        let data = build_synthetic_dataset(5, 6.0).unwrap();
        let cfg = FactConfig::desk();
        // 360 frames: the 80-frame music span binds first, last start 280.
        let windows = data.windows(&cfg, 10, Split::Train).unwrap();
        assert_eq!(windows.len(), 8 * 29);

        let mut shift = cfg.clone();
        shift.supervision = Supervision::ShiftByOne;
        let windows = data.windows(&shift, 10, Split::Train).unwrap();
        assert_eq!(windows.len(), 8 * 29);

        let test = data.windows(&cfg, 10, Split::Test).unwrap();
        assert_eq!(test.len(), 4 * 29);
    }

    #[test]
    fn too_short_duration_is_rejected() {
        let err = build_synthetic_dataset(5, 2.0).map(|_| ()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
