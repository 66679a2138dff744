//! Dataset index and leakage-free train/test splitting.
//!
//! A choreography or a piece of music seen in training must never appear in
//! the test set. Entries sharing a choreography id or a music id are
//! therefore glued into components that move between splits as a whole.

use crate::error::{Error, Result};
use crate::numerics::rng_from_seed;
use rand::Rng;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub motion_file: String,
    pub music_file: String,
    pub choreography_id: String,
    pub music_id: String,
    pub genre: String,
    /// None until split_dataset assigns it.
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetIndex {
    pub entries: Vec<IndexEntry>,
}

const TSV_HEADER: &str = "motion_file\tmusic_file\tchoreography_id\tmusic_id\tgenre\tsplit";

impl DatasetIndex {
    /// Tab-separated, one entry per line, '-' for an unassigned split.
    pub fn from_tsv(text: &str) -> Result<DatasetIndex> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim_end() == TSV_HEADER => {}
            Some((n, h)) => {
                return Err(Error::Data(format!(
                    "index line {}: expected header '{TSV_HEADER}', got '{h}'",
                    n + 1
                )))
            }
            None => return Err(Error::Data("index file is empty".into())),
        }
        let mut entries = Vec::new();
        for (n, line) in lines {
            let fields: Vec<&str> = line.trim_end().split('\t').collect();
            if fields.len() != 6 {
                return Err(Error::Data(format!(
                    "index line {}: expected 6 tab-separated fields, got {}",
                    n + 1,
                    fields.len()
                )));
            }
            if fields.iter().take(5).any(|f| f.is_empty()) {
                return Err(Error::Data(format!("index line {}: empty field", n + 1)));
            }
            entries.push(IndexEntry {
                motion_file: fields[0].to_string(),
                music_file: fields[1].to_string(),
                choreography_id: fields[2].to_string(),
                music_id: fields[3].to_string(),
                genre: fields[4].to_string(),
                split: match fields[5] {
                    "-" => None,
                    s => Some(s.parse()?),
                },
            });
        }
        Ok(DatasetIndex { entries })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for e in &self.entries {
            let split = e.split.map_or("-".to_string(), |s| s.to_string());
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                e.motion_file, e.music_file, e.choreography_id, e.music_id, e.genre, split
            ));
        }
        out
    }

    pub fn entries_in(&self, split: Split) -> Vec<&IndexEntry> {
        self.entries.iter().filter(|e| e.split == Some(split)).collect()
    }

    /// No choreography id and no music id may appear in both splits.
    pub fn validate_no_leakage(&self) -> Result<()> {
        let mut chor: HashMap<&str, Split> = HashMap::new();
        let mut music: HashMap<&str, Split> = HashMap::new();
        for e in &self.entries {
            let Some(split) = e.split else {
                return Err(Error::Data(format!(
                    "entry {} has no split assignment",
                    e.motion_file
                )));
            };
            for (map, id, what) in [
                (&mut chor, e.choreography_id.as_str(), "choreography"),
                (&mut music, e.music_id.as_str(), "music"),
            ] {
                if *map.entry(id).or_insert(split) != split {
                    return Err(Error::Data(format!(
                        "{what} id '{id}' appears in both train and test"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Union-find over entry indices.
struct Components {
    parent: Vec<usize>,
}

impl Components {
    fn new(n: usize) -> Components {
        Components {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[rb] = ra;
        }
    }
}

/// Assign every entry to train or test such that no choreography or music id
/// crosses the boundary. Components (entries connected through shared ids)
/// are shuffled by seed and moved into test until it holds at least
/// test_fraction of the entries; everything else trains.
pub fn split_dataset(index: &mut DatasetIndex, test_fraction: f64, seed: u64) -> Result<()> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test_fraction must be in (0,1), got {test_fraction}"
        )));
    }
    let n = index.entries.len();
    let mut chor_seen: HashMap<&str, usize> = HashMap::new();
    let mut music_seen: HashMap<&str, usize> = HashMap::new();
    if n < 2 || {
        for e in &index.entries {
            chor_seen.entry(&e.choreography_id).or_insert(0);
            music_seen.entry(&e.music_id).or_insert(0);
        }
        chor_seen.len() < 2 || music_seen.len() < 2
    } {
        return Err(Error::SplitInfeasible(
            "need at least 2 distinct choreography ids and music ids".into(),
        ));
    }

    let mut uf = Components::new(n);
    let mut by_chor: HashMap<&str, usize> = HashMap::new();
    let mut by_music: HashMap<&str, usize> = HashMap::new();
    for (i, e) in index.entries.iter().enumerate() {
        if let Some(&j) = by_chor.get(e.choreography_id.as_str()) {
            uf.union(j, i);
        } else {
            by_chor.insert(&e.choreography_id, i);
        }
        if let Some(&j) = by_music.get(e.music_id.as_str()) {
            uf.union(j, i);
        } else {
            by_music.insert(&e.music_id, i);
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..n {
        let root = uf.find(i);
        groups.entry(root).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(Error::SplitInfeasible(
            "all entries are connected through shared choreographies or musics".into(),
        ));
    }

    // Deterministic order: sort components by smallest member, then shuffle.
    let mut components: Vec<Vec<usize>> = groups.into_values().collect();
    components.sort_by_key(|c| c[0]);
    let mut rng = rng_from_seed(seed);
    for i in (1..components.len()).rev() {
        let j = rng.gen_range(0..=i);
        components.swap(i, j);
    }

    let target = (test_fraction * n as f64).ceil() as usize;
    let mut in_test = 0usize;
    for component in &components {
        let to_test = in_test < target && in_test + component.len() < n;
        for &i in component {
            index.entries[i].split = Some(if to_test { Split::Test } else { Split::Train });
        }
        if to_test {
            in_test += component.len();
        }
    }
    if in_test == 0 {
        return Err(Error::SplitInfeasible(
            "could not place any component in test without emptying train".into(),
        ));
    }
    index.validate_no_leakage()
}
