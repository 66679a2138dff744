//! Whole-set evaluation: distribution distances, diversity, beat alignment.

use crate::error::{Error, Result};
use crate::metrics::beats::{beat_align, detect_kinematic_beats, BeatSet, BEAT_SIGMA};
use crate::metrics::frechet::{diversity, frechet_distance};
use crate::metrics::geometric::geometric_features;
use crate::metrics::kinetic::kinetic_features;
use crate::motion::{MotionSequence, Skeleton};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub fid_k: f64,
    pub fid_g: f64,
    pub dist_k: f64,
    pub dist_g: f64,
    pub beat_align: f64,
    pub generated_count: usize,
    pub reference_count: usize,
    /// Generated sequences that contributed to the alignment average (both
    /// beat sets non-empty).
    pub beat_sequences_used: usize,
}

impl MetricReport {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("fid_k", self.fid_k),
            ("fid_g", self.fid_g),
            ("dist_k", self.dist_k),
            ("dist_g", self.dist_g),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::MetricInput(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.beat_align.is_finite() && self.beat_align > 0.0 && self.beat_align <= 1.0) {
            return Err(Error::MetricInput(format!(
                "beat_align must be in (0,1], got {}",
                self.beat_align
            )));
        }
        Ok(())
    }

    /// One JSON record per line: five metric lines, then a counts line. The
    /// digest identifies the input artifacts the values were computed from.
    pub fn to_jsonl(&self, inputs_digest: &str) -> String {
        let mut out = String::new();
        for (name, v) in [
            ("fid_k", self.fid_k),
            ("fid_g", self.fid_g),
            ("dist_k", self.dist_k),
            ("dist_g", self.dist_g),
            ("beat_align", self.beat_align),
        ] {
            out.push_str(&format!(
                "{{\"metric\":\"{name}\",\"value\":{v},\"inputs\":\"{inputs_digest}\"}}\n"
            ));
        }
        out.push_str(&format!(
            "{{\"metric\":\"counts\",\"generated\":{},\"reference\":{},\"beat_sequences_used\":{},\"inputs\":\"{inputs_digest}\"}}\n",
            self.generated_count, self.reference_count, self.beat_sequences_used
        ));
        out
    }
}

fn feature_sets(
    set: &[MotionSequence],
    skeleton: &Skeleton,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut kin = Vec::with_capacity(set.len());
    let mut geo = Vec::with_capacity(set.len());
    for m in set {
        kin.push(kinetic_features(m, skeleton)?);
        geo.push(geometric_features(m, skeleton)?);
    }
    Ok((kin, geo))
}

/// Full evaluation of a generated set against a reference set. `music_beats`
/// pairs with `generated` one-to-one; pairs where either beat set is empty
/// are skipped for alignment (the other metrics still use every sequence),
/// and it is an error if no pair remains.
pub fn evaluate_sets(
    generated: &[MotionSequence],
    reference: &[MotionSequence],
    music_beats: &[BeatSet],
    skeleton: &Skeleton,
) -> Result<MetricReport> {
    if music_beats.len() != generated.len() {
        return Err(Error::MetricInput(format!(
            "{} music beat sets for {} generated sequences",
            music_beats.len(),
            generated.len()
        )));
    }
    let (gen_k, gen_g) = feature_sets(generated, skeleton)?;
    let (ref_k, ref_g) = feature_sets(reference, skeleton)?;

    let fid_k = frechet_distance(&gen_k, &ref_k)?;
    let fid_g = frechet_distance(&gen_g, &ref_g)?;
    let dist_k = diversity(&gen_k)?;
    let dist_g = diversity(&gen_g)?;

    let mut align_sum = 0.0;
    let mut used = 0usize;
    for (m, mus) in generated.iter().zip(music_beats) {
        let kin = detect_kinematic_beats(m, skeleton)?;
        if kin.is_empty() || mus.is_empty() {
            continue;
        }
        align_sum += beat_align(&kin, mus, BEAT_SIGMA)?;
        used += 1;
    }
    if used == 0 {
        return Err(Error::MetricInput(
            "no sequence pair had both kinematic and music beats".into(),
        ));
    }

    let report = MetricReport {
        fid_k,
        fid_g,
        dist_k,
        dist_g,
        beat_align: align_sum / used as f64,
        generated_count: generated.len(),
        reference_count: reference.len(),
        beat_sequences_used: used,
    };
    report.validate()?;
    Ok(report)
}
