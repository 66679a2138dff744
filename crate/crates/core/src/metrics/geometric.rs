//! Geometric motion features: per-frame boolean relational predicates over
//! joint positions, averaged over the sequence into a 33-vector in [0,1].
//!
//! The predicate catalog ships as a data file so thresholds, joints, and
//! left/right pairings are documented in one place.

use crate::error::{Error, Result};
use crate::motion::{forward_kinematics, joints, MotionSequence, Skeleton, JOINT_COUNT};
use std::sync::OnceLock;

pub const GEOMETRIC_DIM: usize = 33;

#[derive(Debug, Clone, PartialEq)]
pub enum PredicateKind {
    /// pos[a].y > pos[b].y + threshold
    Above { a: usize, b: usize },
    /// pos[a].z > pos[b].z + threshold
    Ahead { a: usize, b: usize },
    /// |pos[a] - pos[b]| < threshold
    DistLt { a: usize, b: usize },
    /// |pos[a] - pos[b]| > threshold
    DistGt { a: usize, b: usize },
    /// angle at b between (a-b) and (c-b) < threshold degrees
    AngleLt { a: usize, b: usize, c: usize },
    /// normalized (neck - pelvis) y component > threshold
    Upright,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub name: String,
    pub kind: PredicateKind,
    pub threshold: f64,
    /// Index of the predicate this one maps to under left/right reflection.
    pub mirror: usize,
}

impl Predicate {
    pub fn holds(&self, pos: &[[f64; 3]; JOINT_COUNT]) -> bool {
        let dist = |a: usize, b: usize| -> f64 {
            let d = [
                pos[a][0] - pos[b][0],
                pos[a][1] - pos[b][1],
                pos[a][2] - pos[b][2],
            ];
            (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
        };
        match self.kind {
            PredicateKind::Above { a, b } => pos[a][1] > pos[b][1] + self.threshold,
            PredicateKind::Ahead { a, b } => pos[a][2] > pos[b][2] + self.threshold,
            PredicateKind::DistLt { a, b } => dist(a, b) < self.threshold,
            PredicateKind::DistGt { a, b } => dist(a, b) > self.threshold,
            PredicateKind::AngleLt { a, b, c } => {
                let u = [
                    pos[a][0] - pos[b][0],
                    pos[a][1] - pos[b][1],
                    pos[a][2] - pos[b][2],
                ];
                let v = [
                    pos[c][0] - pos[b][0],
                    pos[c][1] - pos[b][1],
                    pos[c][2] - pos[b][2],
                ];
                let nu = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                let nv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if nu == 0.0 || nv == 0.0 {
                    return false;
                }
                let cos = ((u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / (nu * nv)).clamp(-1.0, 1.0);
                cos.acos().to_degrees() < self.threshold
            }
            PredicateKind::Upright => {
                let d = [
                    pos[joints::NECK][0] - pos[joints::PELVIS][0],
                    pos[joints::NECK][1] - pos[joints::PELVIS][1],
                    pos[joints::NECK][2] - pos[joints::PELVIS][2],
                ];
                let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                n > 0.0 && d[1] / n > self.threshold
            }
        }
    }
}

fn parse_joint(tok: &str, line: usize) -> Result<usize> {
    let j: usize = tok
        .parse()
        .map_err(|_| Error::Data(format!("catalog line {line}: bad joint index {tok:?}")))?;
    if j >= JOINT_COUNT {
        return Err(Error::Data(format!(
            "catalog line {line}: joint index {j} out of range"
        )));
    }
    Ok(j)
}

pub fn parse_catalog(text: &str) -> Result<Vec<Predicate>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let n = lineno + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let fail = |msg: &str| Error::Data(format!("catalog line {n}: {msg}"));
        if toks.len() < 5 {
            return Err(fail("too few fields"));
        }
        let index: usize = toks[0].parse().map_err(|_| fail("bad index"))?;
        if index != out.len() {
            return Err(fail(&format!("index {index}, expected {}", out.len())));
        }
        let name = toks[1].to_string();
        let kind_tok = toks[2];
        let num = |tok: &str| -> Result<f64> {
            tok.parse().map_err(|_| fail(&format!("bad number {tok:?}")))
        };
        let (kind, threshold, mirror_tok) = match kind_tok {
            "above" | "ahead" | "dist_lt" | "dist_gt" => {
                if toks.len() != 7 {
                    return Err(fail("expected: idx name kind A B threshold mirror"));
                }
                let a = parse_joint(toks[3], n)?;
                let b = parse_joint(toks[4], n)?;
                let kind = match kind_tok {
                    "above" => PredicateKind::Above { a, b },
                    "ahead" => PredicateKind::Ahead { a, b },
                    "dist_lt" => PredicateKind::DistLt { a, b },
                    _ => PredicateKind::DistGt { a, b },
                };
                (kind, num(toks[5])?, toks[6])
            }
            "angle_lt" => {
                if toks.len() != 8 {
                    return Err(fail("expected: idx name angle_lt A B C threshold mirror"));
                }
                let a = parse_joint(toks[3], n)?;
                let b = parse_joint(toks[4], n)?;
                let c = parse_joint(toks[5], n)?;
                (PredicateKind::AngleLt { a, b, c }, num(toks[6])?, toks[7])
            }
            "upright" => {
                if toks.len() != 5 {
                    return Err(fail("expected: idx name upright threshold mirror"));
                }
                (PredicateKind::Upright, num(toks[3])?, toks[4])
            }
            other => return Err(fail(&format!("unknown kind {other:?}"))),
        };
        let mirror: usize = mirror_tok.parse().map_err(|_| fail("bad mirror index"))?;
        out.push(Predicate {
            name,
            kind,
            threshold,
            mirror,
        });
    }
    for (i, p) in out.iter().enumerate() {
        if p.mirror >= out.len() || out[p.mirror].mirror != i {
            return Err(Error::Data(format!(
                "predicate {} has a non-involutive mirror index {}",
                p.name, p.mirror
            )));
        }
    }
    Ok(out)
}

/// The shipped 33-predicate catalog.
pub fn catalog() -> &'static [Predicate] {
    static CATALOG: OnceLock<Vec<Predicate>> = OnceLock::new();
    CATALOG.get_or_init(|| {
        let parsed = parse_catalog(include_str!("../../data/geometric_catalog.txt"))
            .expect("shipped catalog parses");
        assert_eq!(parsed.len(), GEOMETRIC_DIM, "shipped catalog has 33 entries");
        parsed
    })
}

/// Fraction of frames on which each catalog predicate holds.
pub fn geometric_features(m: &MotionSequence, s: &Skeleton) -> Result<Vec<f64>> {
    let preds = catalog();
    let mut z = vec![0.0; preds.len()];
    for frame in &m.frames {
        let pos = forward_kinematics(frame, s);
        for (zi, p) in z.iter_mut().zip(preds) {
            if p.holds(&pos) {
                *zi += 1.0;
            }
        }
    }
    let n = m.len() as f64;
    for zi in &mut z {
        *zi /= n;
    }
    Ok(z)
}
