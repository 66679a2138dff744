//! Pose frames: 24 joint rotations plus a global root translation, encoded as
//! a flat 219-vector (24 x 9 row-major rotation entries, then 3 translation
//! components).

use crate::error::{Error, Result};
use crate::motion::rotation::{
    mat3_det, orthonormality_defect, orthonormalize, Mat3, IDENTITY,
};
use crate::numerics::tensor::Tensor;

pub const JOINT_COUNT: usize = 24;
pub const MOTION_DIM: usize = JOINT_COUNT * 9 + 3; // 219
pub const FPS: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub rotations: [Mat3; JOINT_COUNT],
    /// Global root translation, meters; y up.
    pub translation: [f64; 3],
}

impl PoseFrame {
    pub fn rest() -> PoseFrame {
        PoseFrame {
            rotations: [IDENTITY; JOINT_COUNT],
            translation: [0.0; 3],
        }
    }

    /// Checks every rotation is orthonormal within `tol` with det near +1.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for (j, r) in self.rotations.iter().enumerate() {
            let defect = orthonormality_defect(r);
            if defect > tol {
                return Err(Error::Data(format!(
                    "joint {} rotation violates orthonormality: defect {:.3e} > {:.1e}",
                    j, defect, tol
                )));
            }
            let det = mat3_det(r);
            if (det - 1.0).abs() > tol {
                return Err(Error::Data(format!(
                    "joint {} rotation has det {} (expected +1)",
                    j, det
                )));
            }
        }
        if self.translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite translation".into()));
        }
        Ok(())
    }
}

pub fn encode_pose(p: &PoseFrame) -> Vec<f64> {
    let mut out = Vec::with_capacity(MOTION_DIM);
    for r in &p.rotations {
        for row in r {
            out.extend_from_slice(row);
        }
    }
    out.extend_from_slice(&p.translation);
    out
}

/// Inverse of `encode_pose`; each 9-block is projected onto the nearest
/// rotation (a no-op returning the input bits when the block already is one).
pub fn decode_pose(v: &[f64]) -> Result<PoseFrame> {
    if v.len() != MOTION_DIM {
        return Err(Error::dimension(
            "decode_pose",
            format!("expected {} values, got {}", MOTION_DIM, v.len()),
        ));
    }
    let mut rotations = [IDENTITY; JOINT_COUNT];
    for j in 0..JOINT_COUNT {
        let b = &v[j * 9..j * 9 + 9];
        let raw: Mat3 = [
            [b[0], b[1], b[2]],
            [b[3], b[4], b[5]],
            [b[6], b[7], b[8]],
        ];
        rotations[j] = orthonormalize(&raw).map_err(|e| match e {
            Error::DegenerateRotation(msg) => {
                Error::DegenerateRotation(format!("joint {}: {}", j, msg))
            }
            other => other,
        })?;
    }
    let translation = [v[216], v[217], v[218]];
    if translation.iter().any(|t| !t.is_finite()) {
        return Err(Error::Data("non-finite translation in pose vector".into()));
    }
    Ok(PoseFrame { rotations, translation })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub frames: Vec<PoseFrame>,
    pub fps: f64,
}

impl MotionSequence {
    pub fn new(frames: Vec<PoseFrame>) -> Result<MotionSequence> {
        if frames.is_empty() {
            return Err(Error::InsufficientFrames(
                "motion sequence needs at least one frame".into(),
            ));
        }
        Ok(MotionSequence { frames, fps: FPS })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// (T, 219) tensor of encoded frames.
    pub fn to_tensor(&self) -> Tensor {
        let mut data = Vec::with_capacity(self.frames.len() * MOTION_DIM);
        for f in &self.frames {
            data.extend(encode_pose(f));
        }
        Tensor::new(&[self.frames.len(), MOTION_DIM], data)
            .expect("encoded pose frames are finite")
    }

    /// Decodes a (T, 219) tensor, orthonormalizing every rotation block.
    pub fn from_tensor(t: &Tensor) -> Result<MotionSequence> {
        if t.rank() != 2 || t.shape()[1] != MOTION_DIM {
            return Err(Error::dimension(
                "motion_from_tensor",
                format!("expected (T, {}), got {:?}", MOTION_DIM, t.shape()),
            ));
        }
        let frames = (0..t.shape()[0])
            .map(|r| decode_pose(t.row(r)))
            .collect::<Result<Vec<_>>>()?;
        MotionSequence::new(frames)
    }
}

/// Reflects a pose across the x=0 plane and swaps left/right joints; used by
/// symmetry tests on the geometric feature catalog.
pub fn mirror_pose(p: &PoseFrame, mirror_map: &[usize; JOINT_COUNT]) -> PoseFrame {
    let mut rotations = [IDENTITY; JOINT_COUNT];
    for j in 0..JOINT_COUNT {
        let src = p.rotations[mirror_map[j]];
        // Conjugation by diag(-1,1,1): negate entries with exactly one x index.
        let mut m = src;
        m[0][1] = -m[0][1];
        m[0][2] = -m[0][2];
        m[1][0] = -m[1][0];
        m[2][0] = -m[2][0];
        rotations[j] = m;
    }
    PoseFrame {
        rotations,
        translation: [-p.translation[0], p.translation[1], p.translation[2]],
    }
}
