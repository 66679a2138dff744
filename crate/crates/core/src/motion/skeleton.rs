//! Canonical 24-joint skeleton, forward kinematics, and joint velocities.

use crate::error::{Error, Result};
use crate::motion::pose::{MotionSequence, PoseFrame, JOINT_COUNT};
use crate::motion::rotation::{mat3_apply, mat3_mul, Mat3};

/// Joint indices in SMPL ordering.
pub mod joints {
    pub const PELVIS: usize = 0;
    pub const L_HIP: usize = 1;
    pub const R_HIP: usize = 2;
    pub const SPINE1: usize = 3;
    pub const L_KNEE: usize = 4;
    pub const R_KNEE: usize = 5;
    pub const SPINE2: usize = 6;
    pub const L_ANKLE: usize = 7;
    pub const R_ANKLE: usize = 8;
    pub const SPINE3: usize = 9;
    pub const L_FOOT: usize = 10;
    pub const R_FOOT: usize = 11;
    pub const NECK: usize = 12;
    pub const L_COLLAR: usize = 13;
    pub const R_COLLAR: usize = 14;
    pub const HEAD: usize = 15;
    pub const L_SHOULDER: usize = 16;
    pub const R_SHOULDER: usize = 17;
    pub const L_ELBOW: usize = 18;
    pub const R_ELBOW: usize = 19;
    pub const L_WRIST: usize = 20;
    pub const R_WRIST: usize = 21;
    pub const L_HAND: usize = 22;
    pub const R_HAND: usize = 23;
}

/// Left/right partner for each joint (self for midline joints).
pub const MIRROR_MAP: [usize; JOINT_COUNT] = [
    0, 2, 1, 3, 5, 4, 6, 8, 7, 9, 11, 10, 12, 14, 13, 15, 17, 16, 19, 18, 21, 20, 23, 22,
];

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    /// Parent index per joint; root (joint 0) has parent -1, parent[j] < j.
    pub parents: [i32; JOINT_COUNT],
    /// Rest-pose bone offset from the parent joint, meters.
    pub offsets: [[f64; 3]; JOINT_COUNT],
}

const CANONICAL_TEXT: &str = include_str!("../../data/skeleton.txt");

impl Skeleton {
    pub fn canonical() -> Skeleton {
        Skeleton::from_text(CANONICAL_TEXT).expect("embedded skeleton file is valid")
    }

    /// Parses 24 lines of `parent ox oy oz`; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Skeleton> {
        let mut parents = [0i32; JOINT_COUNT];
        let mut offsets = [[0.0; 3]; JOINT_COUNT];
        let mut row = 0usize;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if row >= JOINT_COUNT {
                return Err(Error::Data(format!(
                    "skeleton line {}: more than {} joints",
                    lineno + 1,
                    JOINT_COUNT
                )));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Data(format!(
                    "skeleton line {}: expected `parent ox oy oz`, got {:?}",
                    lineno + 1,
                    line
                )));
            }
            parents[row] = fields[0]
                .parse()
                .map_err(|_| Error::Data(format!("skeleton line {}: bad parent index", lineno + 1)))?;
            for k in 0..3 {
                offsets[row][k] = fields[k + 1]
                    .parse()
                    .map_err(|_| Error::Data(format!("skeleton line {}: bad offset", lineno + 1)))?;
            }
            row += 1;
        }
        if row != JOINT_COUNT {
            return Err(Error::Data(format!(
                "skeleton file has {} joints, expected {}",
                row, JOINT_COUNT
            )));
        }
        let s = Skeleton { parents, offsets };
        s.validate()?;
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# parent offset_x offset_y offset_z\n");
        for j in 0..JOINT_COUNT {
            out.push_str(&format!(
                "{} {} {} {}\n",
                self.parents[j], self.offsets[j][0], self.offsets[j][1], self.offsets[j][2]
            ));
        }
        out
    }

    /// Tree rooted at joint 0 with topologically-ordered parents.
    pub fn validate(&self) -> Result<()> {
        if self.parents[0] != -1 {
            return Err(Error::Data("skeleton root (joint 0) must have parent -1".into()));
        }
        for j in 1..JOINT_COUNT {
            let p = self.parents[j];
            if p < 0 || p as usize >= j {
                return Err(Error::Data(format!(
                    "skeleton joint {} has parent {}, expected 0 <= parent < {}",
                    j, p, j
                )));
            }
        }
        if self.offsets.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("skeleton offsets must be finite".into()));
        }
        Ok(())
    }
}

/// Global joint positions: root at the frame translation, every child at
/// parent position plus the parent's global rotation applied to its offset.
pub fn forward_kinematics(p: &PoseFrame, s: &Skeleton) -> [[f64; 3]; JOINT_COUNT] {
    let mut global_rot: [Mat3; JOINT_COUNT] = [p.rotations[0]; JOINT_COUNT];
    let mut pos = [[0.0; 3]; JOINT_COUNT];
    pos[0] = p.translation;
    for j in 1..JOINT_COUNT {
        let parent = s.parents[j] as usize;
        let step = mat3_apply(&global_rot[parent], &s.offsets[j]);
        for k in 0..3 {
            pos[j][k] = pos[parent][k] + step[k];
        }
        global_rot[j] = mat3_mul(&global_rot[parent], &p.rotations[j]);
    }
    pos
}

/// Forward differences of FK positions scaled by fps: (T-1) x 24 x 3, m/s.
pub fn joint_velocities(m: &MotionSequence, s: &Skeleton) -> Result<Vec<[[f64; 3]; JOINT_COUNT]>> {
    if m.len() < 2 {
        return Err(Error::InsufficientFrames(format!(
            "joint velocities need at least 2 frames, got {}",
            m.len()
        )));
    }
    let mut prev = forward_kinematics(&m.frames[0], s);
    let mut out = Vec::with_capacity(m.len() - 1);
    for t in 1..m.len() {
        let cur = forward_kinematics(&m.frames[t], s);
        let mut v = [[0.0; 3]; JOINT_COUNT];
        for j in 0..JOINT_COUNT {
            for k in 0..3 {
                v[j][k] = (cur[j][k] - prev[j][k]) * m.fps;
            }
        }
        out.push(v);
        prev = cur;
    }
    Ok(out)
}
