//! Pose representation, rotation utilities, skeleton, and kinematics.

pub mod pose;
pub mod rotation;
pub mod skeleton;

pub use pose::{
    decode_pose, encode_pose, mirror_pose, MotionSequence, PoseFrame, FPS, JOINT_COUNT, MOTION_DIM,
};
pub use rotation::{axis_angle_to_matrix, orthonormalize, orthonormality_defect, Mat3};
pub use skeleton::{forward_kinematics, joint_velocities, joints, Skeleton, MIRROR_MAP};
