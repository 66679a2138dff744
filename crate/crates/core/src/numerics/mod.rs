//! Double-precision tensor core: storage, file format, gemm and eigensolver
//! kernels, a reverse-mode tape, Adam, and gradient checking.

pub mod adam;
pub mod ftns;
pub mod gradcheck;
pub mod linalg;
pub mod ops;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use adam::{adam_step, AdamState};
pub use ftns::{read_tensor, write_tensor, DType, FtnsFile};
pub use gradcheck::{grad_check, GradCheckReport};
pub use ops::{linear_forward, softmax_masked};
pub use rng::{fill_normal, rng_from_seed, standard_normal};
pub use tape::{Mask, Tape, Var};
pub use tensor::Tensor;
