//! Standalone tensor operations. These are the pure value-level kernels;
//! gradient recording for the same math happens through `tape::Tape`, which
//! training uses.

use crate::error::{Error, Result};
use crate::numerics::linalg;
use crate::numerics::tape::{softmax_masked_kernel, Mask};
use crate::numerics::tensor::Tensor;

/// y = x*w + b with w (in, out) and b (out), broadcasting over every leading
/// dim of x.
pub fn linear_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    if w.rank() != 2 {
        return Err(Error::dimension(
            "linear_forward",
            format!("weight must be rank-2, got {:?}", w.shape()),
        ));
    }
    let (w_in, w_out) = (w.shape()[0], w.shape()[1]);
    let x_in = x.shape().last().copied().unwrap_or(0);
    if x.rank() == 0 || x_in != w_in {
        return Err(Error::dimension(
            "linear_forward",
            format!("x shape {:?} vs w shape {:?}", x.shape(), w.shape()),
        ));
    }
    if b.numel() != w_out {
        return Err(Error::dimension(
            "linear_forward",
            format!("bias has {} elements, w shape {:?}", b.numel(), w.shape()),
        ));
    }
    let (rows, _) = x.as_matrix_view();
    let mut out = linalg::matmul(rows, w_in, w_out, x.data(), false, w.data(), false);
    for row in out.chunks_mut(w_out) {
        for (o, bv) in row.iter_mut().zip(b.data()) {
            *o += bv;
        }
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = w_out;
    Tensor::new(&shape, out)
}

/// Row-wise softmax of (scores + mask) over the trailing (L, L) block of
/// `scores`; mask entries are 0 (visible) or -inf (hidden), and hidden
/// positions come out exactly 0.
pub fn softmax_masked(scores: &Tensor, mask: &Tensor) -> Result<Tensor> {
    let mask = Mask::from_tensor(mask)?;
    if scores.rank() < 2 {
        return Err(Error::dimension(
            "softmax_masked",
            format!("scores must be rank >= 2, got {:?}", scores.shape()),
        ));
    }
    let l = scores.shape()[scores.rank() - 1];
    let l2 = scores.shape()[scores.rank() - 2];
    if l != mask.len || l2 != mask.len {
        return Err(Error::dimension(
            "softmax_masked",
            format!("scores {:?} vs mask ({},{})", scores.shape(), mask.len, mask.len),
        ));
    }
    let block = l * l;
    let mut out = Vec::with_capacity(scores.numel());
    for chunk in scores.data().chunks(block) {
        out.extend(softmax_masked_kernel(chunk, l, &mask)?);
    }
    Tensor::new(scores.shape(), out)
}
