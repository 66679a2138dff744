//! Dense row-major f64 tensor.
//!
//! The whole pipeline runs in double precision; narrowing to f32 happens only
//! at explicit file-format boundaries. Values are validated finite on
//! construction so NaN/Inf cannot propagate silently.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    pub requires_grad: bool,
    /// Filled by a backward pass when this tensor was a differentiable leaf.
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    /// Builds a tensor, validating the element count and that every value is
    /// finite.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::dimension(
                "tensor_new",
                format!("shape {:?} implies {} elements, got {}", shape, numel, data.len()),
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value {} at flat index {} in tensor of shape {:?}",
                data[i], i, shape
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        Tensor::new(shape, vec![value; numel])
    }

    pub fn scalar(value: f64) -> Result<Tensor> {
        Tensor::new(&[1], vec![value])
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor> {
        Tensor::new(&[rows, cols], data)
    }

    /// Additive attention mask: the one tensor kind allowed to hold -inf.
    /// Entries must be exactly 0 (visible) or -inf (hidden).
    pub fn additive_mask(len: usize, data: Vec<f64>) -> Result<Tensor> {
        if data.len() != len * len {
            return Err(Error::dimension(
                "additive_mask",
                format!("({len},{len}) mask needs {} entries, got {}", len * len, data.len()),
            ));
        }
        if let Some(i) = data
            .iter()
            .position(|&v| v != 0.0 && v != f64::NEG_INFINITY)
        {
            return Err(Error::Data(format!(
                "mask entries must be 0 or -inf, found {} at flat index {}",
                data[i], i
            )));
        }
        Ok(Tensor {
            shape: vec![len, len],
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn with_grad(mut self) -> Tensor {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Rows of the matrix view: product of all leading dims, with the trailing
    /// dim as columns. A rank-1 tensor is one row.
    pub fn as_matrix_view(&self) -> (usize, usize) {
        match self.shape.last() {
            None | Some(0) => (0, self.shape.last().copied().unwrap_or(0)),
            Some(&cols) => (self.data.len() / cols, cols),
        }
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        Tensor::new(shape, self.data.clone())
    }

    /// Copies rows [start, start+len) of a rank-2 tensor.
    pub fn slice_rows(&self, start: usize, len: usize) -> Result<Tensor> {
        if self.rank() != 2 {
            return Err(Error::dimension(
                "slice_rows",
                format!("expected rank-2 tensor, got shape {:?}", self.shape),
            ));
        }
        let (rows, cols) = (self.shape[0], self.shape[1]);
        if start + len > rows {
            return Err(Error::dimension(
                "slice_rows",
                format!("rows [{}, {}) out of bounds for {} rows", start, start + len, rows),
            ));
        }
        Tensor::matrix(len, cols, self.data[start * cols..(start + len) * cols].to_vec())
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let cols = *self.shape.last().expect("row on rank-0 tensor");
        &self.data[r * cols..(r + 1) * cols]
    }
}
