//! Dense `f64` tensors and a tape-based reverse-mode differentiation engine.
//!
//! Values live on a [`Tape`]; every primitive returns a [`Var`] handle to the
//! node it recorded. Calling [`Tape::backward`] on a scalar node walks the tape
//! once in reverse and accumulates `d root / d node` into every node that
//! requires gradients.

mod gradcheck;
mod kernels;
pub(crate) mod tape;

pub use gradcheck::{grad_check, grad_check_many, GradCheckReport};
pub use tape::{Tape, Var};

use crate::error::{Error, Result};

/// Row-major dense array of 64-bit floats.
///
/// A tensor with an empty shape is a scalar holding one element.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::contract(format!(
                "tensor extents must be positive, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch {
                op: "tensor",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![data.len()], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::ShapeMismatch {
                    op: "from_rows",
                    lhs: vec![i, cols],
                    rhs: vec![i, row.len()],
                });
            }
            data.extend_from_slice(row);
        }
        Tensor::matrix(rows.len(), cols, data)
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Tensor::new(shape, vec![0.0; n])
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Result<Self> {
        let n = shape.iter().product();
        Tensor::new(shape, vec![value; n])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Tensor::matrix(n, n, data)
    }

    pub fn with_requires_grad(mut self, requires_grad: bool) -> Self {
        self.requires_grad = requires_grad;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub(crate) fn accumulate_grad(&mut self, g: Vec<f64>) {
        match &mut self.grad {
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
            None => self.grad = Some(g),
        }
    }

    /// The single element of a scalar (or one-element) tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::contract(format!(
                "item() on tensor of shape {:?}",
                self.shape
            )))
        }
    }

    /// Rows and columns of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::contract(format!(
                "expected a matrix, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    /// Row `i` of a matrix.
    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    /// Copies the listed rows into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let (r, c) = self.dims2()?;
        let mut data = Vec::with_capacity(rows.len() * c);
        for &i in rows {
            if i >= r {
                return Err(Error::contract(format!(
                    "row {i} out of range for {r} rows"
                )));
            }
            data.extend_from_slice(&self.data[i * c..(i + 1) * c]);
        }
        Tensor::matrix(rows.len(), c, data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
