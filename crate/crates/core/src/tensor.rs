//! Dense third-order tensor storage.
//!
//! `DenseTensor3` is the universal value type of the crate: observed data,
//! residuals, gradients and iterates are all plain dense tensors. Entries are
//! stored slice-major (the third index is outermost) and column-major within
//! each frontal slice, so the flat offset of `(i, j, k)` is
//! `i + n1 * j + n1 * n2 * k`. This matches the on-disk T3B layout
//! (`i` fastest, then `j`, then `k`) bit for bit.

use crate::error::{Error, Result};

/// Dimensions `(n1, n2, n3)` of a third-order tensor.
pub type Dims3 = (usize, usize, usize);

/// A dense real third-order tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3 {
    n1: usize,
    n2: usize,
    n3: usize,
    data: Vec<f64>,
}

impl DenseTensor3 {
    /// Zero tensor of the given dimensions.
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        Self {
            n1,
            n2,
            n3,
            data: vec![0.0; n1 * n2 * n3],
        }
    }

    /// Builds a tensor from flat storage in `(i fastest, j, k)` order.
    pub fn from_vec(dims: Dims3, data: Vec<f64>) -> Result<Self> {
        let (n1, n2, n3) = dims;
        if data.len() != n1 * n2 * n3 {
            return Err(Error::InvalidArgument(format!(
                "storage length {} does not match dims {dims:?}",
                data.len()
            )));
        }
        Ok(Self { n1, n2, n3, data })
    }

    /// Builds a tensor by evaluating `f(i, j, k)` at every index.
    pub fn from_fn(dims: Dims3, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let (n1, n2, n3) = dims;
        let mut data = Vec::with_capacity(n1 * n2 * n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { n1, n2, n3, data }
    }

    #[inline]
    pub fn dims(&self) -> Dims3 {
        (self.n1, self.n2, self.n3)
    }

    /// Total number of entries.
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub(crate) fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.n1 && j < self.n2 && k < self.n3);
        i + self.n1 * (j + self.n2 * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = value;
    }

    /// Flat storage, `i` fastest, then `j`, then `k`.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// The contiguous storage of frontal slice `k` (column-major `n1 x n2`).
    #[inline]
    pub fn frontal_slice(&self, k: usize) -> &[f64] {
        let len = self.n1 * self.n2;
        &self.data[k * len..(k + 1) * len]
    }

    /// `true` when every entry is finite (no NaN or infinity).
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// In-place `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &DenseTensor3) {
        assert_eq!(self.dims(), other.dims(), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// `alpha * self`, consuming nothing.
    pub fn scaled(&self, alpha: f64) -> DenseTensor3 {
        DenseTensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    pub(crate) fn same_dims(&self, other: &DenseTensor3, op: &'static str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::shape(op, self.dims(), other.dims()));
        }
        Ok(())
    }
}

impl std::ops::Add for &DenseTensor3 {
    type Output = DenseTensor3;
    fn add(self, rhs: &DenseTensor3) -> DenseTensor3 {
        assert_eq!(self.dims(), rhs.dims(), "tensor add shape mismatch");
        DenseTensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl std::ops::Sub for &DenseTensor3 {
    type Output = DenseTensor3;
    fn sub(self, rhs: &DenseTensor3) -> DenseTensor3 {
        assert_eq!(self.dims(), rhs.dims(), "tensor sub shape mismatch");
        DenseTensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}
