//! The t_c-product algebra.
//!
//! All products act slice-wise in the DCT transform domain: the block
//! diagonal matrix `blockdiag(dct3(a))` is never materialized, only its
//! `n3` frontal slices. Because the tube transform is unitary, spatial-domain
//! inner products and Frobenius norms agree with their transform-domain
//! counterparts, and the tensor spectral norm is the largest singular value
//! over all transform slices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor3, Dims3};
use crate::transform::{dct3, idct3};

/// The frontal slices of a tensor in the transform domain.
#[derive(Debug, Clone)]
pub struct TransformSlices {
    dims: Dims3,
    slices: Vec<DMatrix<f64>>,
}

impl TransformSlices {
    /// Transforms `a` and splits it into its `n3` frontal slices.
    pub fn from_tensor(a: &DenseTensor3) -> Self {
        let ahat = dct3(a);
        Self::from_hat(&ahat)
    }

    /// Splits an already-transformed tensor into frontal slices.
    pub fn from_hat(ahat: &DenseTensor3) -> Self {
        let (n1, n2, n3) = ahat.dims();
        let slices = (0..n3)
            .map(|k| DMatrix::from_column_slice(n1, n2, ahat.frontal_slice(k)))
            .collect();
        Self {
            dims: (n1, n2, n3),
            slices,
        }
    }

    /// Assembles slices produced in the transform domain.
    ///
    /// Panics if the slices are empty or of uneven shape.
    pub fn from_parts(slices: Vec<DMatrix<f64>>) -> Self {
        assert!(!slices.is_empty(), "need at least one slice");
        let (n1, n2) = slices[0].shape();
        assert!(
            slices.iter().all(|s| s.shape() == (n1, n2)),
            "uneven slice shapes"
        );
        let n3 = slices.len();
        Self {
            dims: (n1, n2, n3),
            slices,
        }
    }

    #[inline]
    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    #[inline]
    pub fn slices(&self) -> &[DMatrix<f64>] {
        &self.slices
    }

    /// Stacks the slices back into a transform-domain tensor.
    pub fn to_hat(&self) -> DenseTensor3 {
        let (n1, n2, n3) = self.dims;
        let mut data = Vec::with_capacity(n1 * n2 * n3);
        for s in &self.slices {
            data.extend_from_slice(s.as_slice());
        }
        DenseTensor3::from_vec((n1, n2, n3), data).expect("consistent slice shapes")
    }

    /// Inverse-transforms the slices back to the spatial domain.
    pub fn to_tensor(&self) -> DenseTensor3 {
        idct3(&self.to_hat())
    }
}

/// The t_c-product `a * b`: slice-wise matrix products in the transform domain.
pub fn tprod(a: &DenseTensor3, b: &DenseTensor3) -> Result<DenseTensor3> {
    let (_, a2, a3) = a.dims();
    let (b1, _, b3) = b.dims();
    if a2 != b1 || a3 != b3 {
        return Err(Error::shape("tprod", a.dims(), b.dims()));
    }
    let ah = TransformSlices::from_tensor(a);
    let bh = TransformSlices::from_tensor(b);
    let slices = ah
        .slices
        .iter()
        .zip(&bh.slices)
        .map(|(x, y)| x * y)
        .collect::<Vec<_>>();
    Ok(TransformSlices::from_parts(slices).to_tensor())
}

/// Tensor transpose: slice-wise transpose in the transform domain.
pub fn ttranspose(a: &DenseTensor3) -> DenseTensor3 {
    let ah = TransformSlices::from_tensor(a);
    let slices = ah.slices.iter().map(|s| s.transpose()).collect();
    TransformSlices::from_parts(slices).to_tensor()
}

/// The identity tensor: every transform slice is the `n x n` identity.
pub fn identity(n: usize, n3: usize) -> DenseTensor3 {
    assert!(n >= 1 && n3 >= 1, "identity requires positive dims");
    let slices = vec![DMatrix::<f64>::identity(n, n); n3];
    TransformSlices::from_parts(slices).to_tensor()
}

/// Inner product, summed over frontal slices; equals the transform-domain one.
pub fn inner(a: &DenseTensor3, b: &DenseTensor3) -> Result<f64> {
    a.same_dims(b, "inner")?;
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x * y)
        .sum())
}

/// Frobenius norm over all entries.
pub fn fro_norm(a: &DenseTensor3) -> f64 {
    a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest entry magnitude.
pub fn inf_norm(a: &DenseTensor3) -> f64 {
    a.as_slice().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Tensor spectral norm: the largest singular value over all transform slices.
pub fn spectral_norm(a: &DenseTensor3) -> f64 {
    pooled_singular_values(a).into_iter().fold(0.0, f64::max)
}

/// All singular values of the transform slices, pooled and unsorted.
pub(crate) fn pooled_singular_values(a: &DenseTensor3) -> Vec<f64> {
    let mut pool = Vec::new();
    for (k, s) in TransformSlices::from_tensor(a).slices().iter().enumerate() {
        let (_, svals, _) = crate::svd::checked_svd(s, k).expect("finite input");
        pool.extend(svals);
    }
    pool
}

/// Smallest singular value above `tol * sigma_max`, pooled over all slices.
///
/// This is the `sigma_min` of the block diagonal form restricted to its
/// numerically nonzero spectrum.
pub fn sigma_min_nonzero(a: &DenseTensor3, tol: f64) -> Result<f64> {
    let pool = pooled_singular_values(a);
    let sigma_max = pool.iter().fold(0.0f64, |m, &v| m.max(v));
    if sigma_max == 0.0 {
        return Err(Error::InvalidArgument(
            "zero tensor has no nonzero singular values".into(),
        ));
    }
    let cut = tol * sigma_max;
    Ok(pool
        .into_iter()
        .filter(|&v| v > cut)
        .fold(f64::INFINITY, f64::min))
}

/// Default relative cutoff separating zero from nonzero singular values:
/// `max(n1, n2) * eps` relative to the pooled largest singular value.
pub fn default_sigma_tol(dims: Dims3) -> f64 {
    dims.0.max(dims.1) as f64 * f64::EPSILON
}

/// Condition number: largest over smallest nonzero pooled singular value.
pub fn condition_number(a: &DenseTensor3) -> Result<f64> {
    condition_number_with_tol(a, default_sigma_tol(a.dims()))
}

/// [`condition_number`] with an explicit relative cutoff for "nonzero".
pub fn condition_number_with_tol(a: &DenseTensor3, tol: f64) -> Result<f64> {
    let pool = pooled_singular_values(a);
    let sigma_max = pool.iter().fold(0.0f64, |m, &v| m.max(v));
    if sigma_max == 0.0 {
        return Err(Error::InvalidArgument(
            "condition number of the zero tensor is undefined".into(),
        ));
    }
    let cut = tol * sigma_max;
    let sigma_min = pool
        .into_iter()
        .filter(|&v| v > cut)
        .fold(f64::INFINITY, f64::min);
    Ok(sigma_max / sigma_min)
}
