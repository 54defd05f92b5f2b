//! Geometry of the fixed transformed multi-rank manifold.
//!
//! `M_r = { X : rank_t(X) = r }` is an embedded submanifold of the ambient
//! tensor space with dimension `sum_i ((n1 + n2) r_i - r_i^2)`. A point is
//! carried together with its skinny factors; the tangent projector at
//! `X = U * S * V^T` is
//!
//! ```text
//! P_T(A) = U*U^T*A + A*V*V^T - U*U^T*A*V*V^T,
//! ```
//!
//! the retraction is the truncation `H_r(X + xi)`, and tangent vectors are
//! transported between points by plain re-projection.

use nalgebra::DMatrix;

use crate::algebra::TransformSlices;
use crate::error::{Error, Result};
use crate::svd::{tcsvd_truncated_hat, HatFactors, MultiRank, SkinnyTcSvd, DEFAULT_RANK_TOL};
use crate::tensor::{DenseTensor3, Dims3};

/// A manifold point: skinny factors plus the cached ambient tensor.
#[derive(Debug, Clone)]
pub struct TangentPoint {
    /// Skinny factorization of the foot point.
    pub factors: SkinnyTcSvd,
    /// The foot point itself (reconstructed from the factors).
    pub value: DenseTensor3,
    // Transform-domain factor slices, kept to make repeated projections cheap.
    u_hat: Vec<DMatrix<f64>>,
    v_hat: Vec<DMatrix<f64>>,
}

impl TangentPoint {
    /// Wraps an existing factorization.
    pub fn new(factors: SkinnyTcSvd) -> Self {
        Self::from_hat(factors.to_hat())
    }

    /// Factorizes `a` truncated at multi-rank `r` and takes the result as the
    /// foot point.
    pub fn from_tensor(a: &DenseTensor3, r: &MultiRank) -> Result<Self> {
        let (hat, _) = tcsvd_truncated_hat(a, r, DEFAULT_RANK_TOL)?;
        Ok(Self::from_hat(hat))
    }

    pub(crate) fn from_hat(hat: HatFactors) -> Self {
        let value = hat.reconstruct();
        let u_hat = hat.slices.iter().map(|s| s.u.clone()).collect();
        let v_hat = hat.slices.iter().map(|s| s.v.clone()).collect();
        TangentPoint {
            factors: hat.to_skinny(),
            value,
            u_hat,
            v_hat,
        }
    }

    #[inline]
    pub fn dims(&self) -> Dims3 {
        self.value.dims()
    }

    #[inline]
    pub fn multi_rank(&self) -> &MultiRank {
        &self.factors.multi_rank
    }
}

/// Result of a retraction, with the rank-drop flag.
///
/// The manifold is not closed: `H_r` can return a point of strictly smaller
/// multi-rank when a slice runs out of nonzero singular values. That event is
/// flagged, not repaired.
#[derive(Debug, Clone)]
pub struct Retracted {
    pub point: TangentPoint,
    pub rank_drop: bool,
}

/// Orthogonal projection of `a` onto the tangent space at `at`.
pub fn tangent_project(at: &TangentPoint, a: &DenseTensor3) -> Result<DenseTensor3> {
    at.value.same_dims(a, "tangent_project")?;
    let ahat = TransformSlices::from_tensor(a);
    let slices = ahat
        .slices()
        .iter()
        .zip(at.u_hat.iter().zip(&at.v_hat))
        .map(|(m, (u, v))| {
            // U B + (A - U B) V V^T with B = U^T A.
            let b = u.transpose() * m;
            let ub = u * &b;
            let rest = (m - &ub) * v;
            ub + rest * v.transpose()
        })
        .collect();
    Ok(TransformSlices::from_parts(slices).to_tensor())
}

/// Riemannian gradient: the tangent projection of the Euclidean gradient.
pub fn riemannian_gradient(at: &TangentPoint, euclidean_grad: &DenseTensor3) -> Result<DenseTensor3> {
    tangent_project(at, euclidean_grad)
}

/// Retraction by truncation: `H_r(at.value + xi)` with refreshed factors.
pub fn retract(at: &TangentPoint, xi: &DenseTensor3, r: &MultiRank) -> Result<Retracted> {
    at.value.same_dims(xi, "retract")?;
    let moved = &at.value + xi;
    let (hat, rank_drop) = tcsvd_truncated_hat(&moved, r, DEFAULT_RANK_TOL)?;
    Ok(Retracted {
        point: TangentPoint::from_hat(hat),
        rank_drop,
    })
}

/// Projection-based vector transport from `from`'s tangent space to `to`'s.
pub fn vector_transport(
    from: &TangentPoint,
    to: &TangentPoint,
    xi: &DenseTensor3,
) -> Result<DenseTensor3> {
    if from.dims() != to.dims() {
        return Err(Error::shape("vector_transport", from.dims(), to.dims()));
    }
    tangent_project(to, xi)
}

/// Dimension of `M_r`: `sum_i ((n1 + n2) r_i - r_i^2)`.
pub fn manifold_dim(dims: Dims3, r: &MultiRank) -> usize {
    let (n1, n2, n3) = dims;
    assert_eq!(r.len(), n3, "rank vector length must equal n3");
    r.ranks()
        .iter()
        .map(|&ri| {
            assert!(ri <= n1.min(n2), "rank exceeds min(n1, n2)");
            (n1 + n2) * ri - ri * ri
        })
        .sum()
}
