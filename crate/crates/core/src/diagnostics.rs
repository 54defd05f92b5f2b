//! Measurable surrogates for the solver's convergence hypotheses.
//!
//! The theory guarantees linear convergence when the sampling operator is
//! close to an isometry on the tangent space. That closeness is not checked
//! at runtime by the solver; these helpers estimate it after the fact on
//! small instances, mainly for tests.

use crate::algebra::{fro_norm, inner};
use crate::manifold::{tangent_project, TangentPoint};
use crate::oracles::gaussian_tensor;
use crate::sampling::SamplingSet;
use crate::tensor::{DenseTensor3, Dims3};

/// Spectral norm of a self-adjoint operator by power iteration on its square.
pub fn operator_norm_sym(
    dims: Dims3,
    apply: impl Fn(&DenseTensor3) -> DenseTensor3,
    iters: usize,
    seed: u64,
) -> f64 {
    let mut v = gaussian_tensor(dims, seed);
    let n = fro_norm(&v);
    if n == 0.0 {
        return 0.0;
    }
    v = v.scaled(1.0 / n);
    let mut estimate = 0.0;
    for _ in 0..iters {
        // One application of A^2 per step keeps the estimate nonnegative even
        // when the extreme eigenvalue is negative.
        let av = apply(&v);
        let aav = apply(&av);
        let norm = fro_norm(&aav);
        if norm == 0.0 {
            return 0.0;
        }
        estimate = inner(&v, &aav).unwrap_or(0.0).abs().sqrt();
        v = aav.scaled(1.0 / norm);
    }
    estimate
}

/// Estimates `|| P_T - p^{-1} P_T R_Omega P_T ||` at the given foot point.
///
/// This is the epsilon that drives the step-size bounds: small values mean
/// the sampling operator acts like `p * identity` on the tangent space.
pub fn tangent_sampling_gap(at: &TangentPoint, omega: &SamplingSet, iters: usize, seed: u64) -> f64 {
    let p = omega.density();
    operator_norm_sym(
        at.dims(),
        |t| {
            let pt = tangent_project(at, t).expect("dims fixed");
            let rpt = omega.apply_r_omega(&pt).expect("dims fixed");
            let prpt = tangent_project(at, &rpt).expect("dims fixed");
            let mut out = pt;
            out.axpy(-1.0 / p, &prpt);
            out
        },
        iters,
        seed,
    )
}
