//! Tensor completion on the fixed transformed multi-rank manifold.
//!
//! A third-order tensor is recovered from a multiset of sampled entries by
//! conjugate gradient descent restricted to the manifold of tensors whose
//! DCT-domain frontal slices have prescribed ranks. The crate provides the
//! underlying t_c-product algebra and t_c-SVD, the manifold geometry
//! (tangent projection, truncation retraction, vector transport), the
//! sampling-with-replacement operator, the restarted CG solver with two
//! initialization schemes, and the benchmark protocols around them.

pub mod algebra;
pub mod diagnostics;
pub mod error;
pub mod experiments;
mod jacobi;
pub mod manifold;
pub mod oracles;
pub mod sampling;
pub mod solver;
pub mod svd;
pub mod tensor;
pub mod transform;

pub use algebra::{
    condition_number, condition_number_with_tol, fro_norm, identity, inf_norm, inner,
    spectral_norm, tprod, ttranspose, TransformSlices,
};
pub use error::{Error, Result};
pub use experiments::{
    gen_synthetic, image_complete, metrics_psnr, metrics_res, run_phase_diagram, PhaseGrid,
    PhaseMGrid, PhaseSpec,
};
pub use manifold::{
    manifold_dim, retract, riemannian_gradient, tangent_project, vector_transport, Retracted,
    TangentPoint,
};
pub use sampling::SamplingSet;
pub use solver::{
    incoherence_mu0, init_hard_threshold, init_resample_trim, joint_mu1, rcg_complete,
    rcg_complete_with_truth, trim, InitScheme, SolverConfig, SolverReport, TraceRow,
};
pub use svd::{multi_rank_of, tcsvd, tcsvd_with_tol, truncate_h_r, MultiRank, SkinnyTcSvd};
pub use tensor::{DenseTensor3, Dims3};
pub use transform::{dct3, dct3_matrix, dct_matrix, idct3, idct3_matrix};

#[cfg(test)]
pub(crate) mod testutil;
