//! Reference implementations and fixtures used to cross-check the fast paths.
//!
//! Everything here goes through the explicit `dct_matrix` and dense matrix
//! arithmetic only — no FFT path, no shared factorization code — so tests can
//! compare two genuinely independent routes. These routines are O(n^2) per
//! tube and materialize full factors; they are meant for small instances.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::svd::MultiRank;
use crate::tensor::{DenseTensor3, Dims3};
use crate::transform::dct_matrix;

/// Tube-by-tube DCT using the explicit transform matrix.
pub fn dct3_reference(a: &DenseTensor3) -> DenseTensor3 {
    transform_reference(a, false)
}

/// Tube-by-tube inverse DCT using the transpose of the transform matrix.
pub fn idct3_reference(a: &DenseTensor3) -> DenseTensor3 {
    transform_reference(a, true)
}

fn transform_reference(a: &DenseTensor3, inverse: bool) -> DenseTensor3 {
    let (n1, n2, n3) = a.dims();
    let c = dct_matrix(n3);
    let mut out = DenseTensor3::zeros(n1, n2, n3);
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n3 {
                let mut acc = 0.0;
                for t in 0..n3 {
                    let coeff = if inverse { c[(t, k)] } else { c[(k, t)] };
                    acc += coeff * a.get(i, j, t);
                }
                out.set(i, j, k, acc);
            }
        }
    }
    out
}

/// The full block diagonal matrix `blockdiag(dct3(a))` of size
/// `n1*n3 x n2*n3`, materialized.
pub fn block_diagonal(a: &DenseTensor3) -> DMatrix<f64> {
    let (n1, n2, n3) = a.dims();
    let ahat = dct3_reference(a);
    let mut m = DMatrix::zeros(n1 * n3, n2 * n3);
    for k in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                m[(k * n1 + i, k * n2 + j)] = ahat.get(i, j, k);
            }
        }
    }
    m
}

/// Refolds a block diagonal matrix into a tensor and inverse-transforms it.
pub fn fold_block_diagonal(m: &DMatrix<f64>, dims: Dims3) -> DenseTensor3 {
    let (n1, n2, _) = dims;
    let hat = DenseTensor3::from_fn(dims, |i, j, k| m[(k * n1 + i, k * n2 + j)]);
    idct3_reference(&hat)
}

/// t_c-product by brute force: transform, multiply full block diagonal
/// matrices, refold, inverse-transform.
pub fn tprod_reference(a: &DenseTensor3, b: &DenseTensor3) -> DenseTensor3 {
    let (n1, _, n3) = a.dims();
    let (_, n4, _) = b.dims();
    let prod = block_diagonal(a) * block_diagonal(b);
    fold_block_diagonal(&prod, (n1, n4, n3))
}

/// Tensor transpose by brute force on the block diagonal matrix.
pub fn ttranspose_reference(a: &DenseTensor3) -> DenseTensor3 {
    let (n1, n2, n3) = a.dims();
    let t = block_diagonal(a).transpose();
    // The transpose of a block diagonal matrix built on n1 x n2 blocks is
    // block diagonal on n2 x n1 blocks.
    fold_block_diagonal(&t, (n2, n1, n3))
}

/// Per-slice singular values of the matrix-path transform slices, descending.
///
/// Uses the one-sided Jacobi kernel, independent of the implicit-shift SVD
/// the implementation prefers.
pub fn slice_singular_values(a: &DenseTensor3) -> Vec<Vec<f64>> {
    let (n1, n2, n3) = a.dims();
    let ahat = dct3_reference(a);
    (0..n3)
        .map(|k| {
            let m = DMatrix::from_column_slice(n1, n2, ahat.frontal_slice(k));
            crate::jacobi::jacobi_svd(&m).1
        })
        .collect()
}

/// Eckart–Young truncation done independently per transform slice.
pub fn truncate_reference(a: &DenseTensor3, ranks: &[usize]) -> DenseTensor3 {
    let (n1, n2, n3) = a.dims();
    assert_eq!(ranks.len(), n3);
    let ahat = dct3_reference(a);
    let mut out_hat = DenseTensor3::zeros(n1, n2, n3);
    for k in 0..n3 {
        let m = DMatrix::from_column_slice(n1, n2, ahat.frontal_slice(k));
        let (u, s, v) = crate::jacobi::jacobi_svd(&m);
        let mut acc = DMatrix::<f64>::zeros(n1, n2);
        for c in 0..ranks[k].min(s.len()) {
            if s[c] > 0.0 {
                acc += s[c] * u.column(c) * v.column(c).transpose();
            }
        }
        for j in 0..n2 {
            for i in 0..n1 {
                out_hat.set(i, j, k, acc[(i, j)]);
            }
        }
    }
    idct3_reference(&out_hat)
}

/// Standard-normal tensor from a seeded, named generator (ChaCha8), filled
/// in storage order.
pub fn gaussian_tensor(dims: Dims3, seed: u64) -> DenseTensor3 {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (n1, n2, n3) = dims;
    let data = (0..n1 * n2 * n3)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    DenseTensor3::from_vec(dims, data).expect("length matches dims")
}

/// A tensor of exact multi-rank `r` with singular values drawn uniformly
/// from `[sigma_lo, sigma_hi]` on every kept triplet, built directly in the
/// transform domain from QR-orthonormalized Gaussian factors.
pub fn controlled_spectrum_tensor(
    dims: Dims3,
    r: &MultiRank,
    sigma_lo: f64,
    sigma_hi: f64,
    seed: u64,
) -> DenseTensor3 {
    let (n1, n2, n3) = dims;
    assert_eq!(r.len(), n3);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    fn gauss(rng: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }
    let mut hat = DenseTensor3::zeros(n1, n2, n3);
    for k in 0..n3 {
        let rk = r.ranks()[k];
        if rk == 0 {
            continue;
        }
        let q_u = gauss(&mut rng, n1, rk).qr().q();
        let q_v = gauss(&mut rng, n2, rk).qr().q();
        let mut sv: Vec<f64> = (0..rk)
            .map(|_| {
                let t: f64 = rand::Rng::random(&mut rng);
                sigma_lo + t * (sigma_hi - sigma_lo)
            })
            .collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut acc = DMatrix::<f64>::zeros(n1, n2);
        for c in 0..rk {
            acc += sv[c] * q_u.column(c) * q_v.column(c).transpose();
        }
        for j in 0..n2 {
            for i in 0..n1 {
                hat.set(i, j, k, acc[(i, j)]);
            }
        }
    }
    idct3_reference(&hat)
}
