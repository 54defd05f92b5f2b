//! Shared helpers for unit tests.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::sampling::SamplingSet;
use crate::tensor::{DenseTensor3, Dims3};
use crate::transform::dct_matrix;

pub fn random_tensor(dims: Dims3, seed: u64) -> DenseTensor3 {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    DenseTensor3::from_vec(
        dims,
        (0..dims.0 * dims.1 * dims.2)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect(),
    )
    .unwrap()
}

pub fn max_abs_diff(a: &DenseTensor3, b: &DenseTensor3) -> f64 {
    assert_eq!(a.dims(), b.dims());
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Alternating least squares fit of a width-1 factorization to the sampled
/// entries, minimizing the same multiplicity-weighted objective the solver
/// uses. Fully independent of the solver path: works directly on the
/// explicit DCT matrix and small dense normal equations, with random
/// restarts.
pub fn als_fit_rank1(truth: &DenseTensor3, omega: &SamplingSet, sweeps: usize) -> DenseTensor3 {
    let (n1, n2, n3) = truth.dims();
    let c = dct_matrix(n3);
    let obs: Vec<(usize, usize, usize, f64, f64)> = omega
        .counts()
        .iter()
        .map(|(&(i, j, k), &w)| {
            let (i, j, k) = (i as usize, j as usize, k as usize);
            (i, j, k, w as f64, truth.get(i, j, k))
        })
        .collect();

    let model = |a: &DMatrix<f64>, b: &DMatrix<f64>, i: usize, j: usize, k: usize| -> f64 {
        (0..n3).map(|cc| c[(cc, k)] * a[(i, cc)] * b[(j, cc)]).sum()
    };
    let objective = |a: &DMatrix<f64>, b: &DMatrix<f64>| -> f64 {
        obs.iter()
            .map(|&(i, j, k, w, y)| w * (y - model(a, b, i, j, k)).powi(2))
            .sum()
    };

    let mut best: Option<(f64, DMatrix<f64>, DMatrix<f64>)> = None;
    for restart in 0..5u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9000 + restart);
        let mut gauss = |r: usize, cc: usize| {
            DMatrix::from_fn(r, cc, |_, _| StandardNormal.sample(&mut rng))
        };
        // a[(i, c)] holds the transform-slice-c left factor, b likewise.
        let mut a = gauss(n1, n3);
        let mut b = gauss(n2, n3);
        for _ in 0..sweeps {
            // Solve for each row of `a` with `b` fixed.
            for i in 0..n1 {
                let mut lhs = DMatrix::<f64>::zeros(n3, n3);
                let mut rhs = DVector::<f64>::zeros(n3);
                for &(oi, j, k, w, y) in &obs {
                    if oi != i {
                        continue;
                    }
                    let phi = DVector::from_fn(n3, |cc, _| c[(cc, k)] * b[(j, cc)]);
                    lhs += w * &phi * phi.transpose();
                    rhs += w * y * phi;
                }
                if let Some(sol) = lhs.lu().solve(&rhs) {
                    for cc in 0..n3 {
                        a[(i, cc)] = sol[cc];
                    }
                }
            }
            for j in 0..n2 {
                let mut lhs = DMatrix::<f64>::zeros(n3, n3);
                let mut rhs = DVector::<f64>::zeros(n3);
                for &(i, oj, k, w, y) in &obs {
                    if oj != j {
                        continue;
                    }
                    let phi = DVector::from_fn(n3, |cc, _| c[(cc, k)] * a[(i, cc)]);
                    lhs += w * &phi * phi.transpose();
                    rhs += w * y * phi;
                }
                if let Some(sol) = lhs.lu().solve(&rhs) {
                    for cc in 0..n3 {
                        b[(j, cc)] = sol[cc];
                    }
                }
            }
        }
        let score = objective(&a, &b);
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, a, b));
        }
    }
    let (_, a, b) = best.unwrap();
    DenseTensor3::from_fn((n1, n2, n3), |i, j, k| model(&a, &b, i, j, k))
}
