//! Orthonormal DCT along the third dimension.
//!
//! `dct3`/`idct3` transform every tube `A(i, j, :)` by the orthonormal
//! DCT-II (the MATLAB `dct`/`idct` pair), which makes the tube transform
//! unitary: Frobenius norms and inner products are preserved exactly up to
//! roundoff, and the transform of a real tensor stays real.
//!
//! Two implementations are kept on purpose. The default path runs each tube
//! through a complex FFT in O(n3 log n3) using the even/odd reordering of
//! Makhoul; `dct3_matrix`/`idct3_matrix` multiply the tubes by the explicit
//! `dct_matrix` in O(n3^2) and serve as the reference the fast path is
//! checked against.

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::tensor::DenseTensor3;

/// Below this many entries the tube loop is not worth parallelizing.
const PAR_THRESHOLD: usize = 1 << 15;

/// The orthonormal DCT-II matrix `C` of size `n x n`, with `C * C^T = I`.
///
/// Row 1 is constant `1/sqrt(n)`; row `i > 1` holds
/// `sqrt(2/n) * cos(pi * (2j - 1)(i - 1) / (2n))` (1-based `i`, `j`).
pub fn dct_matrix(n: usize) -> DMatrix<f64> {
    assert!(n >= 1, "dct_matrix requires n >= 1");
    let norm0 = 1.0 / (n as f64).sqrt();
    let norm = (2.0 / n as f64).sqrt();
    DMatrix::from_fn(n, n, |i, j| {
        if i == 0 {
            norm0
        } else {
            norm * (PI * (2 * j + 1) as f64 * i as f64 / (2 * n) as f64).cos()
        }
    })
}

/// Per-length plan for the FFT-based tube transform.
struct TubePlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `exp(-i pi k / (2n))` for k = 0..n.
    twiddle: Vec<Complex<f64>>,
    /// Orthonormal scale per coefficient: `1/sqrt(n)` then `sqrt(2/n)`.
    scale: Vec<f64>,
}

impl TubePlan {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let twiddle = (0..n)
            .map(|k| Complex::from_polar(1.0, -PI * k as f64 / (2 * n) as f64))
            .collect();
        let mut scale = vec![(2.0 / n as f64).sqrt(); n];
        scale[0] = 1.0 / (n as f64).sqrt();
        TubePlan {
            n,
            forward,
            inverse,
            twiddle,
            scale,
        }
    }

    /// Orthonormal DCT-II of one tube, in place.
    ///
    /// Even-indexed samples ascending then odd-indexed descending are fed to
    /// a length-n FFT; coefficient k is `Re(e^{-i pi k/(2n)} V[k])` rescaled.
    fn forward_tube(&self, tube: &mut [f64], buf: &mut [Complex<f64>], scratch: &mut [Complex<f64>]) {
        let n = self.n;
        if n == 1 {
            return;
        }
        let half = n.div_ceil(2);
        for j in 0..half {
            buf[j] = Complex::new(tube[2 * j], 0.0);
        }
        for j in 0..n / 2 {
            buf[n - 1 - j] = Complex::new(tube[2 * j + 1], 0.0);
        }
        self.forward.process_with_scratch(buf, scratch);
        for k in 0..n {
            tube[k] = self.scale[k] * (self.twiddle[k] * buf[k]).re;
        }
    }

    /// Orthonormal DCT-III (inverse of `forward_tube`), in place.
    ///
    /// Rebuilds the complex spectrum from the real coefficients using the
    /// conjugate symmetry `W[n-k] = -i * conj(W[k])` of the forward pass.
    fn inverse_tube(&self, tube: &mut [f64], buf: &mut [Complex<f64>], scratch: &mut [Complex<f64>]) {
        let n = self.n;
        if n == 1 {
            return;
        }
        buf[0] = Complex::new(tube[0] / self.scale[0], 0.0);
        for k in 1..n {
            let w = Complex::new(tube[k] / self.scale[k], -tube[n - k] / self.scale[n - k]);
            buf[k] = self.twiddle[k].conj() * w;
        }
        self.inverse.process_with_scratch(buf, scratch);
        let inv_n = 1.0 / n as f64;
        let half = n.div_ceil(2);
        for j in 0..half {
            tube[2 * j] = buf[j].re * inv_n;
        }
        for j in 0..n / 2 {
            tube[2 * j + 1] = buf[n - 1 - j].re * inv_n;
        }
    }
}

fn transform_tubes(a: &DenseTensor3, inverse: bool) -> DenseTensor3 {
    let (n1, n2, n3) = a.dims();
    if n3 == 1 {
        return a.clone();
    }
    let plan = TubePlan::new(n3);
    let tubes = n1 * n2;

    // Gather tubes contiguously: tube t occupies gathered[t*n3..(t+1)*n3].
    let src = a.as_slice();
    let mut gathered = vec![0.0f64; tubes * n3];
    for t in 0..tubes {
        for k in 0..n3 {
            gathered[t * n3 + k] = src[t + k * tubes];
        }
    }

    let run = |tube: &mut [f64], buf: &mut Vec<Complex<f64>>, scratch: &mut Vec<Complex<f64>>| {
        if inverse {
            plan.inverse_tube(tube, buf, scratch);
        } else {
            plan.forward_tube(tube, buf, scratch);
        }
    };

    let scratch_len = plan
        .forward
        .get_inplace_scratch_len()
        .max(plan.inverse.get_inplace_scratch_len());
    if a.len() >= PAR_THRESHOLD {
        gathered.par_chunks_mut(n3).for_each_init(
            || (vec![Complex::default(); n3], vec![Complex::default(); scratch_len]),
            |(buf, scratch), tube| run(tube, buf, scratch),
        );
    } else {
        let mut buf = vec![Complex::default(); n3];
        let mut scratch = vec![Complex::default(); scratch_len];
        for tube in gathered.chunks_mut(n3) {
            run(tube, &mut buf, &mut scratch);
        }
    }

    let mut out = DenseTensor3::zeros(n1, n2, n3);
    let dst = out.as_mut_slice();
    for t in 0..tubes {
        for k in 0..n3 {
            dst[t + k * tubes] = gathered[t * n3 + k];
        }
    }
    out
}

/// Orthonormal DCT-II of every tube `a(i, j, :)`.
pub fn dct3(a: &DenseTensor3) -> DenseTensor3 {
    transform_tubes(a, false)
}

/// Inverse of [`dct3`]: `idct3(dct3(a)) = a` up to roundoff.
pub fn idct3(ahat: &DenseTensor3) -> DenseTensor3 {
    transform_tubes(ahat, true)
}

fn transform_tubes_matrix(a: &DenseTensor3, inverse: bool) -> DenseTensor3 {
    let (n1, n2, n3) = a.dims();
    // Viewed as an (n1*n2) x n3 column-major matrix, each row is a tube, so
    // the transform of all tubes is a single product with C^T (or C).
    let m = DMatrix::from_column_slice(n1 * n2, n3, a.as_slice());
    let c = dct_matrix(n3);
    let out = if inverse { m * c } else { m * c.transpose() };
    DenseTensor3::from_vec((n1, n2, n3), out.as_slice().to_vec()).expect("shape preserved")
}

/// O(n3^2) reference implementation of [`dct3`] via `dct_matrix`.
pub fn dct3_matrix(a: &DenseTensor3) -> DenseTensor3 {
    transform_tubes_matrix(a, false)
}

/// O(n3^2) reference implementation of [`idct3`] via `dct_matrix`.
pub fn idct3_matrix(ahat: &DenseTensor3) -> DenseTensor3 {
    transform_tubes_matrix(ahat, true)
}
