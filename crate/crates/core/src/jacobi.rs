//! One-sided Jacobi SVD.
//!
//! The default per-slice kernel is nalgebra's implicit-shift bidiagonal SVD,
//! which is fast but can silently mis-converge on rare inputs (its fixed
//! `5 * eps` deflation threshold is too tight for some matrices). Callers
//! verify the returned triplets with a cheap residual check and fall back to
//! this kernel, which is slower but unconditionally stable: it rotates column
//! pairs of `A` until they are mutually orthogonal, so the factors satisfy
//! `A v_i = sigma_i u_i` to machine precision by construction.

use nalgebra::DMatrix;

/// Maximum number of full sweeps before giving up (never reached in
/// practice; convergence is quadratic once sweeps stop rotating).
const MAX_SWEEPS: usize = 60;

/// Thin SVD `(u, s, v)` with singular values sorted descending.
pub(crate) fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = a.shape();
    if rows < cols {
        let (u, s, v) = jacobi_svd(&a.transpose());
        return (v, s, u);
    }
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    let tol = f64::EPSILON * (rows.max(1) as f64).sqrt();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..rows {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    app += wp * wp;
                    aqq += wq * wq;
                    apq += wp * wq;
                }
                if apq.abs() <= tol * (app * aqq).sqrt() || app == 0.0 || aqq == 0.0 {
                    continue;
                }
                rotated = true;
                // Closed-form Jacobi rotation annihilating the (p, q) Gram entry.
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..cols {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols).map(|c| w.column(c).norm()).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap().then(x.cmp(&y)));

    let mut u = DMatrix::<f64>::zeros(rows, cols);
    let mut s = Vec::with_capacity(cols);
    let mut v_sorted = DMatrix::<f64>::zeros(cols, cols);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        s.push(sigma);
        if sigma > 0.0 {
            u.column_mut(dst).copy_from(&(w.column(src) / sigma));
        }
        v_sorted.column_mut(dst).copy_from(&v.column(src));
    }
    (u, s, v_sorted)
}

/// `true` when `(u, s, v)` reproduces `a` on its dominant triplets:
/// `||a v_c - s_c u_c|| <= tol * s_max` for every kept column.
pub(crate) fn svd_residual_ok(
    a: &DMatrix<f64>,
    u: &DMatrix<f64>,
    s: &[f64],
    v: &DMatrix<f64>,
    tol: f64,
) -> bool {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return a.amax() == 0.0;
    }
    let bound = tol * smax;
    for c in 0..s.len() {
        if s[c] <= f64::EPSILON * smax {
            break;
        }
        let r = a * v.column(c) - s[c] * u.column(c);
        if r.norm() > bound {
            return false;
        }
    }
    true
}
