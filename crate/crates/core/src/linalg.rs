//! Thin singular value decomposition.
//!
//! Householder QR reduces an `m x n` matrix (`m >= n`) to its `n x n`
//! triangular factor, and one-sided Jacobi rotations orthogonalize the columns
//! of that factor. Snapshot matrices here are tall and skinny (`2d x w` with
//! `w <= 8`), so the Jacobi stage is tiny and the QR dominates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// `a = u * diag(singular_values) * v^T` with `k = min(m, n)` components.
/// Singular values are sorted in descending order. Columns of `u` belonging to
/// exactly-zero singular values are zero.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd(a: &DMatrix<f64>) -> Result<Svd> {
    let (m, n) = a.shape();
    if m < n {
        let t = svd(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    if n == 0 {
        return Ok(Svd {
            u: DMatrix::zeros(m, 0),
            singular_values: DVector::zeros(0),
            v: DMatrix::zeros(0, 0),
        });
    }
    let qr = a.clone().qr();
    let q = qr.q();
    let mut w = qr.r();
    let mut v = DMatrix::<f64>::identity(n, n);
    jacobi_orthogonalize(&mut w, &mut v)?;

    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let mut u = DMatrix::zeros(m, n);
    let mut v_sorted = DMatrix::zeros(n, n);
    let mut sigma = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        sigma[dst] = s;
        v_sorted.set_column(dst, &v.column(src));
        if s > 0.0 {
            u.set_column(dst, &(&q * w.column(src) / s));
        }
    }
    Ok(Svd {
        u,
        singular_values: sigma,
        v: v_sorted,
    })
}

/// Rotates column pairs of `w` until they are mutually orthogonal to working
/// precision, applying the same rotations to `v`.
fn jacobi_orthogonalize(w: &mut DMatrix<f64>, v: &mut DMatrix<f64>) -> Result<()> {
    let n = w.ncols();
    let tol = f64::EPSILON * n as f64;
    // Columns this small are zero to working precision; rotating them against
    // each other only shuffles rounding noise and need not terminate.
    let negligible = (f64::EPSILON * w.norm()).powi(2);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = w.column(i).norm_squared();
                let beta = w.column(j).norm_squared();
                let gamma = w.column(i).dot(&w.column(j));
                if alpha.min(beta) <= negligible
                    || gamma == 0.0
                    || gamma.abs() <= tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(w, i, j, c, s);
                rotate_columns(v, i, j, c, s);
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(Error::Convergence("Jacobi singular value sweep".into()))
}

fn rotate_columns(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let a = m[(r, i)];
        let b = m[(r, j)];
        m[(r, i)] = c * a - s * b;
        m[(r, j)] = s * a + c * b;
    }
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(svd(a)?.singular_values[0])
}
