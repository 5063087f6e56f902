//! L2-regularized logistic regression by damped Newton iterations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Stop once the gradient norm falls below this.
pub const GRADIENT_TOL: f64 = 1e-6;
const MAX_NEWTON_STEPS: usize = 200;
const MAX_BACKTRACKS: usize = 60;
const ARMIJO_C: f64 = 1e-4;
const DECREMENT_ULPS: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Objective value at the start and after every accepted step.
    pub loss_history: Vec<f64>,
    pub gradient_norm: f64,
}

/// `log(1 + exp(z))` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct Problem<'a, R> {
    rows: &'a [R],
    labels: &'a [u8],
    l2: f64,
    dim: usize,
}

impl<R: AsRef<[f64]>> Problem<'_, R> {
    fn score(&self, theta: &DVector<f64>, row: &[f64]) -> f64 {
        let mut z = theta[self.dim];
        for (w, x) in theta.iter().zip(row) {
            z += w * x;
        }
        z
    }

    /// Negative log-likelihood plus `l2 / 2 * |w|^2`; the bias is not penalized.
    fn loss(&self, theta: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for (row, &y) in self.rows.iter().zip(self.labels) {
            let z = self.score(theta, row.as_ref());
            total += softplus(z) - f64::from(y) * z;
        }
        let w2: f64 = theta.rows(0, self.dim).norm_squared();
        total + 0.5 * self.l2 * w2
    }

    fn gradient_hessian(&self, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim + 1;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        let mut xa = DVector::zeros(n);
        for (row, &y) in self.rows.iter().zip(self.labels) {
            let row = row.as_ref();
            xa.rows_mut(0, self.dim).copy_from_slice(row);
            xa[self.dim] = 1.0;
            let p = sigmoid(self.score(theta, row));
            g.axpy(p - f64::from(y), &xa, 1.0);
            h.ger(p * (1.0 - p), &xa, &xa, 1.0);
        }
        for j in 0..self.dim {
            g[j] += self.l2 * theta[j];
            h[(j, j)] += self.l2;
        }
        (g, h)
    }
}

/// Minimizes the regularized logistic loss until the gradient norm is below
/// [`GRADIENT_TOL`] or the Newton decrement is lost in the rounding of the
/// loss. Each accepted step satisfies the Armijo condition, so
/// the recorded loss never increases.
pub fn fit_logistic<R: AsRef<[f64]>>(rows: &[R], labels: &[u8], l2: f64) -> Result<LogisticFit> {
    let dim = rows.first().map_or(0, |r| r.as_ref().len());
    let problem = Problem { rows, labels, l2, dim };
    let mut theta = DVector::zeros(dim + 1);
    let mut loss = problem.loss(&theta);
    let mut history = vec![loss];
    for _ in 0..MAX_NEWTON_STEPS {
        let (g, h) = problem.gradient_hessian(&theta);
        let gnorm = g.norm();
        let done = |theta: &DVector<f64>, history: Vec<f64>| LogisticFit {
            weights: theta.as_slice()[..dim].to_vec(),
            bias: theta[dim],
            loss_history: history,
            gradient_norm: gnorm,
        };
        if gnorm < GRADIENT_TOL {
            return Ok(done(&theta, history));
        }
        let step = newton_direction(h, &g);
        let slope = g.dot(&step);
        // The Newton decrement bounds the remaining reduction; once it is
        // below the rounding of the loss sum no step can be resolved.
        if slope <= DECREMENT_ULPS * f64::EPSILON * loss.abs().max(1.0) {
            return Ok(done(&theta, history));
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let candidate = &theta - &step * t;
            let next = problem.loss(&candidate);
            if next <= loss - ARMIJO_C * t * slope {
                theta = candidate;
                loss = next;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Near the optimum the Armijo decrease can fall below the
            // rounding of the loss itself; a full step that does not raise
            // the loss is still progress on the gradient.
            let candidate = &theta - &step;
            let next = problem.loss(&candidate);
            if next <= loss {
                theta = candidate;
                loss = next;
                accepted = true;
            }
        }
        if !accepted {
            return Err(Error::Convergence(format!(
                "logistic line search stalled at gradient norm {gnorm:.3e}"
            )));
        }
        history.push(loss);
    }
    Err(Error::Convergence(format!(
        "logistic regression did not reach gradient norm {GRADIENT_TOL} in {MAX_NEWTON_STEPS} steps"
    )))
}

/// Solves `H d = g`. The Hessian is positive definite in exact arithmetic but
/// the bias block can become numerically singular when every probability
/// saturates, so fall back to a small ridge.
fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = h.clone().cholesky() {
        return chol.solve(g);
    }
    let n = h.nrows();
    let mut ridge = 1e-10 * h.diagonal().amax().max(1.0);
    loop {
        let damped = &h + DMatrix::identity(n, n) * ridge;
        if let Some(chol) = damped.cholesky() {
            return chol.solve(g);
        }
        ridge *= 10.0;
    }
}
