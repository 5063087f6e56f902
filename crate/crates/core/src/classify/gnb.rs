//! Gaussian naive Bayes.

use super::logistic::sigmoid;

/// Variances are inflated by this fraction of the largest feature variance.
pub const VAR_SMOOTHING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    /// Per-class feature means, indexed by label.
    pub means: [Vec<f64>; 2],
    /// Per-class smoothed feature variances, indexed by label.
    pub variances: [Vec<f64>; 2],
    pub log_priors: [f64; 2],
}

fn moments<R: AsRef<[f64]>>(rows: &[&R], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r.as_ref()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((v, x), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    (mean, var)
}

/// Both labels must be present.
pub fn fit_gnb<R: AsRef<[f64]>>(rows: &[R], labels: &[u8]) -> GaussianNb {
    let dim = rows.first().map_or(0, |r| r.as_ref().len());
    let all: Vec<&R> = rows.iter().collect();
    let (_, total_var) = moments(&all, dim);
    let max_var = total_var.iter().copied().fold(0.0, f64::max);
    // All-constant features would otherwise get a zero floor.
    let floor = VAR_SMOOTHING * if max_var > 0.0 { max_var } else { 1.0 };

    let fit_class = |label: u8| {
        let members: Vec<&R> = rows.iter().zip(labels).filter(|(_, &l)| l == label).map(|(r, _)| r).collect();
        let (mean, mut var) = moments(&members, dim);
        var.iter_mut().for_each(|v| *v += floor);
        (mean, var, members.len())
    };
    let (m0, v0, n0) = fit_class(0);
    let (m1, v1, n1) = fit_class(1);
    let n = (n0 + n1) as f64;
    GaussianNb {
        means: [m0, m1],
        variances: [v0, v1],
        log_priors: [(n0 as f64 / n).ln(), (n1 as f64 / n).ln()],
    }
}

impl GaussianNb {
    fn log_joint(&self, label: usize, x: &[f64]) -> f64 {
        let mut total = self.log_priors[label];
        for ((xi, m), v) in x.iter().zip(&self.means[label]).zip(&self.variances[label]) {
            let diff = xi - m;
            total -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + diff * diff / v);
        }
        total
    }

    /// Posterior of label 1, computed from the log-joint difference so it
    /// never overflows.
    pub fn posterior(&self, x: &[f64]) -> f64 {
        let diff = self.log_joint(1, x) - self.log_joint(0, x);
        if diff.is_nan() {
            // Both log-joints infinite with equal sign; no evidence either way.
            return 0.5;
        }
        sigmoid(diff)
    }
}
