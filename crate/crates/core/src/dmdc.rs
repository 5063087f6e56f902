//! Windowed dynamic mode decomposition with control.
//!
//! Each window is modelled as `Y_next = A Y_past + B X_in`. The least-squares
//! solution `[A B] = Y_next [Y_past; X_in]^+` is kept in factored form: with
//! `G = [Y_past; X_in]^+` split column-wise into `G_Y` and `G_X` (each `w x d`),
//! `A = Y_next G_Y` and `B = Y_next G_X`. Because the nonzero eigenvalues of
//! `PQ` and `QP` coincide, the spectra of the `d x d` operators are read off
//! the `w x w` products `G_Y Y_next` and `G_X Y_next`, which is what makes
//! 768-dimensional embeddings cheap.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{linalg::Schur, Complex, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Window;
use crate::error::{Error, Result};
use crate::linalg;

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues at or below this multiple of the largest singular value of
/// `Y_next` are counted as zero.
pub const ZERO_EIGENVALUE_RTOL: f64 = 1e-10;

/// Fits whose retained singular values span more than this ratio are
/// flagged as degenerate.
pub const DEGENERATE_CONDITION: f64 = 1e8;

/// Result of a truncated-SVD pseudo-inverse.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    /// Largest over smallest retained singular value (1 for rank 0).
    pub condition: f64,
}

/// Default relative singular-value cutoff for an `m x n` matrix.
pub fn default_rcond(m: usize, n: usize) -> f64 {
    f64::EPSILON * m.max(n) as f64
}

/// Moore-Penrose pseudo-inverse by SVD. Singular values at or below
/// `rcond * sigma_max` are treated as zero; `None` selects [`default_rcond`].
pub fn pseudo_inverse(m: &DMatrix<f64>, rcond: Option<f64>) -> Result<DMatrix<f64>> {
    pseudo_inverse_with_rank(m, rcond).map(|p| p.matrix)
}

pub fn pseudo_inverse_with_rank(m: &DMatrix<f64>, rcond: Option<f64>) -> Result<PseudoInverse> {
    let (rows, cols) = m.shape();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(
            "pseudo-inverse input has non-finite entries".into(),
        ));
    }
    let rcond = rcond.unwrap_or_else(|| default_rcond(rows, cols));
    if rcond.is_nan() || rcond < 0.0 {
        return Err(Error::Validation(format!("invalid cutoff {rcond}")));
    }
    if rows == 0 || cols == 0 {
        return Ok(PseudoInverse {
            matrix: DMatrix::zeros(cols, rows),
            rank: 0,
            condition: 1.0,
        });
    }
    let svd = linalg::svd(m)?;
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = rcond * sigma_max;

    let mut matrix = DMatrix::zeros(cols, rows);
    let mut rank = 0;
    let mut sigma_min = f64::INFINITY;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            sigma_min = sigma_min.min(s);
            // rank-one update v_i u_i^T / s_i
            matrix.ger(1.0 / s, &svd.v.column(i), &svd.u.column(i), 1.0);
        }
    }
    let condition = if rank == 0 { 1.0 } else { sigma_max / sigma_min };
    Ok(PseudoInverse {
        matrix,
        rank,
        condition,
    })
}

/// Identifies the window a fit came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowRef {
    pub session_id: String,
    pub t: usize,
    pub w: usize,
}

impl fmt::Display for WindowRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, t={}, w={})", self.session_id, self.t, self.w)
    }
}

/// Least-squares `(A, B)` for one window, in factored form.
#[derive(Debug, Clone)]
pub struct DynamicsFit {
    pub window: WindowRef,
    /// `w x d` block of the pseudo-inverse acting on `Y_past`.
    pub g_y: DMatrix<f64>,
    /// `w x d` block of the pseudo-inverse acting on `X_in`.
    pub g_x: DMatrix<f64>,
    pub y_next: DMatrix<f64>,
    /// Effective rank of the stacked snapshot matrix.
    pub rank: usize,
    /// Frobenius norm of `Y_next - [A B][Y_past; X_in]`.
    pub residual: f64,
    /// Condition number of the retained part of the snapshot matrix.
    pub condition: f64,
    /// Largest singular value of `Y_next`; sets the zero-eigenvalue scale.
    pub y_next_norm: f64,
}

impl DynamicsFit {
    /// Rank-zero windows and numerically ill-conditioned snapshot matrices.
    pub fn is_degenerate(&self) -> bool {
        self.rank == 0 || self.condition > DEGENERATE_CONDITION
    }

    pub fn dim(&self) -> usize {
        self.y_next.nrows()
    }

    /// Materializes the `d x d` transition matrix. Testing and diagnostics only.
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        &self.y_next * &self.g_y
    }

    /// Materializes the `d x d` controller matrix. Testing and diagnostics only.
    pub fn control_matrix(&self) -> DMatrix<f64> {
        &self.y_next * &self.g_x
    }

    pub fn zero_tolerance(&self) -> f64 {
        ZERO_EIGENVALUE_RTOL * self.y_next_norm
    }
}

/// Fits `[A B] = Y_next [Y_past; X_in]^+` for one window.
pub fn fit_window(window: &Window, rcond: Option<f64>) -> Result<DynamicsFit> {
    let (d, w) = window.y_past.shape();
    if w < 2 {
        return Err(Error::Precondition(format!("window size {w} < 2")));
    }
    if window.x_in.shape() != (d, w) || window.y_next.shape() != (d, w) {
        return Err(Error::DimensionMismatch {
            location: format!("window ({}, t={})", window.session_id, window.t),
            expected: d,
            found: window.x_in.nrows().max(window.y_next.nrows()),
        });
    }
    let window_ref = WindowRef {
        session_id: window.session_id.clone(),
        t: window.t,
        w,
    };
    let numerical = |message: String| Error::Numerical {
        session_id: window_ref.session_id.clone(),
        t: window_ref.t,
        w,
        message,
    };
    if window.y_next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(format!(
            "window {window_ref} has non-finite entries"
        )));
    }

    let mut stacked = DMatrix::zeros(2 * d, w);
    stacked.rows_mut(0, d).copy_from(&window.y_past);
    stacked.rows_mut(d, d).copy_from(&window.x_in);
    let pinv = pseudo_inverse_with_rank(&stacked, rcond).map_err(|e| match e {
        Error::Convergence(m) => numerical(format!("{m} did not converge")),
        other => other,
    })?;
    let g_y = pinv.matrix.columns(0, d).into_owned();
    let g_x = pinv.matrix.columns(d, d).into_owned();

    // [A B] Z = Y_next G Z, so the residual only needs the w x w projector G Z.
    let projector = &g_y * &window.y_past + &g_x * &window.x_in;
    let mut complement = -projector;
    for i in 0..w {
        complement[(i, i)] += 1.0;
    }
    let residual = (&window.y_next * complement).norm();

    let y_next_norm = linalg::spectral_norm(&window.y_next).map_err(|e| numerical(e.to_string()))?;
    Ok(DynamicsFit {
        window: window_ref,
        g_y,
        g_x,
        y_next: window.y_next.clone(),
        rank: pinv.rank,
        residual,
        condition: pinv.condition,
        y_next_norm,
    })
}

/// Transition and controller eigenvalues of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    pub window: WindowRef,
    /// Nonzero transition eigenvalues in dominance order, zero padded to
    /// `min(d, w)`.
    pub lambda_t: Vec<Complex<f64>>,
    pub lambda_c: Vec<Complex<f64>>,
    pub nonzero_t: usize,
    pub nonzero_c: usize,
    pub degenerate: bool,
}

/// Eigenvalues of `A` and `B` via the `w x w` products `G_Y Y_next` and
/// `G_X Y_next`.
pub fn eigenvalues(fit: &DynamicsFit) -> Result<ModeSpectrum> {
    let len = fit.dim().min(fit.window.w);
    let tol = fit.zero_tolerance();
    let spectrum = |g: &DMatrix<f64>, which: &str| -> Result<(Vec<Complex<f64>>, usize)> {
        let product = g * &fit.y_next;
        let raw = small_eigenvalues(product).ok_or_else(|| Error::Numerical {
            session_id: fit.window.session_id.clone(),
            t: fit.window.t,
            w: fit.window.w,
            message: format!("{which} eigenvalue iteration did not converge"),
        })?;
        let mut kept: Vec<Complex<f64>> = raw.into_iter().filter(|z| z.norm() > tol).collect();
        sort_dominant(&mut kept);
        kept.truncate(len);
        let nonzero = kept.len();
        kept.resize(len, Complex::new(0.0, 0.0));
        Ok((kept, nonzero))
    };
    let (lambda_t, nonzero_t) = spectrum(&fit.g_y, "transition")?;
    let (lambda_c, nonzero_c) = spectrum(&fit.g_x, "controller")?;
    Ok(ModeSpectrum {
        window: fit.window.clone(),
        lambda_t,
        lambda_c,
        nonzero_t,
        nonzero_c,
        degenerate: fit.is_degenerate(),
    })
}

fn small_eigenvalues(m: DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    if m.is_empty() {
        return Some(Vec::new());
    }
    if m.iter().all(|&v| v == 0.0) {
        return Some(vec![Complex::new(0.0, 0.0); m.nrows()]);
    }
    let schur = Schur::try_new(m, f64::EPSILON, SCHUR_MAX_ITER)?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

/// All eigenvalues of a dense square matrix. Used as a reference route.
pub fn dense_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if !m.is_square() {
        return Err(Error::Validation("eigenvalues need a square matrix".into()));
    }
    small_eigenvalues(m.clone()).ok_or_else(|| Error::Convergence("Schur iteration".into()))
}

/// Argument in `(-pi, pi]`, with signed zeros folded to `+0`.
pub fn principal_angle(z: Complex<f64>) -> f64 {
    let a = z.im.atan2(z.re);
    if a <= -PI {
        PI
    } else {
        a + 0.0
    }
}

fn dominance_order(a: &(usize, Complex<f64>), b: &(usize, Complex<f64>)) -> Ordering {
    b.1.norm()
        .total_cmp(&a.1.norm())
        .then_with(|| principal_angle(a.1).total_cmp(&principal_angle(b.1)))
        .then_with(|| a.0.cmp(&b.0))
}

/// Sorts by magnitude descending, then angle ascending, then original index.
pub fn sort_dominant(values: &mut Vec<Complex<f64>>) {
    let mut indexed: Vec<(usize, Complex<f64>)> = values.iter().copied().enumerate().collect();
    indexed.sort_by(dominance_order);
    *values = indexed.into_iter().map(|(_, z)| z).collect();
}

/// The `n_lambda` most dominant eigenvalues as `(magnitude, angle)`,
/// padded with `(0, 0)`.
pub fn select_dominant(spectrum: &[Complex<f64>], n_lambda: usize) -> Vec<(f64, f64)> {
    let mut sorted = spectrum.to_vec();
    sort_dominant(&mut sorted);
    let mut out: Vec<(f64, f64)> = sorted
        .into_iter()
        .take(n_lambda)
        .map(|z| {
            if z.norm() == 0.0 {
                (0.0, 0.0)
            } else {
                (z.norm(), principal_angle(z))
            }
        })
        .collect();
    out.resize(n_lambda, (0.0, 0.0));
    out
}

/// Which eigenvalue sets feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputType {
    #[serde(rename = "T")]
    Transition,
    #[serde(rename = "C")]
    Controller,
    #[serde(rename = "T+C")]
    Combined,
}

impl InputType {
    pub const ALL: [InputType; 3] = [
        InputType::Transition,
        InputType::Controller,
        InputType::Combined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InputType::Transition => "T",
            InputType::Controller => "C",
            InputType::Combined => "T+C",
        }
    }

    /// Feature length for `n_lambda` modes per matrix.
    pub fn feature_len(self, n_lambda: usize) -> usize {
        match self {
            InputType::Combined => 4 * n_lambda,
            _ => 2 * n_lambda,
        }
    }
}

impl fmt::Display for InputType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "T" => Ok(InputType::Transition),
            "C" => Ok(InputType::Controller),
            "T+C" | "TC" => Ok(InputType::Combined),
            other => Err(Error::Validation(format!("unknown input type '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub input_type: InputType,
    pub n_lambda: usize,
}

pub fn build_features(modes: &ModeSpectrum, input_type: InputType, n_lambda: usize) -> FeatureVector {
    let blocks: &[&[Complex<f64>]] = match input_type {
        InputType::Transition => &[&modes.lambda_t],
        InputType::Controller => &[&modes.lambda_c],
        InputType::Combined => &[&modes.lambda_t, &modes.lambda_c],
    };
    let mut values = Vec::with_capacity(input_type.feature_len(n_lambda));
    for block in blocks {
        for (mag, angle) in select_dominant(block, n_lambda) {
            values.push(mag);
            values.push(angle);
        }
    }
    FeatureVector {
        values,
        input_type,
        n_lambda,
    }
}

/// Fit plus spectrum for one window.
pub fn analyze_window(window: &Window, rcond: Option<f64>) -> Result<ModeSpectrum> {
    fit_window(window, rcond).and_then(|fit| eigenvalues(&fit))
}

/// Spectra for many windows, in input order. Each window is independent so
/// the result does not depend on the worker count.
pub fn analyze_windows(windows: &[Window], rcond: Option<f64>) -> Result<Vec<ModeSpectrum>> {
    windows
        .par_iter()
        .map(|w| analyze_window(w, rcond))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn window(y_past: DMatrix<f64>, x_in: DMatrix<f64>, y_next: DMatrix<f64>) -> Window {
        Window {
            session_id: "s".into(),
            t: 0,
            w: y_past.ncols(),
            y_past,
            x_in,
            y_next,
        }
    }

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn pinv_identity() {
        let eye = DMatrix::<f64>::identity(3, 3);
        assert_eq!(pseudo_inverse(&eye, None).unwrap(), eye);
    }

    #[test]
    fn pinv_zero() {
        let z = DMatrix::<f64>::zeros(4, 2);
        let p = pseudo_inverse_with_rank(&z, None).unwrap();
        assert_eq!(p.matrix, DMatrix::zeros(2, 4));
        assert_eq!(p.rank, 0);
    }

    #[test]
    fn pinv_rank_one_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let p = pseudo_inverse_with_rank(&m, None).unwrap();
        assert_eq!(p.rank, 1);
        assert_abs_diff_eq!(p.matrix, m, epsilon = 1e-15);
    }

    #[test]
    fn pinv_rejects_nan() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(matches!(pseudo_inverse(&m, None), Err(Error::Validation(_))));
    }

    #[test]
    fn pinv_cutoff_drops_small_singular_values() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-6]);
        assert_eq!(pseudo_inverse_with_rank(&m, Some(1e-3)).unwrap().rank, 1);
        assert_eq!(pseudo_inverse_with_rank(&m, None).unwrap().rank, 2);
    }

    #[test]
    fn constant_e1_window() {
        // Z = [e1 1^T; 0] is rank one with Z^+ = [1 e1^T / w, 0], so
        // A = Y_next Z^+_Y = e1 e1^T and B = 0 exactly.
        let (d, w) = (3, 4);
        let mut y = DMatrix::zeros(d, w);
        y.row_mut(0).fill(1.0);
        let fit = fit_window(&window(y.clone(), DMatrix::zeros(d, w), y), None).unwrap();
        let mut e1e1 = DMatrix::zeros(d, d);
        e1e1[(0, 0)] = 1.0;
        assert_eq!(fit.rank, 1);
        assert_abs_diff_eq!(fit.transition_matrix(), e1e1, epsilon = 1e-14);
        assert_eq!(fit.control_matrix(), DMatrix::zeros(d, d));
        assert_abs_diff_eq!(fit.residual, 0.0, epsilon = 1e-14);

        let spec = eigenvalues(&fit).unwrap();
        assert_eq!(spec.lambda_t.len(), 3);
        assert_abs_diff_eq!(spec.lambda_t[0].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(spec.lambda_t[0].im, 0.0, epsilon = 1e-14);
        assert!(spec.lambda_t[1..].iter().all(|z| z.norm() == 0.0));
        assert!(spec.lambda_c.iter().all(|z| z.norm() == 0.0));
        assert_eq!((spec.nonzero_t, spec.nonzero_c), (1, 0));
    }

    #[test]
    fn geometric_decay_window() {
        let v = [0.6, -0.8, 0.0];
        let w = 5;
        let col = |t: usize| 0.5f64.powi(t as i32);
        let y_past = DMatrix::from_fn(3, w, |i, j| v[i] * col(j));
        let y_next = DMatrix::from_fn(3, w, |i, j| v[i] * col(j + 1));
        let fit = fit_window(&window(y_past, DMatrix::zeros(3, w), y_next), None).unwrap();
        assert_abs_diff_eq!(fit.residual, 0.0, epsilon = 1e-14);
        let spec = eigenvalues(&fit).unwrap();
        assert_eq!(spec.nonzero_t, 1);
        assert_abs_diff_eq!(spec.lambda_t[0].re, 0.5, epsilon = 1e-13);
    }

    #[test]
    fn zero_window() {
        let z = DMatrix::zeros(4, 3);
        let fit = fit_window(&window(z.clone(), z.clone(), z), None).unwrap();
        assert_eq!(fit.rank, 0);
        assert_eq!(fit.residual, 0.0);
        assert!(fit.is_degenerate());
        let spec = eigenvalues(&fit).unwrap();
        assert_eq!((spec.nonzero_t, spec.nonzero_c), (0, 0));
        assert!(spec.lambda_t.iter().chain(&spec.lambda_c).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn diagonal_product_spectrum() {
        let fit = DynamicsFit {
            window: WindowRef {
                session_id: "s".into(),
                t: 0,
                w: 2,
            },
            g_y: DMatrix::identity(2, 2),
            g_x: DMatrix::zeros(2, 2),
            y_next: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.9, 0.2])),
            rank: 2,
            residual: 0.0,
            condition: 1.0,
            y_next_norm: 0.9,
        };
        let spec = eigenvalues(&fit).unwrap();
        assert_abs_diff_eq!(spec.lambda_t[0].re, 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(spec.lambda_t[1].re, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn dominant_selection() {
        let got = select_dominant(&[c(0.9, 0.0), c(0.5, 0.5), c(0.1, 0.0)], 2);
        assert_eq!(got[0], (0.9, 0.0));
        assert_abs_diff_eq!(got[1].0, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(got[1].1, std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
    }

    #[test]
    fn dominant_selection_pads() {
        assert_eq!(
            select_dominant(&[c(0.3, 0.0)], 3),
            vec![(0.3, 0.0), (0.0, 0.0), (0.0, 0.0)]
        );
    }

    #[test]
    fn conjugate_pair_orders_by_angle() {
        // atan2(0.3, 0.4) on the 3-4-5 triangle
        let theta = 0.643_501_108_793_284_4;
        let got = select_dominant(&[c(0.4, 0.3), c(0.4, -0.3)], 2);
        assert_abs_diff_eq!(got[0].0, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(got[0].1, -theta, epsilon = 1e-15);
        assert_abs_diff_eq!(got[1].1, theta, epsilon = 1e-15);
    }

    #[test]
    fn angle_convention() {
        assert_eq!(principal_angle(c(-1.0, -0.0)), PI);
        assert_eq!(principal_angle(c(-1.0, 0.0)), PI);
        assert!(principal_angle(c(2.0, -0.0)).is_sign_positive());
    }

    fn spectrum(t: &[Complex<f64>], cc: &[Complex<f64>]) -> ModeSpectrum {
        ModeSpectrum {
            window: WindowRef {
                session_id: "s".into(),
                t: 0,
                w: 8,
            },
            lambda_t: t.to_vec(),
            lambda_c: cc.to_vec(),
            nonzero_t: t.len(),
            nonzero_c: cc.len(),
            degenerate: false,
        }
    }

    #[test]
    fn feature_lengths() {
        let s = spectrum(&[c(0.5, 0.0)], &[]);
        assert_eq!(build_features(&s, InputType::Transition, 1).values, vec![0.5, 0.0]);
        assert_eq!(build_features(&s, InputType::Combined, 7).values.len(), 28);
        let empty = spectrum(&[], &[]);
        for it in InputType::ALL {
            let f = build_features(&empty, it, 3);
            assert_eq!(f.values.len(), it.feature_len(3));
            assert!(f.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn combined_is_t_block_then_c_block() {
        let s = spectrum(&[c(0.1, 0.0), c(0.7, 0.0)], &[c(0.3, 0.0)]);
        let f = build_features(&s, InputType::Combined, 2);
        assert_eq!(f.values, vec![0.7, 0.0, 0.1, 0.0, 0.3, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn input_type_round_trip() {
        for it in InputType::ALL {
            assert_eq!(it.as_str().parse::<InputType>().unwrap(), it);
        }
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Minimum-norm least squares for full-column-rank `Z` through the normal
    /// equations, independent of the SVD route.
    fn normal_equation_solution(z: &DMatrix<f64>, y_next: &DMatrix<f64>) -> DMatrix<f64> {
        let gram_inv = z.tr_mul(z).try_inverse().unwrap();
        y_next * gram_inv * z.transpose()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn penrose_conditions(rows in 1usize..12, cols in 1usize..12, rank_cap in 1usize..12, seed in any::<u64>()) {
            let r = rank_cap.min(rows).min(cols);
            let m = random_matrix(rows, r, seed) * random_matrix(r, cols, seed ^ 0x9e37);
            let p = pseudo_inverse(&m, None).unwrap();
            let rel = |a: DMatrix<f64>, b: &DMatrix<f64>| (a - b).norm() / b.norm().max(1e-300);
            prop_assert!(rel(&m * &p * &m, &m) < 1e-10);
            prop_assert!(rel(&p * &m * &p, &p) < 1e-10);
            let mp = &m * &p;
            prop_assert!(rel(mp.transpose(), &mp) < 1e-10);
            let pm = &p * &m;
            prop_assert!(rel(pm.transpose(), &pm) < 1e-10);
        }

        #[test]
        fn fit_is_minimum_norm(d in 2usize..5, seed in any::<u64>()) {
            let w = d + 1; // 2d > w: underdetermined, Z full column rank
            let win = window(random_matrix(d, w, seed), random_matrix(d, w, seed + 1), random_matrix(d, w, seed + 2));
            let fit = fit_window(&win, None).unwrap();
            let mut z = DMatrix::zeros(2 * d, w);
            z.rows_mut(0, d).copy_from(&win.y_past);
            z.rows_mut(d, d).copy_from(&win.x_in);

            let mut ab = DMatrix::zeros(d, 2 * d);
            ab.columns_mut(0, d).copy_from(&fit.transition_matrix());
            ab.columns_mut(d, d).copy_from(&fit.control_matrix());
            let oracle = normal_equation_solution(&z, &win.y_next);
            prop_assert!((&ab - &oracle).norm() <= 1e-8 * oracle.norm().max(1.0));

            // Any null-space perturbation keeps the residual and grows the norm.
            let zp = pseudo_inverse(&z, None).unwrap();
            let null_proj = DMatrix::identity(2 * d, 2 * d) - &z * &zp;
            let other = &ab + random_matrix(d, 2 * d, seed + 3) * null_proj;
            let res = |m: &DMatrix<f64>| (&win.y_next - m * &z).norm();
            prop_assert!((res(&other) - res(&ab)).abs() < 1e-9);
            prop_assert!(ab.norm() <= other.norm() + 1e-12);
        }

        #[test]
        fn small_product_matches_dense_spectrum(d in 3usize..20, w in 2usize..7, seed in any::<u64>()) {
            let win = window(random_matrix(d, w, seed), random_matrix(d, w, seed + 1), random_matrix(d, w, seed + 2));
            let fit = fit_window(&win, None).unwrap();
            let spec = eigenvalues(&fit).unwrap();
            prop_assert!(spec.nonzero_t <= w && spec.nonzero_c <= w);
            for (dense_m, fast) in [(fit.transition_matrix(), &spec.lambda_t), (fit.control_matrix(), &spec.lambda_c)] {
                let mut dense = dense_eigenvalues(&dense_m).unwrap();
                sort_dominant(&mut dense);
                for (a, b) in fast.iter().zip(&dense) {
                    prop_assert!((a.norm() - b.norm()).abs() < 1e-8, "{} vs {}", a, b);
                }
            }
        }

        #[test]
        fn conjugate_symmetry(d in 3usize..10, w in 2usize..8, seed in any::<u64>()) {
            let win = window(random_matrix(d, w, seed), random_matrix(d, w, seed + 1), random_matrix(d, w, seed + 2));
            let spec = analyze_window(&win, None).unwrap();
            for set in [&spec.lambda_t, &spec.lambda_c] {
                for z in set.iter().filter(|z| z.im.abs() > 1e-9) {
                    prop_assert!(set.iter().any(|o| (o - z.conj()).norm() < 1e-9));
                }
            }
        }

        #[test]
        fn joint_scaling_leaves_transition_spectrum(d in 3usize..10, w in 2usize..8, seed in any::<u64>(), scale in prop::sample::select(vec![-3.0, -0.5, 0.25, 2.0, 7.5])) {
            let base = window(random_matrix(d, w, seed), random_matrix(d, w, seed + 1), random_matrix(d, w, seed + 2));
            let scaled = window(&base.y_past * scale, &base.x_in * scale, &base.y_next * scale);
            let a = analyze_window(&base, None).unwrap();
            let b = analyze_window(&scaled, None).unwrap();
            prop_assert_eq!(a.nonzero_t, b.nonzero_t);
            for (x, y) in a.lambda_t.iter().zip(&b.lambda_t) {
                prop_assert!((x - y).norm() < 1e-9, "{} vs {}", x, y);
            }
        }
    }
}
