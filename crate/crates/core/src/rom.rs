//! Fitting, prediction and verification of switched closed-loop reduced-order
//! models.
//!
//! A fitted model stores the OHF of the training history and one circulant
//! coefficient vector `c_t` per step of the period `T`. Step `t` predicts
//!
//! ```text
//! x_t = K H_t T v_1,   H_t = Vhat circ(c_{t mod T}) Vhat^*
//! ```
//!
//! In monomial mode `c_t = (kappa / rho) e_{t mod m}`, which reproduces the
//! training snapshots exactly in exact arithmetic. In least-squares mode `c_t`
//! minimizes `|rho CH c - v_{t+1}|`, using `T v_1 = rho vhat_1` and
//! `K Vhat = CH`.

use rayon::prelude::*;

use crate::circulant::{monomial_element, CirculantElement};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, ZERO};
use crate::ohf::{build_ohf, build_ohf_truncated, OhfFactorization, SnapshotHistory, DEFAULT_RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    Monomial,
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub mode: FitMode,
    /// Target training residual.
    pub epsilon: f64,
    pub rank_tol: f64,
    /// On a degenerate history, refit on the longest prefix that factors.
    pub truncate_rank: bool,
    /// Switching period `T`; defaults to the number of snapshots.
    pub period: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mode: FitMode::Monomial,
            epsilon: 1e-10,
            rank_tol: DEFAULT_RANK_TOL,
            truncate_rank: false,
            period: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SclRomModel {
    ohf: OhfFactorization,
    coeffs: CMat,
    epsilon_achieved: f64,
    epsilon_target: f64,
}

impl SclRomModel {
    /// Assembles a model from stored parts and checks that `epsilon_achieved`
    /// matches the residual recomputed against the reconstructed snapshots
    /// `K kappa vhat_j`.
    pub fn from_parts(ohf: OhfFactorization, coeffs: CMat, epsilon_achieved: f64, epsilon_target: f64) -> Result<Self> {
        if coeffs.nrows() != ohf.m() || coeffs.ncols() == 0 {
            return Err(Error::InvariantViolation(format!(
                "coefficient array is {}x{}, expected {} rows and a positive period",
                coeffs.nrows(),
                coeffs.ncols(),
                ohf.m()
            )));
        }
        if !(epsilon_achieved >= 0.0) || !(epsilon_target >= 0.0) {
            return Err(Error::InvariantViolation("negative or NaN epsilon".into()));
        }
        let model = Self {
            ohf,
            coeffs,
            epsilon_achieved,
            epsilon_target,
        };
        let steps = model.period().min(model.m());
        let targets: Vec<CVec> = (0..steps).map(|j| model.ohf.reconstruct_snapshot(j)).collect();
        let scale = targets.iter().map(|v| v.norm()).fold(1.0, f64::max);
        let recomputed = training_residuals(&model, &targets).into_iter().fold(0.0, f64::max);
        if (recomputed - epsilon_achieved).abs() > 1e-12 * scale {
            return Err(Error::InvariantViolation(format!(
                "stored epsilon {epsilon_achieved:e} disagrees with recomputed {recomputed:e}"
            )));
        }
        Ok(model)
    }

    pub fn ohf(&self) -> &OhfFactorization {
        &self.ohf
    }

    /// `m x T`, column `t` holds `c_t`.
    pub fn coeffs(&self) -> &CMat {
        &self.coeffs
    }

    pub fn element(&self, t: usize) -> CirculantElement {
        CirculantElement::from_vector(&self.coeffs.column(t % self.period()).into_owned())
            .expect("model coefficient columns are nonempty")
    }

    pub fn period(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn n(&self) -> usize {
        self.ohf.n()
    }

    pub fn m(&self) -> usize {
        self.ohf.m()
    }

    pub fn epsilon_achieved(&self) -> f64 {
        self.epsilon_achieved
    }

    pub fn epsilon_target(&self) -> f64 {
        self.epsilon_target
    }

    pub fn target_met(&self) -> bool {
        self.epsilon_achieved <= self.epsilon_target
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub epsilon_achieved: f64,
    pub target_met: bool,
    /// `|x_t - v_{t+1}|` for each step with a training snapshot.
    pub per_step: Vec<f64>,
    /// Snapshots used after optional rank truncation.
    pub snapshots_used: usize,
}

/// Minimizer of `|rho CH c - target|` through the stored SVD,
/// `c = W^* diag(s_1 / s_j) V^* target / rho`. Directions with
/// `s_j / s_1` at rounding level are dropped (minimum-norm solution).
pub fn least_squares_coefficients(ohf: &OhfFactorization, target: &CVec) -> CVec {
    let s1 = ohf.singular_values()[0];
    let cutoff = ohf.n().max(ohf.m()) as f64 * f64::EPSILON;
    let mut projected = ohf.v().adjoint() * target;
    for (j, s) in ohf.singular_values().iter().enumerate() {
        let ratio = s / s1;
        projected[j] = if ratio > cutoff { projected[j] / ratio } else { ZERO };
    }
    (ohf.w().adjoint() * projected) / ohf.rho()
}

fn fit_coefficients(ohf: &OhfFactorization, training: &SnapshotHistory, period: usize, mode: FitMode) -> CMat {
    let m = ohf.m();
    let scale = ohf.kappa() / ohf.rho();
    let columns: Vec<CVec> = (0..period)
        .into_par_iter()
        .map(|t| match mode {
            FitMode::LeastSquares if t < m => least_squares_coefficients(ohf, &training.column(t)),
            _ => monomial_element(m, t, scale).to_vector(),
        })
        .collect();
    CMat::from_columns(&columns)
}

fn training_residuals(model: &SclRomModel, targets: &[CVec]) -> Vec<f64> {
    targets
        .par_iter()
        .enumerate()
        .map(|(t, v)| (predict(model, t) - v).norm())
        .collect()
}

pub fn fit(h: &SnapshotHistory, opts: &FitOptions) -> Result<(SclRomModel, FitReport)> {
    if !(opts.epsilon >= 0.0) || !(opts.rank_tol >= 0.0) {
        return Err(Error::ConfigInvalid("epsilon and rank_tol must be >= 0".into()));
    }
    if opts.period == Some(0) {
        return Err(Error::ConfigInvalid("period must be positive".into()));
    }
    let (ohf, kept) = if opts.truncate_rank {
        build_ohf_truncated(h, opts.rank_tol)?
    } else {
        (build_ohf(h, opts.rank_tol)?, h.m())
    };
    let training = h.prefix(kept)?;
    let period = opts.period.unwrap_or(kept);
    let coeffs = fit_coefficients(&ohf, &training, period, opts.mode);

    let mut model = SclRomModel {
        ohf,
        coeffs,
        epsilon_achieved: 0.0,
        epsilon_target: opts.epsilon,
    };
    let targets: Vec<CVec> = (0..period.min(kept)).map(|t| training.column(t)).collect();
    let per_step = training_residuals(&model, &targets);
    model.epsilon_achieved = per_step.iter().copied().fold(0.0, f64::max);
    let report = FitReport {
        epsilon_achieved: model.epsilon_achieved,
        target_met: model.target_met(),
        per_step,
        snapshots_used: kept,
    };
    Ok((model, report))
}

/// `H_t = Vhat circ(c_{t mod T}) Vhat^*`.
pub fn transition_matrix(model: &SclRomModel, t: usize) -> CMat {
    let vhat = model.ohf.vhat();
    vhat * model.element(t).to_matrix() * vhat.adjoint()
}

/// `x_t = K H_{t mod T} T v_1`, evaluated right to left through the factors.
/// `v_1` is taken as `K kappa vhat_1` so a reloaded model predicts bitwise
/// identically.
pub fn predict(model: &SclRomModel, t: usize) -> CVec {
    let ohf = &model.ohf;
    let v1 = ohf.reconstruct_snapshot(0);
    let reduced = ohf.vhat().adjoint() * (ohf.t() * v1);
    let stepped = model.element(t).apply(&reduced);
    ohf.k() * (ohf.vhat() * stepped)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MimeticReport {
    pub max_residual: f64,
    /// `(k, |x_k - v_{k+1}|)` for `1 <= k < m`.
    pub per_step: Vec<(usize, f64)>,
    pub pass: bool,
    pub m: usize,
    pub n: usize,
    pub eps: f64,
}

/// Checks the predictions against every snapshot of `h` after the first.
pub fn verify_mimetic(model: &SclRomModel, h: &SnapshotHistory, eps: f64) -> Result<MimeticReport> {
    if h.n() != model.n() {
        return Err(Error::DimensionMismatch(format!(
            "model has n = {}, snapshots have n = {}",
            model.n(),
            h.n()
        )));
    }
    let per_step: Vec<(usize, f64)> = (1..h.m())
        .into_par_iter()
        .map(|k| (k, (predict(model, k) - h.column(k)).norm()))
        .collect();
    let max_residual = per_step.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    Ok(MimeticReport {
        max_residual,
        per_step,
        pass: max_residual <= eps,
        m: h.m(),
        n: h.n(),
        eps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodReport {
    pub best_period: usize,
    /// `(T, score(T))` in candidate order.
    pub scores: Vec<(usize, f64)>,
    pub within_tol: bool,
}

/// Scores each candidate period by `max_t |v_{t+T} - v_t| / max_t |v_t|` and
/// picks the smallest score, preferring the smaller period on ties.
pub fn detect_period(h: &SnapshotHistory, candidates: &[usize], tol: f64) -> Result<PeriodReport> {
    let largest = *candidates
        .iter()
        .max()
        .ok_or_else(|| Error::ConfigInvalid("no candidate periods".into()))?;
    if candidates.contains(&0) {
        return Err(Error::ConfigInvalid("candidate periods must be positive".into()));
    }
    if h.m() < 2 * largest {
        return Err(Error::InsufficientData {
            needed: 2 * largest,
            available: h.m(),
        });
    }
    let norms: Vec<f64> = h.data().column_iter().map(|c| c.norm()).collect();
    let scale = norms.iter().copied().fold(0.0, f64::max);
    let scores: Vec<(usize, f64)> = candidates
        .iter()
        .map(|&period| {
            let drift = (0..h.m() - period)
                .map(|t| (h.data().column(t + period) - h.data().column(t)).norm())
                .fold(0.0, f64::max);
            let score = if scale > 0.0 { drift / scale } else { 0.0 };
            (period, score)
        })
        .collect();
    let (best_period, best_score) = scores
        .iter()
        .copied()
        .fold(None, |best: Option<(usize, f64)>, (p, s)| match best {
            Some((bp, bs)) if bs < s || (bs == s && bp < p) => Some((bp, bs)),
            _ => Some((p, s)),
        })
        .expect("candidates are nonempty");
    Ok(PeriodReport {
        best_period,
        scores,
        within_tol: best_score <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complexify, frobenius, ONE};
    use nalgebra::DMatrix;

    fn e(n: usize, k: usize) -> CVec {
        let mut v = CVec::zeros(n);
        v[k] = ONE;
        v
    }

    #[test]
    fn single_snapshot_model() {
        let h = SnapshotHistory::new(complexify(&DMatrix::from_column_slice(4, 1, &[2.0, 0.0, 1.0, 0.0]))).unwrap();
        let (model, report) = fit(&h, &FitOptions::default()).unwrap();
        let scale = model.ohf().kappa() / model.ohf().rho();
        assert_eq!(model.coeffs().shape(), (1, 1));
        assert_eq!(model.coeffs()[(0, 0)], scale);
        assert!((predict(&model, 0) - h.column(0)).norm() < 1e-12);
        assert!(report.target_met);
    }

    #[test]
    fn identity_step_on_orthonormal_history() {
        let h = SnapshotHistory::from_columns(&[e(6, 0), e(6, 1), e(6, 2)]).unwrap();
        let (model, _) = fit(&h, &FitOptions::default()).unwrap();
        let p = model.ohf().central_projection();
        assert!(frobenius(&(transition_matrix(&model, 0) - p)) < 1e-14);
        assert_eq!(transition_matrix(&model, 1), transition_matrix(&model, 4));
        assert_eq!(predict(&model, 3), predict(&model, 0));
    }

    #[test]
    fn detect_period_tie_breaks_to_smallest() {
        let col = CVec::from_vec(vec![ONE, ONE]);
        let h = SnapshotHistory::from_columns(&vec![col; 6]).unwrap();
        let r = detect_period(&h, &[3, 1, 2], 0.0).unwrap();
        assert_eq!(r.best_period, 1);
        assert!(r.within_tol);
        assert!(matches!(
            detect_period(&h, &[4], 0.0),
            Err(Error::InsufficientData { needed: 8, available: 6 })
        ));
    }

    #[test]
    fn rejects_bad_options() {
        let h = SnapshotHistory::from_columns(&[e(4, 0)]).unwrap();
        let opts = FitOptions {
            epsilon: -1.0,
            ..FitOptions::default()
        };
        assert!(matches!(fit(&h, &opts), Err(Error::ConfigInvalid(_))));
        let opts = FitOptions {
            period: Some(0),
            ..FitOptions::default()
        };
        assert!(matches!(fit(&h, &opts), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn corrupted_epsilon_is_rejected() {
        let h = SnapshotHistory::from_columns(&[e(4, 0), e(4, 1) * (ONE + ONE)]).unwrap();
        let (model, _) = fit(&h, &FitOptions::default()).unwrap();
        let err = SclRomModel::from_parts(model.ohf().clone(), model.coeffs().clone(), 0.5, 1e-10);
        assert!(matches!(err, Err(Error::InvariantViolation(_))));
        let err = SclRomModel::from_parts(model.ohf().clone(), CMat::zeros(3, 2), 0.0, 1e-10);
        assert!(matches!(err, Err(Error::InvariantViolation(_))));
    }
}
