//! Orthonormal history factor (OHF) and circular shift factor (CSF).
//!
//! Given snapshots `v_1, ..., v_m` in `C^n` with `2m <= n`, the thin SVD
//! `H = V diag(s) W` is split into
//!
//! ```text
//! CH = V diag(s_j / s_1) W,   SH = U diag(t_j) W,   t_j = sqrt(1 - (s_j / s_1)^2)
//! ```
//!
//! where the columns of `U` are orthonormal and orthogonal to `V`. The sum
//! `Vhat = CH + SH` has orthonormal columns, and together with
//! `kappa = s_1`, `rho = v_1^* v_1 / s_1`, `K = V V^*`, `T = vhat_1 vhat_1^*`
//! and `U_csf = C[vhat_1|vhat_m]` it satisfies
//!
//! ```text
//! T v_1 = rho vhat_1,   U_csf vhat_j = vhat_{j+1 mod m},   K kappa vhat_j = v_j.
//! ```

use nalgebra::SVD;
use num_complex::Complex64;

use crate::cyclic::{cyclic_pair, VectorSystem};
use crate::error::{Error, Result};
use crate::linalg::{frobenius, identity, normalize_column_phases, outer, CMat, CVec, ONE, ZERO};

/// Default relative threshold on `s_m / s_1` below which a history is degenerate.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Complement candidates whose residual falls below this are skipped.
const COMPLEMENT_SKIP_TOL: f64 = 1e-8;

/// Tolerance for the internal consistency checks run after every build or load.
const CONSISTENCY_TOL: f64 = 1e-10;

const SVD_MAX_ITER: usize = 10_000;

/// Snapshots `v_1, ..., v_m` stored as the columns of an `n x m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHistory {
    data: CMat,
    dt: Option<f64>,
}

impl SnapshotHistory {
    /// Zero columns are accepted here; factorization rejects them as degenerate.
    pub fn new(data: CMat) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "history must be at least 1x1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { data, dt: None })
    }

    pub fn from_columns(columns: &[CVec]) -> Result<Self> {
        let first = columns
            .first()
            .ok_or_else(|| Error::DimensionMismatch("history needs at least one column".into()))?;
        if columns.iter().any(|c| c.len() != first.len()) {
            return Err(Error::DimensionMismatch("history columns differ in length".into()));
        }
        Self::new(CMat::from_columns(columns))
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn dt(&self) -> Option<f64> {
        self.dt
    }

    pub fn data(&self) -> &CMat {
        &self.data
    }

    pub fn into_data(self) -> CMat {
        self.data
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn m(&self) -> usize {
        self.data.ncols()
    }

    /// Column `j` (0-based), i.e. `v_{j+1}`.
    pub fn column(&self, j: usize) -> CVec {
        self.data.column(j).into_owned()
    }

    /// The first `k` snapshots.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.m() {
            return Err(Error::DimensionMismatch(format!(
                "prefix of {k} columns requested from a history of {}",
                self.m()
            )));
        }
        Ok(Self {
            data: self.data.columns(0, k).into_owned(),
            dt: self.dt,
        })
    }

    /// True when every imaginary part is exactly `+0.0`.
    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im.to_bits() == 0)
    }
}

/// Thin SVD `H = V diag(S) W` with `S` nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdTriple {
    pub v: CMat,
    pub s: Vec<f64>,
    pub w: CMat,
}

impl SvdTriple {
    pub fn reconstruct(&self) -> CMat {
        let mut vs = self.v.clone();
        for (j, s) in self.s.iter().enumerate() {
            vs.column_mut(j).scale_mut(*s);
        }
        vs * &self.w
    }
}

/// Thin SVD of the history matrix. The left singular vectors are phase
/// normalized so their largest-modulus entry is real and positive, and the
/// rows of `W` absorb the compensating phases.
pub fn svd_thin(h: &SnapshotHistory) -> Result<SvdTriple> {
    if h.n() < h.m() {
        return Err(Error::DimensionTooSmall { n: h.n(), m: h.m() });
    }
    if h.data().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalFailure("history contains non-finite entries".into()));
    }
    let svd = SVD::try_new(h.data().clone(), true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let mut v = svd.u.expect("left factor requested");
    let mut w = svd.v_t.expect("right factor requested");
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    let phases = normalize_column_phases(&mut v);
    for (j, phase) in phases.iter().enumerate() {
        let back = phase.conj();
        w.row_mut(j).iter_mut().for_each(|z| *z *= back);
    }
    Ok(SvdTriple { v, s, w })
}

/// `m` orthonormal columns spanning part of the orthogonal complement of the
/// columns of `v`. Gram-Schmidt is seeded with `e_1, e_2, ...` in order, so the
/// result is a deterministic function of `v`.
pub fn complement_basis(v: &CMat) -> Result<CMat> {
    let (n, m) = v.shape();
    if n < 2 * m {
        return Err(Error::DimensionTooSmall { n, m });
    }
    let mut accepted: Vec<CVec> = Vec::with_capacity(m);
    for k in 0..n {
        if accepted.len() == m {
            break;
        }
        let mut cand = CVec::zeros(n);
        cand[k] = ONE;
        for _ in 0..2 {
            for col in v.column_iter() {
                let coeff = col.dotc(&cand);
                cand -= col * coeff;
            }
            for u in &accepted {
                let coeff = u.dotc(&cand);
                cand -= u * coeff;
            }
        }
        let norm = cand.norm();
        if norm < COMPLEMENT_SKIP_TOL {
            continue;
        }
        accepted.push(cand.unscale(norm));
    }
    if accepted.len() < m {
        return Err(Error::NumericalFailure(format!(
            "found only {} of {m} complement directions",
            accepted.len()
        )));
    }
    Ok(CMat::from_columns(&accepted))
}

/// The data of the orthonormalization construction: OHF, scalars, projections
/// and the CSF.
#[derive(Debug, Clone, PartialEq)]
pub struct OhfFactorization {
    pub(crate) vhat: CMat,
    pub(crate) v: CMat,
    pub(crate) w: CMat,
    pub(crate) kappa: Complex64,
    pub(crate) rho: Complex64,
    pub(crate) k: CMat,
    pub(crate) t: CMat,
    pub(crate) u_csf: CMat,
    pub(crate) singular_values: Vec<f64>,
    pub(crate) t_values: Vec<f64>,
}

impl OhfFactorization {
    pub fn n(&self) -> usize {
        self.vhat.nrows()
    }

    pub fn m(&self) -> usize {
        self.vhat.ncols()
    }

    /// The orthonormal history factor `Vhat`.
    pub fn vhat(&self) -> &CMat {
        &self.vhat
    }

    /// Left singular factor `V`.
    pub fn v(&self) -> &CMat {
        &self.v
    }

    /// Right singular factor `W` (so that `H = V diag(s) W`).
    pub fn w(&self) -> &CMat {
        &self.w
    }

    pub fn kappa(&self) -> Complex64 {
        self.kappa
    }

    pub fn rho(&self) -> Complex64 {
        self.rho
    }

    /// Output projection `K = V V^*`.
    pub fn k(&self) -> &CMat {
        &self.k
    }

    /// Input projection `T = vhat_1 vhat_1^*`.
    pub fn t(&self) -> &CMat {
        &self.t
    }

    /// Circular shift factor `U[v1|vm] = C[vhat_1|vhat_m]`.
    pub fn u_csf(&self) -> &CMat {
        &self.u_csf
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn t_values(&self) -> &[f64] {
        &self.t_values
    }

    pub fn vhat_column(&self, j: usize) -> CVec {
        self.vhat.column(j).into_owned()
    }

    /// `P[vhat_1|vhat_m] = Vhat Vhat^*`.
    pub fn central_projection(&self) -> CMat {
        &self.vhat * self.vhat.adjoint()
    }

    /// `CH = K Vhat = V diag(s_j / s_1) W`.
    pub fn compressed_history(&self) -> CMat {
        &self.k * &self.vhat
    }

    /// Snapshot `v_{j+1}` recovered as `K kappa vhat_{j+1}`.
    pub fn reconstruct_snapshot(&self, j: usize) -> CVec {
        (&self.k * self.vhat.column(j)) * self.kappa
    }

    /// Checks the invariants of the construction: orthonormal OHF, real
    /// positive `rho` consistent with `vhat_1^* v_1`, projections, unitary CSF.
    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        let bad = |what: String| Err(Error::InvariantViolation(what));
        if self.v.shape() != (n, m) || self.w.shape() != (m, m) {
            return bad(format!("factor shapes inconsistent with n = {n}, m = {m}"));
        }
        if self.k.shape() != (n, n) || self.t.shape() != (n, n) || self.u_csf.shape() != (n, n) {
            return bad("projection shapes inconsistent".into());
        }
        let gram = frobenius(&(self.vhat.adjoint() * &self.vhat - identity(m)));
        if !(gram <= 1e-12 * m as f64) {
            return bad(format!("OHF columns not orthonormal (residual {gram:.3e})"));
        }
        let rho = self.rho;
        if !(rho.re > 0.0) || rho.im.abs() > CONSISTENCY_TOL * rho.norm() {
            return bad(format!("rho = {rho} is not real positive"));
        }
        let v1 = self.reconstruct_snapshot(0);
        let overlap = self.vhat.column(0).dotc(&v1);
        if (overlap - rho).norm() > CONSISTENCY_TOL * rho.norm().max(1.0) {
            return bad(format!("vhat_1^* v_1 = {overlap} disagrees with rho = {rho}"));
        }
        for (name, p) in [("K", &self.k), ("T", &self.t)] {
            let r = frobenius(&(p * p - p)).max(frobenius(&(p - p.adjoint())));
            if !(r <= CONSISTENCY_TOL) {
                return bad(format!("{name} is not an orthogonal projection (residual {r:.3e})"));
            }
        }
        let unitary = frobenius(&(self.u_csf.adjoint() * &self.u_csf - identity(n)));
        if !(unitary <= CONSISTENCY_TOL * (n as f64).sqrt().max(1.0)) {
            return bad(format!("CSF is not unitary (residual {unitary:.3e})"));
        }
        for (s, t) in self.singular_values.iter().zip(&self.t_values) {
            let ratio = s / self.singular_values[0];
            if (ratio * ratio + t * t - 1.0).abs() > CONSISTENCY_TOL {
                return bad("(s_j/s_1)^2 + t_j^2 != 1".into());
            }
        }
        Ok(())
    }

    /// Rebuilds a factorization from `V`, `Vhat`, `kappa` and `rho`,
    /// recomputing `K`, `T` and the CSF. Singular value ratios and `W` are
    /// recovered from `V^* Vhat = diag(s/s_1) W` and `U^* Vhat = diag(t) W`.
    pub fn from_parts(v: CMat, vhat: CMat, kappa: Complex64, rho: Complex64) -> Result<Self> {
        let (n, m) = vhat.shape();
        if v.shape() != (n, m) {
            return Err(Error::InvariantViolation(format!(
                "V is {}x{}, Vhat is {n}x{m}",
                v.nrows(),
                v.ncols()
            )));
        }
        if n < 2 * m {
            return Err(Error::InvariantViolation(format!("n = {n} < 2m = {}", 2 * m)));
        }
        if !(kappa.re > 0.0) || kappa.im != 0.0 {
            return Err(Error::InvariantViolation(format!("kappa = {kappa} is not real positive")));
        }
        let complement = complement_basis(&v).map_err(|e| Error::InvariantViolation(e.to_string()))?;
        let cos_part = v.adjoint() * &vhat;
        let sin_part = complement.adjoint() * &vhat;
        let mut w = CMat::zeros(m, m);
        let mut singular_values = Vec::with_capacity(m);
        let mut t_values = Vec::with_capacity(m);
        for j in 0..m {
            let ratio = cos_part.row(j).norm().min(1.0);
            let t = (1.0 - ratio * ratio).max(0.0).sqrt();
            let row = if ratio >= t {
                cos_part.row(j) / Complex64::new(ratio, 0.0)
            } else {
                sin_part.row(j) / Complex64::new(t, 0.0)
            };
            w.set_row(j, &row);
            singular_values.push(ratio * kappa.re);
            t_values.push(t);
        }
        let ohf = assemble(vhat, v, w, kappa, rho, singular_values, t_values)?;
        ohf.validate()?;
        Ok(ohf)
    }
}

fn assemble(
    vhat: CMat,
    v: CMat,
    w: CMat,
    kappa: Complex64,
    rho: Complex64,
    singular_values: Vec<f64>,
    t_values: Vec<f64>,
) -> Result<OhfFactorization> {
    let k = &v * v.adjoint();
    let vhat_1 = vhat.column(0).into_owned();
    let t = outer(&vhat_1, &vhat_1);
    let system = VectorSystem::from_columns(&vhat).map_err(|e| Error::InvariantViolation(e.to_string()))?;
    let u_csf = cyclic_pair(&system)
        .map_err(|e| Error::InvariantViolation(e.to_string()))?
        .into_parts()
        .0;
    Ok(OhfFactorization {
        vhat,
        v,
        w,
        kappa,
        rho,
        k,
        t,
        u_csf,
        singular_values,
        t_values,
    })
}

fn numerical_rank(s: &[f64], rank_tol: f64) -> usize {
    match s.first() {
        Some(&s1) if s1 > 0.0 => s.iter().filter(|&&sj| sj > rank_tol * s1).count(),
        _ => 0,
    }
}

/// Builds the OHF of a history.
///
/// With `rank_tol > 0` the history must satisfy `s_m > rank_tol * s_1`;
/// `rank_tol = 0` skips that check and only rejects zero snapshots, since the
/// construction itself needs nothing beyond an orthonormal `V`.
pub fn build_ohf(h: &SnapshotHistory, rank_tol: f64) -> Result<OhfFactorization> {
    let (n, m) = (h.n(), h.m());
    if n < 2 * m {
        return Err(Error::DimensionTooSmall { n, m });
    }
    let svd = svd_thin(h)?;
    let rank = numerical_rank(&svd.s, rank_tol);
    let zero_column = h.data().column_iter().any(|c| c.iter().all(|z| *z == ZERO));
    if svd.s[0] <= 0.0 || zero_column || (rank_tol > 0.0 && rank < m) {
        return Err(Error::DegenerateHistory { rank, m });
    }
    let s1 = svd.s[0];
    let ratios: Vec<f64> = svd.s.iter().map(|s| s / s1).collect();
    let t_values: Vec<f64> = ratios.iter().map(|r| (1.0 - r * r).max(0.0).sqrt()).collect();
    let complement = complement_basis(&svd.v)?;

    let mut cos_factor = svd.v.clone();
    let mut sin_factor = complement;
    for j in 0..m {
        cos_factor.column_mut(j).scale_mut(ratios[j]);
        sin_factor.column_mut(j).scale_mut(t_values[j]);
    }
    let vhat = (cos_factor + sin_factor) * &svd.w;

    let v1 = h.column(0);
    let rho = Complex64::new(v1.norm_squared() / s1, 0.0);
    let ohf = assemble(vhat, svd.v, svd.w, Complex64::new(s1, 0.0), rho, svd.s, t_values)?;
    ohf.validate()?;
    Ok(ohf)
}

/// Like [`build_ohf`], but on a rank-deficient history falls back to the
/// longest prefix of snapshots that factors cleanly. Returns the number of
/// snapshots kept.
pub fn build_ohf_truncated(h: &SnapshotHistory, rank_tol: f64) -> Result<(OhfFactorization, usize)> {
    match build_ohf(h, rank_tol) {
        Ok(ohf) => Ok((ohf, h.m())),
        Err(Error::DegenerateHistory { rank, m }) => {
            for k in (1..=rank.min(m - 1)).rev() {
                if let Ok(ohf) = build_ohf(&h.prefix(k)?, rank_tol) {
                    return Ok((ohf, k));
                }
            }
            Err(Error::DegenerateHistory { rank, m })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhfReport {
    /// `|T v_1 - rho vhat_1|`.
    pub t_residual: f64,
    /// `max_j |U vhat_j - vhat_{j+1 mod m}|`.
    pub shift_residual: f64,
    /// `max_j |K kappa vhat_j - v_j| / |v_j|`.
    pub k_residual: f64,
    /// `|U^* U - 1|`.
    pub unitary_residual: f64,
    pub pass: bool,
}

pub fn verify_ohf(ohf: &OhfFactorization, h: &SnapshotHistory, tol: f64) -> Result<OhfReport> {
    if h.n() != ohf.n() || h.m() != ohf.m() {
        return Err(Error::DimensionMismatch(format!(
            "factorization is for n = {}, m = {}, history is {}x{}",
            ohf.n(),
            ohf.m(),
            h.n(),
            h.m()
        )));
    }
    let m = ohf.m();
    let v1 = h.column(0);
    let t_residual = (&ohf.t * &v1 - ohf.vhat.column(0) * ohf.rho).norm();
    let mut shift_residual = 0.0f64;
    let mut k_residual = 0.0f64;
    for j in 0..m {
        let shifted = &ohf.u_csf * ohf.vhat.column(j);
        shift_residual = shift_residual.max((shifted - ohf.vhat.column((j + 1) % m)).norm());
        let vj = h.column(j);
        k_residual = k_residual.max((ohf.reconstruct_snapshot(j) - &vj).norm() / vj.norm());
    }
    let unitary_residual = frobenius(&(ohf.u_csf.adjoint() * &ohf.u_csf - identity(ohf.n())));
    let pass = [t_residual, shift_residual, k_residual, unitary_residual]
        .iter()
        .all(|r| *r <= tol);
    Ok(OhfReport {
        t_residual,
        shift_residual,
        k_residual,
        unitary_residual,
        pass,
    })
}
