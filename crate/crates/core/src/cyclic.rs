//! The cyclic operator `C[v1|vm]` and projection `P[v1|vm]` of an orthogonal
//! m-system.
//!
//! For an orthogonal system `v_1, ..., v_m` the projection
//! `P = sum_j v_j v_j^* / (v_j^* v_j)` maps onto the span of the system and
//! the cyclic operator
//!
//! ```text
//! C = v_1 v_m^* / (v_m^* v_m) + sum_{j<m} v_{j+1} v_j^* / (v_j^* v_j) + 1 - P
//! ```
//!
//! sends `v_j` to `v_{j+1}`, `v_m` back to `v_1`, and fixes the orthogonal
//! complement pointwise. `C^m = 1`, no smaller power is the identity, and `C`
//! is unitary when the system is orthonormal.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, identity, outer, CMat, CVec};

/// Tolerance used when a constructor needs to confirm orthogonality.
pub const DEFAULT_ORTH_TOL: f64 = 1e-10;

/// An ordered list of `m` nonzero vectors in `C^n` with `m <= n`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSystem {
    vectors: Vec<CVec>,
    n: usize,
}

impl VectorSystem {
    pub fn new(vectors: Vec<CVec>) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptySystem)?;
        let n = first.len();
        for (j, v) in vectors.iter().enumerate() {
            if v.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "vector {j} has dimension {}, expected {n}",
                    v.len()
                )));
            }
            if v.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
                return Err(Error::ZeroVector(j));
            }
        }
        if vectors.len() > n {
            return Err(Error::DimensionMismatch(format!(
                "system size m = {} exceeds dimension n = {n}",
                vectors.len()
            )));
        }
        Ok(Self { vectors, n })
    }

    /// Takes the columns of `x` as the system.
    pub fn from_columns(x: &CMat) -> Result<Self> {
        Self::new(x.column_iter().map(|c| c.into_owned()).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[CVec] {
        &self.vectors
    }

    pub fn vector(&self, j: usize) -> &CVec {
        &self.vectors[j]
    }

    /// Successor index in the cycle `0 -> 1 -> ... -> m-1 -> 0`.
    pub fn next_index(&self, j: usize) -> usize {
        (j + 1) % self.m()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthReport {
    pub is_orthogonal: bool,
    pub is_orthonormal: bool,
    /// `max_{j != k} |v_j^* v_k| / (|v_j| |v_k|)`, zero for a single vector.
    pub max_cross: f64,
    pub min_norm: f64,
}

pub fn check_orthogonal_system(vs: &VectorSystem, tol: f64) -> OrthReport {
    let norms: Vec<f64> = vs.vectors().iter().map(|v| v.norm()).collect();
    let mut max_cross = 0.0f64;
    for j in 0..vs.m() {
        for k in (j + 1)..vs.m() {
            let cross = vs.vector(j).dotc(vs.vector(k)).norm() / (norms[j] * norms[k]);
            max_cross = max_cross.max(cross);
        }
    }
    let min_norm = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let is_orthogonal = max_cross <= tol;
    let is_orthonormal = is_orthogonal && norms.iter().all(|r| (r - 1.0).abs() <= tol);
    OrthReport {
        is_orthogonal,
        is_orthonormal,
        max_cross,
        min_norm,
    }
}

fn require_orthogonal(vs: &VectorSystem) -> Result<()> {
    let report = check_orthogonal_system(vs, DEFAULT_ORTH_TOL);
    if report.is_orthogonal {
        Ok(())
    } else {
        Err(Error::NotOrthogonal {
            max_cross: report.max_cross,
            tol: DEFAULT_ORTH_TOL,
        })
    }
}

/// Rank-one term `a b^* / (b^* b)`.
fn scaled_outer(a: &CVec, b: &CVec) -> CMat {
    outer(a, b) / b.dotc(b)
}

fn projector_unchecked(vs: &VectorSystem) -> CMat {
    let mut p = CMat::zeros(vs.n(), vs.n());
    for v in vs.vectors() {
        p += scaled_outer(v, v);
    }
    p
}

/// The orthogonal projection `P[v1|vm]` onto the span of the system.
pub fn projector(vs: &VectorSystem) -> Result<CMat> {
    require_orthogonal(vs)?;
    Ok(projector_unchecked(vs))
}

/// `C[v1|vm]` together with `P[v1|vm]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicPair {
    c: CMat,
    p: CMat,
    m: usize,
}

impl CyclicPair {
    pub fn c(&self) -> &CMat {
        &self.c
    }

    pub fn p(&self) -> &CMat {
        &self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    pub fn into_parts(self) -> (CMat, CMat) {
        (self.c, self.p)
    }
}

pub fn cyclic_pair(vs: &VectorSystem) -> Result<CyclicPair> {
    require_orthogonal(vs)?;
    let m = vs.m();
    let p = projector_unchecked(vs);
    let mut c = identity(vs.n()) - &p;
    for j in 0..m {
        c += scaled_outer(vs.vector(vs.next_index(j)), vs.vector(j));
    }
    Ok(CyclicPair { c, p, m })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaReport {
    /// `max_j |C v_j - v_{j+1 mod m}|`.
    pub cycle_residual: f64,
    /// Max of `|P v_j - v_j|`, `|P^2 - P|` and `|P - P^*|`.
    pub projection_residual: f64,
    /// `|CP - PC|`.
    pub commute_residual: f64,
    /// `|C^m - 1|`.
    pub minpoly_residual: f64,
    /// `|C^* C - 1|`, only for orthonormal systems.
    pub unitarity_residual: Option<f64>,
    /// `min_{1 <= k < m} |C^k - 1|`, absent when `m = 1`.
    pub min_power_gap: Option<f64>,
    pub pass: bool,
}

/// Checks the algebraic identities of a cyclic pair against the system it
/// was built from. Matrix residuals use the Frobenius norm and `C^m` is
/// formed by repeated multiplication.
pub fn verify_cyclic_identities(cp: &CyclicPair, vs: &VectorSystem, tol: f64) -> Result<LemmaReport> {
    if cp.n() != vs.n() || cp.m() != vs.m() {
        return Err(Error::DimensionMismatch(format!(
            "cyclic pair is {}x{} of order {}, system has n = {}, m = {}",
            cp.n(),
            cp.n(),
            cp.m(),
            vs.n(),
            vs.m()
        )));
    }
    let n = vs.n();
    let m = vs.m();
    let one = identity(n);
    let (c, p) = (cp.c(), cp.p());

    let mut cycle_residual = 0.0f64;
    let mut projection_residual = 0.0f64;
    for (j, v) in vs.vectors().iter().enumerate() {
        cycle_residual = cycle_residual.max((c * v - vs.vector(vs.next_index(j))).norm());
        projection_residual = projection_residual.max((p * v - v).norm());
    }
    projection_residual = projection_residual
        .max(frobenius(&(p * p - p)))
        .max(frobenius(&(p - p.adjoint())));
    let commute_residual = frobenius(&(c * p - p * c));

    let mut power = one.clone();
    let mut min_power_gap: Option<f64> = None;
    for k in 1..=m {
        power = &power * c;
        if k < m {
            let gap = frobenius(&(&power - &one));
            min_power_gap = Some(min_power_gap.map_or(gap, |g| g.min(gap)));
        }
    }
    let minpoly_residual = frobenius(&(&power - &one));

    let unitarity_residual = check_orthogonal_system(vs, DEFAULT_ORTH_TOL)
        .is_orthonormal
        .then(|| frobenius(&(c.adjoint() * c - &one)));

    let pass = [cycle_residual, projection_residual, commute_residual, minpoly_residual]
        .into_iter()
        .chain(unitarity_residual)
        .all(|r| r <= tol)
        && min_power_gap.is_none_or(|g| g > tol);

    Ok(LemmaReport {
        cycle_residual,
        projection_residual,
        commute_residual,
        minpoly_residual,
        unitarity_residual,
        min_power_gap,
        pass,
    })
}

/// Identity-check tolerance scaled to the size of `C`.
pub fn default_tolerance(c: &CMat) -> f64 {
    1e-10 * frobenius(c).max(1.0)
}
