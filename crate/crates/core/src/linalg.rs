//! Dense complex helpers shared by the factorization modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Frobenius norm.
pub fn frobenius(x: &CMat) -> f64 {
    x.norm()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Embeds a real matrix with zero imaginary parts.
pub fn complexify(x: &DMatrix<f64>) -> CMat {
    x.map(|v| Complex64::new(v, 0.0))
}

/// `x^k` by repeated multiplication, `x^0 = 1`.
pub fn matrix_power(x: &CMat, k: usize) -> CMat {
    let mut acc = identity(x.nrows());
    for _ in 0..k {
        acc = &acc * x;
    }
    acc
}

/// Outer product `a b*`.
pub fn outer(a: &CVec, b: &CVec) -> CMat {
    a * b.adjoint()
}

/// Index of the first entry of maximal modulus.
pub(crate) fn argmax_modulus<'a>(values: impl Iterator<Item = &'a Complex64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        let a = v.norm();
        match best {
            Some((_, b)) if a <= b => {}
            _ => best = Some((i, a)),
        }
    }
    best.map(|(i, _)| i)
}

/// Rotates every column so its largest-modulus entry is real and positive.
/// Returns the unit phase each column was multiplied by.
pub fn normalize_column_phases(x: &mut CMat) -> Vec<Complex64> {
    let mut phases = Vec::with_capacity(x.ncols());
    for mut col in x.column_iter_mut() {
        let phase = match argmax_modulus(col.iter()) {
            Some(i) if col[i].norm() > 0.0 => col[i].conj() / col[i].norm(),
            _ => ONE,
        };
        col *= phase;
        phases.push(phase);
    }
    phases
}

/// Orthonormalizes the columns of `a` with twice-iterated classical Gram-Schmidt
/// and the phase convention of [`normalize_column_phases`]. Returns `None` if a
/// column is numerically dependent on its predecessors.
pub fn orthonormalize_columns(a: &CMat) -> Option<CMat> {
    let (n, m) = a.shape();
    let mut q = CMat::zeros(n, m);
    for j in 0..m {
        let original = a.column(j).into_owned();
        let scale = original.norm();
        let mut v = original;
        for _ in 0..2 {
            for k in 0..j {
                let qk = q.column(k);
                let coeff = qk.dotc(&v);
                v -= qk * coeff;
            }
        }
        let norm = v.norm();
        if !(norm > 1e-10 * scale) || norm == 0.0 {
            return None;
        }
        q.set_column(j, &(v / Complex64::new(norm, 0.0)));
    }
    normalize_column_phases(&mut q);
    Some(q)
}
