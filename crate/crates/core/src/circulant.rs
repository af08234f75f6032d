//! Circulant algebra `Circ(m)` and the completely positive maps connecting it
//! to the commutant of the OHF projection.
//!
//! * `Pi_m = Ad[Vhat^*]`: `X -> Vhat^* X Vhat`, restricted to polynomials in the
//!   CSF this is the circulant representation `pi_m` with `pi_m(U) = C_m`.
//! * `Phi = Ad[Vhat]`: `Y -> Vhat Y Vhat^*`, product preserving.
//! * `phi = Ad[P]` with `P = Vhat Vhat^*`, and `phi = Phi o Pi_m`.

use std::ops::{Add, Mul};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::complex_gaussian;
use crate::error::{Error, Result};
use crate::linalg::{frobenius, identity, CMat, CVec, ONE, ZERO};
use crate::ohf::OhfFactorization;

/// The cyclic permutation matrix `C_m`: `C_m e_j = e_{j+1}`, `C_m e_m = e_1`.
pub fn cyclic_shift_matrix(m: usize) -> CMat {
    assert!(m >= 1, "cyclic shift needs m >= 1");
    CMat::from_fn(m, m, |i, j| if i == (j + 1) % m { ONE } else { ZERO })
}

/// `sum_j c_j C_m^j`, stored by its coefficient vector (the first column of
/// the circulant matrix).
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantElement {
    coeffs: Vec<Complex64>,
}

impl CirculantElement {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::DimensionMismatch("circulant element of order 0".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn from_vector(c: &CVec) -> Result<Self> {
        Self::new(c.iter().copied().collect())
    }

    pub fn identity(m: usize) -> Self {
        monomial_element(m, 0, ONE)
    }

    /// Reduces an arbitrary polynomial `sum_k a_k z^k` modulo `z^m - 1`.
    pub fn from_polynomial(m: usize, poly: &[Complex64]) -> Self {
        let mut coeffs = vec![ZERO; m];
        for (k, a) in poly.iter().enumerate() {
            coeffs[k % m] += a;
        }
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn to_vector(&self) -> CVec {
        CVec::from_column_slice(&self.coeffs)
    }

    pub fn to_matrix(&self) -> CMat {
        circulant_to_matrix(self)
    }

    /// `circ(c) z` as a cyclic convolution.
    pub fn apply(&self, z: &CVec) -> CVec {
        let m = self.order();
        assert_eq!(z.len(), m, "vector length must match circulant order");
        CVec::from_fn(m, |i, _| {
            (0..m).map(|j| self.coeffs[(i + m - j) % m] * z[j]).sum()
        })
    }

    /// `p(X) = sum_j c_j X^j` for a square matrix `X`, by Horner's rule.
    pub fn evaluate_at(&self, x: &CMat) -> CMat {
        let n = x.nrows();
        let mut acc = CMat::zeros(n, n);
        for c in self.coeffs.iter().rev() {
            acc = &acc * x + identity(n) * *c;
        }
        acc
    }
}

impl Mul for &CirculantElement {
    type Output = CirculantElement;

    fn mul(self, rhs: &CirculantElement) -> CirculantElement {
        let m = self.order();
        assert_eq!(m, rhs.order(), "circulant orders differ");
        let mut coeffs = vec![ZERO; m];
        for (j, a) in self.coeffs.iter().enumerate() {
            for (k, b) in rhs.coeffs.iter().enumerate() {
                coeffs[(j + k) % m] += a * b;
            }
        }
        CirculantElement { coeffs }
    }
}

impl Add for &CirculantElement {
    type Output = CirculantElement;

    fn add(self, rhs: &CirculantElement) -> CirculantElement {
        assert_eq!(self.order(), rhs.order(), "circulant orders differ");
        CirculantElement {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Entry `(i, j)` is `c_{(i - j) mod m}`.
pub fn circulant_to_matrix(e: &CirculantElement) -> CMat {
    let m = e.order();
    CMat::from_fn(m, m, |i, j| e.coeffs[(i + m - j) % m])
}

/// `scale * C_m^(t mod m)`.
pub fn monomial_element(m: usize, t: usize, scale: Complex64) -> CirculantElement {
    assert!(m >= 1, "circulant order must be positive");
    let mut coeffs = vec![ZERO; m];
    coeffs[t % m] = scale;
    CirculantElement { coeffs }
}

fn check_square(what: &str, x: &CMat, size: usize) -> Result<()> {
    if x.shape() != (size, size) {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be {size}x{size}, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

/// `Pi_m(X) = Vhat^* X Vhat`.
pub fn compress_pi_m(ohf: &OhfFactorization, x: &CMat) -> Result<CMat> {
    check_square("X", x, ohf.n())?;
    Ok(ohf.vhat().adjoint() * x * ohf.vhat())
}

/// `Phi(Y) = Vhat Y Vhat^*`.
pub fn lift_phi(ohf: &OhfFactorization, y: &CMat) -> Result<CMat> {
    check_square("Y", y, ohf.m())?;
    Ok(ohf.vhat() * y * ohf.vhat().adjoint())
}

/// `phi(X) = P X P` with `P = Vhat Vhat^*`.
pub fn compress_phi_small(ohf: &OhfFactorization, x: &CMat) -> Result<CMat> {
    check_square("X", x, ohf.n())?;
    let p = ohf.central_projection();
    Ok(&p * x * &p)
}

/// Whether a control is read over the circle (polynomials in the CSF) or
/// over the group algebra of `Z/m` (circulant matrices lifted by `Phi`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlManifold {
    Circle,
    CyclicGroup,
}

/// An OHF together with one circulant element per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTuple {
    ohf: OhfFactorization,
    elements: Vec<CirculantElement>,
    manifold: ControlManifold,
}

impl ControlTuple {
    pub fn new(ohf: OhfFactorization, elements: Vec<CirculantElement>, manifold: ControlManifold) -> Result<Self> {
        if let Some(e) = elements.iter().find(|e| e.order() != ohf.m()) {
            return Err(Error::DimensionMismatch(format!(
                "control element of order {} for an OHF with m = {}",
                e.order(),
                ohf.m()
            )));
        }
        Ok(Self {
            ohf,
            elements,
            manifold,
        })
    }

    pub fn ohf(&self) -> &OhfFactorization {
        &self.ohf
    }

    pub fn elements(&self) -> &[CirculantElement] {
        &self.elements
    }

    pub fn manifold(&self) -> ControlManifold {
        self.manifold
    }

    /// The switching matrix `phi(f_k(Z))` of step `k`. Over the circle it is
    /// `P f_k(U) P` evaluated densely; over `Z/m` it is `Vhat circ(c_k) Vhat^*`.
    pub fn switching_matrix(&self, k: usize) -> CMat {
        let element = &self.elements[k % self.elements.len()];
        match self.manifold {
            ControlManifold::Circle => {
                let p = self.ohf.central_projection();
                &p * element.evaluate_at(self.ohf.u_csf()) * &p
            }
            ControlManifold::CyclicGroup => {
                self.ohf.vhat() * element.to_matrix() * self.ohf.vhat().adjoint()
            }
        }
    }

    /// `K phi(f_k(Z)) T v`.
    pub fn output(&self, k: usize, v: &CVec) -> CVec {
        self.ohf.k() * (self.switching_matrix(k) * (self.ohf.t() * v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeResidual {
    pub degree: usize,
    /// `|phi(U^d) - Phi(pi_m(U^d))|`.
    pub diagram: f64,
    /// `|pi_m(U^d) - C_m^d|`.
    pub representation: f64,
    /// Polynomial preservation for a random degree-`d` polynomial, relative to
    /// the coefficient norm.
    pub polynomial: f64,
}

impl DegreeResidual {
    pub fn max(&self) -> f64 {
        self.diagram.max(self.representation).max(self.polynomial)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramReport {
    pub per_degree: Vec<DegreeResidual>,
    pub max_residual: f64,
    pub pass: bool,
}

const DIAGRAM_POLY_SEED: u64 = 0x0005_c10f;

/// Numerically checks that `phi = Phi o pi_m` on powers of the CSF, that
/// `pi_m(U^d) = C_m^d`, and that `phi(p(U)) = p(phi(U)) = Phi(p(C_m))` for a
/// seeded random polynomial `p` of each degree (with `P` as the unit of the
/// corner algebra).
pub fn check_diagram(ohf: &OhfFactorization, degrees: &[usize], tol: f64) -> Result<DiagramReport> {
    let n = ohf.n();
    let m = ohf.m();
    let max_degree = degrees.iter().copied().max().unwrap_or(0);
    let u = ohf.u_csf();
    let p = ohf.central_projection();
    let c_m = cyclic_shift_matrix(m);

    let mut u_powers = vec![identity(n)];
    let mut corner_powers = vec![p.clone()];
    let phi_u = &p * u * &p;
    let mut c_powers = vec![identity(m)];
    for k in 1..=max_degree {
        u_powers.push(&u_powers[k - 1] * u);
        corner_powers.push(&corner_powers[k - 1] * &phi_u);
        c_powers.push(&c_powers[k - 1] * &c_m);
    }

    let mut per_degree = Vec::with_capacity(degrees.len());
    for &d in degrees {
        let x = &u_powers[d];
        let pi = compress_pi_m(ohf, x)?;
        let diagram = frobenius(&(compress_phi_small(ohf, x)? - lift_phi(ohf, &pi)?));
        let representation = frobenius(&(&pi - &c_powers[d]));

        let mut rng = ChaCha8Rng::seed_from_u64(DIAGRAM_POLY_SEED ^ d as u64);
        let poly: Vec<Complex64> = (0..=d).map(|_| complex_gaussian(&mut rng)).collect();
        let mut p_of_u = CMat::zeros(n, n);
        let mut p_of_phi_u = CMat::zeros(n, n);
        for (k, a) in poly.iter().enumerate() {
            p_of_u += &u_powers[k] * *a;
            p_of_phi_u += &corner_powers[k] * *a;
        }
        let lhs = compress_phi_small(ohf, &p_of_u)?;
        let via_circulant = lift_phi(ohf, &CirculantElement::from_polynomial(m, &poly).to_matrix())?;
        let scale = poly.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt().max(1.0);
        let polynomial = frobenius(&(&lhs - p_of_phi_u)).max(frobenius(&(&lhs - via_circulant))) / scale;

        per_degree.push(DegreeResidual {
            degree: d,
            diagram,
            representation,
            polynomial,
        });
    }
    let max_residual = per_degree.iter().map(DegreeResidual::max).fold(0.0, f64::max);
    Ok(DiagramReport {
        per_degree,
        max_residual,
        pass: max_residual <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complexify, matrix_power};
    use nalgebra::DMatrix;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn shift_matrix_examples() {
        assert_eq!(cyclic_shift_matrix(1), identity(1));
        assert_eq!(cyclic_shift_matrix(2), complexify(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])));
        let c3 = cyclic_shift_matrix(3);
        assert_eq!(c3, complexify(&DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0])));
        assert_eq!(&c3 * &c3 * &c3, identity(3));
        assert_eq!(matrix_power(&cyclic_shift_matrix(7), 7), identity(7));
    }

    #[test]
    fn circulant_matrix_examples() {
        assert_eq!(CirculantElement::identity(4).to_matrix(), identity(4));
        let gen = CirculantElement::new(vec![c(0.0), c(1.0), c(0.0)]).unwrap();
        assert_eq!(gen.to_matrix(), cyclic_shift_matrix(3));

        let e = CirculantElement::new(vec![c(1.0), c(2.0), c(3.0), c(4.0)]).unwrap();
        let mat = e.to_matrix();
        assert_eq!(mat.column(0).into_owned(), e.to_vector());
        let c4 = cyclic_shift_matrix(4);
        assert_eq!(&mat * &c4 - &c4 * &mat, CMat::zeros(4, 4));
    }

    #[test]
    fn monomial_examples() {
        assert_eq!(monomial_element(4, 0, c(1.0)).coeffs(), &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert_eq!(monomial_element(4, 6, c(2.0)).coeffs(), &[c(0.0), c(0.0), c(2.0), c(0.0)]);
        let (kappa, rho) = (2.0, 0.5);
        assert_eq!(monomial_element(3, 2, c(kappa / rho)).coeffs(), &[c(0.0), c(0.0), c(4.0)]);
    }

    #[test]
    fn convolution_matches_matrix_product() {
        let a = CirculantElement::new(vec![c(1.0), Complex64::new(0.5, -1.0), c(2.0)]).unwrap();
        let b = CirculantElement::new(vec![Complex64::new(0.0, 1.0), c(-1.0), c(3.0)]).unwrap();
        let prod = &a * &b;
        assert!(frobenius(&(prod.to_matrix() - a.to_matrix() * b.to_matrix())) < 1e-14);
        let z = CVec::from_vec(vec![c(1.0), c(2.0), Complex64::new(0.0, 3.0)]);
        assert!((a.apply(&z) - a.to_matrix() * &z).norm() < 1e-14);
        assert_eq!((&a + &b).to_matrix(), a.to_matrix() + b.to_matrix());
    }

    #[test]
    fn polynomial_reduction_wraps_modulo_order() {
        let e = CirculantElement::from_polynomial(2, &[c(1.0), c(2.0), c(3.0)]);
        assert_eq!(e.coeffs(), &[c(4.0), c(2.0)]);
        let at_shift = e.evaluate_at(&cyclic_shift_matrix(2));
        assert_eq!(at_shift, e.to_matrix());
    }
}
