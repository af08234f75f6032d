//! Deterministic test dynamics: exactly periodic and almost-periodic
//! snapshot histories, and a Crank-Nicolson 1D wave simulator.
//!
//! Random draws come from `ChaCha8Rng` seeded with the caller's seed, so every
//! generator is a pure function of its arguments.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize_columns, CMat, CVec};
use crate::ohf::SnapshotHistory;

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    // column-major fill order
    let mut x = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            x[(i, j)] = complex_gaussian(rng);
        }
    }
    x
}

/// `k` orthonormal columns in `C^n` from Gram-Schmidt on a Gaussian matrix.
pub fn random_orthonormal_frame<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> CMat {
    assert!(k <= n, "frame of {k} columns does not fit in dimension {n}");
    loop {
        if let Some(q) = orthonormalize_columns(&gaussian_matrix(rng, n, k)) {
            return q;
        }
    }
}

fn check_periodic_dims(n: usize, period: usize) -> Result<()> {
    if period == 0 {
        return Err(Error::ConfigInvalid("period must be positive".into()));
    }
    if 2 * period > n {
        return Err(Error::DimensionTooSmall { n, m: period });
    }
    Ok(())
}

fn periodic_columns(rng: &mut ChaCha8Rng, n: usize, period: usize, len: usize) -> CMat {
    let frame = random_orthonormal_frame(rng, n, period);
    let start: Vec<Complex64> = (0..period).map(|_| complex_gaussian(rng)).collect();
    let mut data = CMat::zeros(n, len);
    for t in 0..len {
        // coefficients rotate: x_t = Q C_T^t a
        let rotated = CVec::from_fn(period, |i, _| start[(i + period - t % period) % period]);
        data.set_column(t, &(&frame * rotated));
    }
    data
}

/// `len` states of a trajectory with `x_{t+T} = x_t` exactly.
pub fn gen_periodic_trajectory(n: usize, period: usize, len: usize, seed: u64) -> Result<SnapshotHistory> {
    check_periodic_dims(n, period)?;
    if len == 0 {
        return Err(Error::ConfigInvalid("trajectory length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SnapshotHistory::new(periodic_columns(&mut rng, n, period, len))
}

/// One period (`T` columns) of an exactly `T`-periodic trajectory.
pub fn gen_periodic_history(n: usize, period: usize, seed: u64) -> Result<SnapshotHistory> {
    gen_periodic_trajectory(n, period, period, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmostPeriodic {
    /// `clean + E`, each column of `E` of norm exactly `eps_pert` (before rounding).
    pub noisy: SnapshotHistory,
    pub clean: SnapshotHistory,
}

pub fn gen_almost_periodic_history(
    n: usize,
    period: usize,
    eps_pert: f64,
    horizon: usize,
    seed: u64,
) -> Result<AlmostPeriodic> {
    check_periodic_dims(n, period)?;
    if horizon < period {
        return Err(Error::ConfigInvalid(format!("horizon {horizon} shorter than period {period}")));
    }
    if !(eps_pert >= 0.0) || !eps_pert.is_finite() {
        return Err(Error::ConfigInvalid(format!("perturbation size {eps_pert} must be finite and >= 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clean = periodic_columns(&mut rng, n, period, horizon);
    let mut noisy = clean.clone();
    if eps_pert > 0.0 {
        for j in 0..horizon {
            let e = CVec::from_fn(n, |_, _| complex_gaussian(&mut rng));
            let e = e.unscale(e.norm() / eps_pert);
            let mut col = noisy.column_mut(j);
            col += e;
        }
    }
    Ok(AlmostPeriodic {
        noisy: SnapshotHistory::new(noisy)?,
        clean: SnapshotHistory::new(clean)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialProfile {
    /// `sin(k pi x / L)`.
    SineMode(u32),
    /// `exp(-((x - center) / width)^2 / 2)`.
    Gaussian { center: f64, width: f64 },
    Zero,
}

/// Dirichlet wave problem `w_tt = c^2 w_xx` on `[0, L]` with zero initial
/// velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveConfig {
    pub length: f64,
    pub speed: f64,
    /// Interior grid points.
    pub nx: usize,
    /// Time steps; `nt + 1` snapshots are emitted.
    pub nt: usize,
    pub dt: f64,
    pub profile: InitialProfile,
    /// Upper bound on `c dt / dx`.
    pub cfl_limit: f64,
}

pub const DEFAULT_CFL_LIMIT: f64 = 8.0;

impl Default for WaveConfig {
    fn default() -> Self {
        Self::one_period(100, 40)
    }
}

impl WaveConfig {
    /// Unit string, unit speed, first sine mode, `nt` steps covering one
    /// period `2L/c` of the continuous solution.
    pub fn one_period(nx: usize, nt: usize) -> Self {
        Self {
            length: 1.0,
            speed: 1.0,
            nx,
            nt,
            dt: 2.0 / nt.max(1) as f64,
            profile: InitialProfile::SineMode(1),
            cfl_limit: DEFAULT_CFL_LIMIT,
        }
    }

    pub fn dx(&self) -> f64 {
        self.length / (self.nx + 1) as f64
    }

    pub fn courant(&self) -> f64 {
        self.speed * self.dt / self.dx()
    }

    /// Interior grid coordinates `x_i = i dx`, `i = 1..=nx`.
    pub fn grid(&self) -> Vec<f64> {
        let dx = self.dx();
        (1..=self.nx).map(|i| i as f64 * dx).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::ConfigInvalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("length", self.length)?;
        positive("speed", self.speed)?;
        positive("dt", self.dt)?;
        if self.nx < 3 {
            return Err(Error::ConfigInvalid(format!("nx must be >= 3, got {}", self.nx)));
        }
        if self.nt < 1 {
            return Err(Error::ConfigInvalid("nt must be >= 1".into()));
        }
        if let InitialProfile::Gaussian { width, .. } = self.profile {
            positive("gaussian width", width)?;
        }
        if !(self.courant() <= self.cfl_limit) {
            return Err(Error::ConfigInvalid(format!(
                "c dt / dx = {:.4} exceeds the limit {}",
                self.courant(),
                self.cfl_limit
            )));
        }
        Ok(())
    }

    fn initial_displacement(&self) -> DVector<f64> {
        let grid = self.grid();
        DVector::from_iterator(
            self.nx,
            grid.iter().map(|&x| match self.profile {
                InitialProfile::SineMode(k) => (k as f64 * std::f64::consts::PI * x / self.length).sin(),
                InitialProfile::Gaussian { center, width } => (-0.5 * ((x - center) / width).powi(2)).exp(),
                InitialProfile::Zero => 0.0,
            }),
        )
    }
}

/// Displacement and velocity at every time level.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveTrajectory {
    pub displacement: Vec<DVector<f64>>,
    pub velocity: Vec<DVector<f64>>,
}

/// `A w` with `A = tridiag(-1, 2, -1) / dx^2` and homogeneous Dirichlet ends.
fn neg_laplacian(w: &DVector<f64>, dx: f64) -> DVector<f64> {
    let n = w.len();
    let inv = 1.0 / (dx * dx);
    DVector::from_fn(n, |i, _| {
        let left = if i > 0 { w[i - 1] } else { 0.0 };
        let right = if i + 1 < n { w[i + 1] } else { 0.0 };
        (2.0 * w[i] - left - right) * inv
    })
}

/// Thomas solver for a constant symmetric tridiagonal matrix.
struct TridiagonalSolver {
    off: f64,
    // modified super-diagonal and pivots of the forward sweep
    c_prime: Vec<f64>,
    pivots: Vec<f64>,
}

impl TridiagonalSolver {
    fn new(n: usize, diag: f64, off: f64) -> Self {
        let mut c_prime = vec![0.0; n];
        let mut pivots = vec![0.0; n];
        pivots[0] = diag;
        c_prime[0] = off / diag;
        for i in 1..n {
            pivots[i] = diag - off * c_prime[i - 1];
            c_prime[i] = off / pivots[i];
        }
        Self { off, c_prime, pivots }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = rhs.len();
        let mut d = DVector::zeros(n);
        d[0] = rhs[0] / self.pivots[0];
        for i in 1..n {
            d[i] = (rhs[i] - self.off * d[i - 1]) / self.pivots[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.c_prime[i] * d[i + 1];
        }
        d
    }
}

/// Integrates the first-order system `(w, w_t)` with second-order central
/// differences in space and Crank-Nicolson in time.
pub fn integrate_wave(cfg: &WaveConfig) -> Result<WaveTrajectory> {
    cfg.validate()?;
    let dx = cfg.dx();
    let c2 = cfg.speed * cfg.speed;
    let beta = cfg.dt * cfg.dt * c2 / 4.0;
    // (1 + beta A) u_{k+1} = (1 - beta A) u_k - dt c^2 A w_k
    let solver = TridiagonalSolver::new(cfg.nx, 1.0 + 2.0 * beta / (dx * dx), -beta / (dx * dx));

    let mut w = cfg.initial_displacement();
    let mut u = DVector::zeros(cfg.nx);
    let mut displacement = Vec::with_capacity(cfg.nt + 1);
    let mut velocity = Vec::with_capacity(cfg.nt + 1);
    displacement.push(w.clone());
    velocity.push(u.clone());
    for _ in 0..cfg.nt {
        let rhs = &u - neg_laplacian(&u, dx) * beta - neg_laplacian(&w, dx) * (cfg.dt * c2);
        let u_next = solver.solve(&rhs);
        w += (&u + &u_next) * (0.5 * cfg.dt);
        u = u_next;
        displacement.push(w.clone());
        velocity.push(u.clone());
    }
    Ok(WaveTrajectory {
        displacement,
        velocity,
    })
}

/// The `nt + 1` displacement snapshots as an `nx x (nt + 1)` history.
pub fn simulate_wave_1d(cfg: &WaveConfig) -> Result<SnapshotHistory> {
    let traj = integrate_wave(cfg)?;
    let mut data = CMat::zeros(cfg.nx, traj.displacement.len());
    for (j, w) in traj.displacement.iter().enumerate() {
        data.set_column(j, &w.map(|x| Complex64::new(x, 0.0)));
    }
    Ok(SnapshotHistory::new(data)?.with_dt(cfg.dt))
}

/// Discrete energy `dx (|w_t|^2 + c^2 |D w|^2)`, `D` the forward difference
/// including both boundary links. Conserved exactly by the scheme.
pub fn discrete_energy(cfg: &WaveConfig, w: &DVector<f64>, u: &DVector<f64>) -> f64 {
    let dx = cfg.dx();
    let n = w.len();
    let at = |i: isize| if i < 0 || i as usize >= n { 0.0 } else { w[i as usize] };
    let grad: f64 = (-1..n as isize).map(|i| ((at(i + 1) - at(i)) / dx).powi(2)).sum();
    dx * (u.norm_squared() + cfg.speed * cfg.speed * grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solver_inverts_operator() {
        let n = 7;
        let dx = 0.1;
        let beta = 0.3;
        let solver = TridiagonalSolver::new(n, 1.0 + 2.0 * beta / (dx * dx), -beta / (dx * dx));
        let x = DVector::from_fn(n, |i, _| (i as f64).sin() + 0.5);
        let rhs = &x + neg_laplacian(&x, dx) * beta;
        assert!((solver.solve(&rhs) - x).norm() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(WaveConfig::default().validate().is_ok());
        let mut cfg = WaveConfig::default();
        cfg.nx = 2;
        assert!(matches!(simulate_wave_1d(&cfg), Err(Error::ConfigInvalid(_))));
        let mut cfg = WaveConfig::default();
        cfg.dt = 1.0;
        assert!(matches!(simulate_wave_1d(&cfg), Err(Error::ConfigInvalid(_))));
        let mut cfg = WaveConfig::default();
        cfg.speed = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn periodic_generator_errors() {
        assert!(matches!(gen_periodic_history(6, 4, 0), Err(Error::DimensionTooSmall { .. })));
        assert!(matches!(gen_almost_periodic_history(16, 4, 1e-3, 3, 0), Err(Error::ConfigInvalid(_))));
        assert!(matches!(gen_almost_periodic_history(16, 4, -1.0, 8, 0), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn zero_perturbation_is_bitwise_clean() {
        let ap = gen_almost_periodic_history(16, 4, 0.0, 8, 3).unwrap();
        assert_eq!(ap.noisy, ap.clean);
    }

    #[test]
    fn sine_mode_matches_discrete_rotation() {
        // The sine mode is an eigenvector of A with eigenvalue lambda; the
        // scheme rotates (sqrt(lambda) c w, u) by theta with tan(theta/2) = c sqrt(lambda) dt / 2.
        let cfg = WaveConfig::one_period(20, 40);
        let traj = integrate_wave(&cfg).unwrap();
        let dx = cfg.dx();
        let lambda = 4.0 / (dx * dx) * (std::f64::consts::PI * dx / 2.0).sin().powi(2);
        let theta = 2.0 * (cfg.speed * lambda.sqrt() * cfg.dt / 2.0).atan();
        let w0 = &traj.displacement[0];
        for (step, w) in traj.displacement.iter().enumerate() {
            let expected = w0 * (theta * step as f64).cos();
            assert!((w - expected).norm() < 1e-12 * w0.norm(), "step {step}");
        }
    }
}
