//! Switched closed-loop reduced-order models (SCL-ROM) built from snapshot
//! histories.
//!
//! A history `v_1, ..., v_m` is orthonormalized into a history factor whose
//! columns are cycled by a unitary shift matrix. Compressing powers of that
//! shift onto the factor gives the cyclic permutation matrix `C_m`, so each
//! time step of the reduced model is an element of the circulant algebra
//! `Circ(m)`:
//!
//! ```text
//! x_t ~ K Vhat circ(c_t) Vhat^* T v_1
//! ```
//!
//! Modules, bottom up: [`cyclic`] (cyclic operators of orthogonal systems),
//! [`ohf`] (orthonormal history factor), [`circulant`] (the algebra side and
//! the commuting diagram), [`rom`] (fitting and prediction), [`datagen`]
//! (test dynamics), [`io`] (file formats) and [`cli`].

pub mod circulant;
pub mod cli;
pub mod cyclic;
pub mod datagen;
pub mod error;
pub mod io;
pub mod linalg;
pub mod ohf;
pub mod rom;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
pub use num_complex::Complex64;
pub use ohf::{build_ohf, OhfFactorization, SnapshotHistory};
pub use rom::{fit, predict, FitMode, FitOptions, SclRomModel};
