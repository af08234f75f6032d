#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sclrom::{CMat, CVec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in the unit square; independent of the library's generators.
pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMat {
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Orthonormal columns from Householder QR.
pub fn orthonormal_columns(rng: &mut impl Rng, n: usize, m: usize) -> CMat {
    random_matrix(rng, n, m).qr().q()
}

pub fn fro(x: &CMat) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn columns(x: &CMat) -> Vec<CVec> {
    x.column_iter().map(|c| c.into_owned()).collect()
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
