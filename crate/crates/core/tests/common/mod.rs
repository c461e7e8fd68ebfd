#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn normal_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn normal_vector<R: Rng>(rng: &mut R, d: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Haar-ish random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn orthogonal<R: Rng>(rng: &mut R, d: usize) -> DMatrix<f64> {
    normal_matrix(rng, d, d).qr().q()
}

/// Random SPD matrix with eigenvalues log-uniform in [lo, hi].
pub fn spd<R: Rng>(rng: &mut R, d: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = orthogonal(rng, d);
    let eig = DVector::from_fn(d, |_, _| (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp());
    let m = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    (&m + m.transpose()) * 0.5
}
