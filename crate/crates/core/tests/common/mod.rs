#![allow(dead_code)]

use ldp_core::{Coords, GaussianModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `B B^T` with `B` of shape `dim x rank`, entries uniform on `[-1, 1]`,
/// plus a small ridge when full rank is requested.
pub fn random_cov(rng: &mut ChaCha8Rng, dim: usize, rank: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(dim, rank, |_, _| rng.random_range(-1.0..1.0));
    let mut c = &b * b.transpose();
    if rank == dim {
        c += DMatrix::identity(dim, dim) * 0.2;
    }
    0.5 * (&c + c.transpose())
}

pub fn random_model(rng: &mut ChaCha8Rng, dim: usize, rank: usize) -> GaussianModel {
    let mean = DVector::from_fn(dim, |_, _| rng.random_range(-0.5..0.5));
    GaussianModel::new(mean, random_cov(rng, dim, rank), Coords::Plain).unwrap()
}

/// A point of `mean + range(cov)`.
pub fn range_point(rng: &mut ChaCha8Rng, model: &GaussianModel, scale: f64) -> DVector<f64> {
    let d = model.dim();
    let w = DVector::from_fn(d, |_, _| rng.random_range(-scale..scale));
    model.mean() + model.cov() * w
}

pub fn sample_mean_cov(xs: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let d = xs[0].len();
    let n = xs.len() as f64;
    let mut m = DVector::zeros(d);
    for x in xs {
        m += DVector::from_column_slice(x);
    }
    m /= n;
    let mut c = DMatrix::zeros(d, d);
    for x in xs {
        let v = DVector::from_column_slice(x) - &m;
        c += &v * v.transpose();
    }
    (m, c / (n - 1.0))
}
