#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pdmd_core::{collect_from_plant, Dynamics, Signal, SnapshotEnsemble, ThetaSource};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_signal(rng: &mut ChaCha8Rng, dt: f64, len: usize, n_u: usize) -> Signal<f64> {
    Signal::new(dt, (0..len).map(|_| gaussian_vector(rng, n_u)).collect()).unwrap()
}

pub fn uniform_theta(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// `n_d` transitions of `plant` under Gaussian inputs and uniform theta in [-1, 1].
pub fn random_excitation<P: Dynamics<f64>>(plant: &P, n_d: usize, seed: u64) -> SnapshotEnsemble<f64> {
    let mut r = rng(seed);
    let input = gaussian_signal(&mut r, plant.dt(), n_d + 1, plant.n_u());
    let theta = uniform_theta(&mut r, n_d);
    collect_from_plant(plant, &input, &DVector::zeros(plant.n_x()), &ThetaSource::Sequence(theta)).unwrap()
}

/// Random ensemble with arbitrary (not dynamically linked) states.
pub fn random_ensemble(rng: &mut ChaCha8Rng, n_x: usize, n_u: usize, n_d: usize) -> SnapshotEnsemble<f64> {
    let states = (0..=n_d).map(|_| gaussian_vector(rng, n_x)).collect();
    let inputs = (0..n_d).map(|_| gaussian_vector(rng, n_u)).collect();
    let theta = uniform_theta(rng, n_d);
    SnapshotEnsemble::new(0.1, states, inputs, theta).unwrap()
}

pub fn rel_fro(a: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    (a - reference).norm() / reference.norm()
}
