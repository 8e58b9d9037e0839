#![allow(dead_code)]

use gammareg::gamma::{StepFunction, TimeGrid, Weight};
use gammareg::space::SpaceModel;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_grid(r: &mut ChaCha8Rng, n: usize, t0: f64) -> TimeGrid {
    let mut knots = vec![t0];
    for _ in 0..n {
        let last = *knots.last().unwrap();
        knots.push(last + r.random_range(0.05..0.5));
    }
    TimeGrid::new(knots, Weight::Lebesgue).unwrap()
}

pub fn random_step(r: &mut ChaCha8Rng, grid: TimeGrid, space: SpaceModel, width: usize) -> StepFunction {
    let n = space.dim;
    let vals = (0..grid.len()).map(|_| DMatrix::from_fn(n, width, |_, _| r.random_range(-1.0..1.0))).collect();
    StepFunction::new(grid, vals, space).unwrap()
}

pub fn random_vec(r: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0))
}

/// Random normal-free sectorial matrix: `V D V^{-1}` with positive `D` and
/// a well-conditioned `V`.
pub fn random_sectorial(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let d = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| r.random_range(0.5..4.0)));
    let mut v = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                v[(i, j)] = r.random_range(-0.3..0.3);
            }
        }
    }
    let vi = v.clone().try_inverse().unwrap();
    v * d * vi
}

pub fn rstep(r: &mut ChaCha8Rng, n: usize, t0: f64, space: SpaceModel, width: usize) -> StepFunction {
    let g = random_grid(r, n, t0);
    random_step(r, g, space, width)
}
