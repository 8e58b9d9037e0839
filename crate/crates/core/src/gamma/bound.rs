//! Randomized lower bounds for the γ-bound of a finite operator family.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::rng::{self, tag};
use crate::space::SpaceModel;

pub const RATIO_SAMPLES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEstimate {
    pub value: f64,
    /// Gaussian samples per ratio; 0 when every ratio was exact.
    pub samples: usize,
    pub trials: usize,
}

fn random_cvec<R: rand::RngCore>(r: &mut R, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| C64::new(rng::normal(r), rng::normal(r)))
}

/// `(E‖Σγ_k T_k x_k‖² / E‖Σγ_k x_k‖²)^{1/2}`, exact for Hilbert targets.
pub fn gaussian_ratio(ops: &[&CMat], xs: &[CVec], space: &SpaceModel, seed: u64) -> f64 {
    let tx: Vec<CVec> = ops.iter().zip(xs).map(|(t, x)| *t * x).collect();
    if space.is_hilbert() {
        let num: f64 = tx.iter().map(|v| v.norm_squared()).sum();
        let den: f64 = xs.iter().map(|v| v.norm_squared()).sum();
        return if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    }
    let n = space.dim;
    let (mut num, mut den) = (Vec::with_capacity(RATIO_SAMPLES), Vec::with_capacity(RATIO_SAMPLES));
    for j in 0..RATIO_SAMPLES {
        let mut r = rng::stream(seed, tag::GAMMA_BOUND, j as u64);
        let mut a = CVec::zeros(n);
        let mut b = CVec::zeros(n);
        for (x, t) in xs.iter().zip(&tx) {
            let g = rng::normal(&mut r);
            a += t * C64::new(g, 0.0);
            b += x * C64::new(g, 0.0);
        }
        num.push(space.norm_c(a.as_slice()).powi(2));
        den.push(space.norm_c(b.as_slice()).powi(2));
    }
    let d = rng::pairwise_sum(&den);
    if d > 0.0 {
        (rng::pairwise_sum(&num) / d).sqrt()
    } else {
        0.0
    }
}

fn single_ratio(t: &CMat, x: &CVec, space: &SpaceModel) -> f64 {
    let d = space.norm_c(x.as_slice());
    if d == 0.0 {
        0.0
    } else {
        space.norm_c((t * x).as_slice()) / d
    }
}

/// Largest `‖Tx‖/‖x‖`: singular values for Hilbert targets, random
/// restarts with multiplicative ascent otherwise.
fn single_operator_bound<R: rand::RngCore>(t: &CMat, space: &SpaceModel, r: &mut R) -> f64 {
    if space.is_hilbert() {
        return t.clone().singular_values().max();
    }
    let n = space.dim;
    let mut best = 0.0f64;
    for _ in 0..8 {
        let mut x = random_cvec(r, n);
        let mut cur = single_ratio(t, &x, space);
        let mut step = 0.5;
        for _ in 0..200 {
            let y = &x + random_cvec(r, n) * C64::new(step, 0.0);
            let v = single_ratio(t, &y, space);
            if v > cur {
                x = y;
                cur = v;
            } else {
                step *= 0.97;
            }
        }
        for k in 0..n {
            let mut e = CVec::zeros(n);
            e[k] = C64::new(1.0, 0.0);
            cur = cur.max(single_ratio(t, &e, space));
        }
        best = best.max(cur);
    }
    best
}

/// Lower bound for `γ(𝒯)` over sampled finite sequences of at most four
/// terms, preceded by a per-operator norm pass.
pub fn gamma_bound_estimate(family: &[CMat], space: &SpaceModel, trials: usize, seed: u64) -> Result<BoundEstimate> {
    if family.is_empty() {
        return invalid("operator family is empty");
    }
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    let n = space.dim;
    if family.iter().any(|t| t.nrows() != n || t.ncols() != n) {
        return invalid("operators must be square with the space dimension");
    }
    let mut r = rng::stream(seed, tag::GAMMA_BOUND, u64::MAX);
    let mut best = 0.0f64;
    for t in family {
        best = best.max(single_operator_bound(t, space, &mut r));
    }
    if family.len() > 1 {
        for trial in 0..trials {
            let len = r.random_range(1..=4usize);
            let idx: Vec<usize> = (0..len).map(|_| r.random_range(0..family.len())).collect();
            let ops: Vec<&CMat> = idx.iter().map(|i| &family[*i]).collect();
            let mut xs: Vec<CVec> = (0..len).map(|_| random_cvec(&mut r, n)).collect();
            let ratio_seed = rng::mix(seed, trial as u64);
            let mut cur = gaussian_ratio(&ops, &xs, space, ratio_seed);
            for _ in 0..20 {
                let k = r.random_range(0..len);
                let mut ys = xs.clone();
                ys[k] += random_cvec(&mut r, n) * C64::new(0.3, 0.0);
                let v = gaussian_ratio(&ops, &ys, space, ratio_seed);
                if v > cur {
                    xs = ys;
                    cur = v;
                }
            }
            best = best.max(cur);
        }
    }
    let samples = if space.is_hilbert() { 0 } else { RATIO_SAMPLES };
    Ok(BoundEstimate { value: best, samples, trials })
}

/// Convenience for real families.
pub fn gamma_bound_real(family: &[nalgebra::DMatrix<f64>], space: &SpaceModel, trials: usize, seed: u64) -> Result<BoundEstimate> {
    let c: Vec<CMat> = family.iter().map(crate::linalg::to_complex).collect();
    gamma_bound_estimate(&c, space, trials, seed)
}
