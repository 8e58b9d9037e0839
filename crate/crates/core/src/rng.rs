//! Keyed random streams and fixed-order statistics.
//!
//! Every random quantity is drawn from a stream addressed by
//! `(seed, experiment, index)`, so a sample can be regenerated in isolation
//! and parallel schedules give the same bits as serial ones.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Experiment tags. Distinct tags give independent stream families.
pub mod tag {
    pub const GAMMA_MC: u64 = 1;
    pub const GAMMA_BOUND: u64 = 2;
    pub const BROWNIAN: u64 = 3;
    pub const OU_EXTRA: u64 = 4;
    pub const TRIALS: u64 = 5;
    pub const INITIAL: u64 = 6;
    pub const HEAT: u64 = 7;
    pub const LIPSCHITZ: u64 = 8;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn mix(seed: u64, experiment: u64) -> u64 {
    splitmix(splitmix(seed) ^ experiment.rotate_left(32))
}

/// Stream `index` of experiment `experiment` under `seed`.
pub fn stream(seed: u64, experiment: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, experiment));
    rng.set_stream(index);
    rng
}

pub fn normal<R: RngCore>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn fill_normal<R: RngCore>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

pub fn uniform<R: RngCore>(rng: &mut R) -> f64 {
    // 53 random bits in [0, 1)
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Pairwise summation in a fixed tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let h = n / 2;
            pairwise_sum(&xs[..h]) + pairwise_sum(&xs[h..])
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Mean with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

pub const BATCH: usize = 64;

/// Batches of 64 when there are at least 4 full batches, otherwise the
/// plain sample standard error.
pub fn batch_mean(xs: &[f64]) -> MeanEstimate {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return MeanEstimate { mean: m, stderr: 0.0, samples: n };
    }
    let nb = n / BATCH;
    let stderr = if nb >= 4 {
        let means: Vec<f64> = xs.chunks_exact(BATCH).map(mean).collect();
        let bm = mean(&means);
        let dev: Vec<f64> = means.iter().map(|b| (b - bm) * (b - bm)).collect();
        (pairwise_sum(&dev) / (nb as f64 - 1.0) / nb as f64).sqrt()
    } else {
        let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
        (pairwise_sum(&dev) / (n as f64 - 1.0) / n as f64).sqrt()
    };
    MeanEstimate { mean: m, stderr, samples: n }
}

/// `sqrt` of a mean estimate with the delta-method error.
pub fn sqrt_estimate(e: MeanEstimate) -> (f64, f64) {
    let v = e.mean.max(0.0).sqrt();
    if v == 0.0 {
        return (0.0, e.stderr.sqrt());
    }
    (v, e.stderr / (2.0 * v))
}
