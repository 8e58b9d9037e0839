use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::linear_fit;
use crate::rng::{self, tag};
use crate::textio::{num, write_csv};

pub const EXPONENT_HEADER: &str = "theta,time_exp_measured,time_exp_predicted,space_exp_measured,space_exp_predicted,r2";
/// Fits below this R² are reported as inconclusive.
pub const MIN_R2: f64 = 0.95;
/// Fewest scales a time fit may use.
pub const MIN_LEVELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub theta: f64,
    pub time_measured: f64,
    pub time_predicted: f64,
    pub space_measured: f64,
    pub space_predicted: f64,
    /// Smaller R² of the time and space fits.
    pub r2: f64,
}

impl ExponentRow {
    pub fn conclusive(&self) -> bool {
        self.r2 >= MIN_R2
    }

    pub fn line(&self) -> String {
        [self.theta, self.time_measured, self.time_predicted, self.space_measured, self.space_predicted, self.r2]
            .iter()
            .map(|v| num(*v))
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub fn exponent_table(rows: &[ExponentRow]) -> String {
    write_csv(EXPONENT_HEADER, rows.iter().map(ExponentRow::line))
}

/// Per-mode time energy `Σ_j D_k(h_j) h_j^{−2θ} ln 2` over dyadic lags, where
/// `D_k(h) = ∫_0^{T−h} |x_k(t+h) − x_k(t)|² dt`; this discretizes the
/// `H^θ(0,T)` seminorm. The decay `e_k ∝ k^{−m}` over `k_lo..=k_hi` gives the
/// borderline spatial exponent `(m − 1)/2` in one space dimension.
fn space_exponent(structure: &[Vec<f64>], lags: &[f64], theta: f64, k_lo: usize, k_hi: usize) -> (f64, f64) {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for k in k_lo..=k_hi {
        let e: f64 = lags.iter().zip(structure).map(|(h, d)| d[k - 1] * h.powf(-2.0 * theta)).sum::<f64>()
            * std::f64::consts::LN_2;
        x.push((k as f64).ln());
        y.push(e.ln());
    }
    let (_, slope, r2) = linear_fit(&x, &y);
    ((-slope - 1.0) / 2.0, r2)
}

/// Heat semigroup of `A = 1 − Δ` on the circle (`λ_k = 1 + k²`) from
/// `û₀_k = λ_k^{−1/2} k^{−1/2}`, which sits at the edge of `D(A^{1/2})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeterministicExponents {
    pub k_max: usize,
    /// `h = 2^{−j}` for the time fit.
    pub levels: Vec<u32>,
    pub horizon: f64,
    /// Dyadic lags `T 2^{−j}`, `j = 1..=lag_levels`, for the time energy.
    pub lag_levels: u32,
}

impl Default for DeterministicExponents {
    fn default() -> Self {
        DeterministicExponents { k_max: 4096, levels: (6..=16).collect(), horizon: 1.0, lag_levels: 40 }
    }
}

impl DeterministicExponents {
    fn check(&self) -> Result<()> {
        if self.levels.len() < MIN_LEVELS {
            return Err(Error::InvalidConfig(format!(
                "{} refinement levels given, at least {MIN_LEVELS} needed",
                self.levels.len()
            )));
        }
        if self.k_max < 16 || !(self.horizon > 0.0) || self.lag_levels < MIN_LEVELS as u32 {
            return Err(Error::InvalidConfig("deterministic exponent run is too coarse".into()));
        }
        Ok(())
    }

    /// Rows for `θ ∈ (1/2, 1]`: Hölder exponent in time of `t ↦ A^{1−θ}u(t)`
    /// against `θ − 1/2`, and spatial exponent against `2 − 2θ`.
    pub fn rows(&self, thetas: &[f64]) -> Result<Vec<ExponentRow>> {
        self.check()?;
        let lam: Vec<f64> = (1..=self.k_max).map(|k| 1.0 + (k * k) as f64).collect();
        let u0: Vec<f64> = lam.iter().enumerate().map(|(i, l)| 1.0 / (l * (i + 1) as f64).sqrt()).collect();
        let t = self.horizon;
        let lags: Vec<f64> = (1..=self.lag_levels).map(|j| t * 0.5f64.powi(j as i32)).collect();
        let structure: Vec<Vec<f64>> = lags
            .iter()
            .map(|h| {
                lam.iter()
                    .zip(&u0)
                    .map(|(l, a)| {
                        let jump = -(-l * h).exp_m1();
                        a * a * jump * jump * -(-2.0 * l * (t - h)).exp_m1() / (2.0 * l)
                    })
                    .collect()
            })
            .collect();
        thetas
            .iter()
            .map(|&theta| {
                if !(theta > 0.5 && theta <= 1.0) {
                    return Err(Error::InvalidConfig(format!("θ = {theta} is outside (1/2, 1]")));
                }
                // S(t) contracts and commutes with A, so sup_t sits at t = 0.
                let (mut x, mut y) = (Vec::new(), Vec::new());
                for j in &self.levels {
                    let h = 0.5f64.powi(*j as i32);
                    let s: f64 = lam
                        .iter()
                        .zip(&u0)
                        .map(|(l, a)| {
                            let jump = -(-l * h).exp_m1();
                            l.powf(2.0 - 2.0 * theta) * jump * jump * a * a
                        })
                        .sum();
                    x.push(h.ln());
                    y.push(0.5 * s.ln());
                }
                let (_, time, r2t) = linear_fit(&x, &y);
                let (space, r2s) = space_exponent(&structure, &lags, theta, 4, self.k_max / 4);
                Ok(ExponentRow {
                    theta,
                    time_measured: time,
                    time_predicted: theta - 0.5,
                    space_measured: space,
                    space_predicted: 2.0 - 2.0 * theta,
                    r2: r2t.min(r2s),
                })
            })
            .collect()
    }
}

/// `dU + (1 − Δ)U dt = dW` on the circle with noise variances `σ_k² = k^{−1}`,
/// simulated mode by mode with the exact Ornstein-Uhlenbeck transition from
/// the stationary law. The noise sits at the edge of `γ(H, L²)`, so `s = 0`
/// and `q = 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StochasticExponents {
    pub k_max: usize,
    pub horizon: f64,
    /// Steps per unit time.
    pub steps_per_unit: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for StochasticExponents {
    fn default() -> Self {
        StochasticExponents { k_max: 64, horizon: 1.0, steps_per_unit: 4 * 64 * 64, samples: 16, seed: 0 }
    }
}

impl StochasticExponents {
    fn steps(&self) -> usize {
        (self.horizon * self.steps_per_unit as f64).round() as usize
    }

    /// Dyadic lags `2^j dt` below `T/2`, and the indices of those inside
    /// the scaling window `[4/K², 1/16]`.
    fn lags(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.steps();
        let dt = self.horizon / n as f64;
        let lags: Vec<usize> = (0..).map(|j| 1usize << j).take_while(|l| 2 * l <= n).collect();
        let lo = 4.0 / (self.k_max * self.k_max) as f64;
        let window = lags
            .iter()
            .enumerate()
            .filter(|(_, l)| {
                let h = **l as f64 * dt;
                h >= lo * (1.0 - 1e-12) && h <= 1.0 / 16.0
            })
            .map(|(i, _)| i)
            .collect();
        (lags, window)
    }

    fn check(&self) -> Result<()> {
        if self.k_max < 16 || self.samples == 0 || !(self.horizon > 0.0) || self.steps() < 2 {
            return Err(Error::InvalidConfig("stochastic exponent run is too coarse".into()));
        }
        let (_, window) = self.lags();
        if window.len() < MIN_LEVELS {
            return Err(Error::InvalidConfig(format!(
                "{} lag levels inside the scaling window, at least {MIN_LEVELS} needed",
                window.len()
            )));
        }
        Ok(())
    }

    /// `D_k(h)` for every lag, averaged over samples.
    fn structure(&self, lags: &[usize]) -> Vec<Vec<f64>> {
        let n = self.steps();
        let kk = self.k_max;
        let dt = self.horizon / n as f64;
        let lam: Vec<f64> = (1..=kk).map(|k| 1.0 + (k * k) as f64).collect();
        let sig2: Vec<f64> = (1..=kk).map(|k| 1.0 / k as f64).collect();
        let decay: Vec<f64> = lam.iter().map(|l| (-l * dt).exp()).collect();
        let sd: Vec<f64> = (0..kk).map(|k| (sig2[k] * -(-2.0 * lam[k] * dt).exp_m1() / (2.0 * lam[k])).sqrt()).collect();
        let per_sample: Vec<Vec<Vec<f64>>> = (0..self.samples)
            .into_par_iter()
            .map(|s| {
                let mut r = rng::stream(self.seed, tag::HEAT, s as u64);
                let mut path = vec![0.0; (n + 1) * kk];
                for k in 0..kk {
                    path[k] = rng::normal(&mut r) * (sig2[k] / (2.0 * lam[k])).sqrt();
                }
                for i in 0..n {
                    for k in 0..kk {
                        path[(i + 1) * kk + k] = decay[k] * path[i * kk + k] + sd[k] * rng::normal(&mut r);
                    }
                }
                lags.iter()
                    .map(|&l| {
                        let mut d = vec![0.0; kk];
                        for i in 0..=n - l {
                            for k in 0..kk {
                                let v = path[(i + l) * kk + k] - path[i * kk + k];
                                d[k] += v * v;
                            }
                        }
                        d.iter().map(|v| v * dt).collect()
                    })
                    .collect()
            })
            .collect();
        (0..lags.len())
            .map(|j| (0..kk).map(|k| per_sample.iter().map(|p| p[j][k]).sum::<f64>() / self.samples as f64).collect())
            .collect()
    }

    /// Rows for `θ ∈ [0, 1/2)`: mean-square increment exponent of `U` in
    /// `D(A^{1/2−θ})` against `θ`, and spatial exponent against `1 − 2θ`.
    pub fn rows(&self, thetas: &[f64]) -> Result<Vec<ExponentRow>> {
        self.check()?;
        if let Some(t) = thetas.iter().find(|t| !(**t >= 0.0 && **t < 0.5)) {
            return Err(Error::InvalidConfig(format!("θ = {t} is outside [0, 1/2)")));
        }
        let (lags, window) = self.lags();
        let dt = self.horizon / self.steps() as f64;
        let structure = self.structure(&lags);
        let h: Vec<f64> = lags.iter().map(|l| *l as f64 * dt).collect();
        let kk = self.k_max;
        Ok(thetas
            .iter()
            .map(|&theta| {
                let (mut x, mut y) = (Vec::new(), Vec::new());
                for &j in &window {
                    let ms: f64 = (0..kk)
                        .map(|k| (1.0 + ((k + 1) * (k + 1)) as f64).powf(1.0 - 2.0 * theta) * structure[j][k])
                        .sum::<f64>()
                        / (self.horizon - h[j]);
                    x.push(h[j].ln());
                    y.push(0.5 * ms.ln());
                }
                let (_, time, r2t) = linear_fit(&x, &y);
                let (space, r2s) = space_exponent(&structure, &h, theta, kk / 8, kk / 2);
                ExponentRow {
                    theta,
                    time_measured: time,
                    time_predicted: theta,
                    space_measured: space,
                    space_predicted: 1.0 - 2.0 * theta,
                    r2: r2t.min(r2s),
                }
            })
            .collect())
    }
}
