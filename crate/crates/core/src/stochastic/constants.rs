use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::brownian::CylindricalBM;
use super::convolution::stoch_convolve_auto;
use super::process::{AdaptedProcess, PathEnsemble};
use crate::error::{invalid, Error, Result};
use crate::gamma::{gamma_norm, gamma_s_norm, norm_from_cov, NormChoice, StepFunction, TimeGrid};
use crate::linalg::lyapunov;
use crate::maxreg::ConstantReport;
use crate::rng::{self, tag, MeanEstimate};
use crate::sectorial::SectorialOp;
use crate::space::{Exponent, SpaceModel};

/// Pieces of the random deterministic integrands.
pub const INTEGRAND_PIECES: usize = 16;

/// `∫_0^∞ (BU)(BU)ᵀ` for one path: trapezoid on the grid plus the exact
/// free-decay tail `B P Bᵀ`, `AP + PAᵀ = U_T U_Tᵀ`.
pub fn path_covariance(a: &SectorialOp, b: &DMatrix<f64>, knots: &[f64], path: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let n = a.dim();
    let mut c = DMatrix::zeros(n, n);
    let mut prev = b * &path[0];
    for (k, w) in knots.windows(2).enumerate() {
        let next = b * &path[k + 1];
        c += (&prev * prev.transpose() + &next * next.transpose()) * (0.5 * (w[1] - w[0]));
        prev = next;
    }
    let u = &path[path.len() - 1];
    let p = lyapunov(a.matrix(), &(u * u.transpose()))?;
    c += b * p * b.transpose();
    Ok(c)
}

/// `(E X^p)^{1/p}` from samples of X, with the delta-method error.
pub fn lp_norm_estimate(xs: &[f64], p: f64) -> (f64, f64) {
    let e = rng::batch_mean(&xs.iter().map(|x| x.powf(p)).collect::<Vec<_>>());
    if e.mean <= 0.0 {
        return (0.0, 0.0);
    }
    let v = e.mean.powf(1.0 / p);
    (v, v * e.stderr / (p * e.mean))
}

/// Random deterministic n×n integrand on `INTEGRAND_PIECES` equal pieces of
/// `[0, 8/min|λ|]`, laid out on the `steps`-interval Brownian grid.
pub fn random_integrand(a: &SectorialOp, space: &SpaceModel, steps: usize, seed: u64, index: u64) -> Result<(StepFunction, TimeGrid)> {
    if steps == 0 || steps % INTEGRAND_PIECES != 0 {
        return invalid(format!("steps must be a positive multiple of {INTEGRAND_PIECES}"));
    }
    let n = a.dim();
    let horizon = 8.0 / a.min_modulus();
    let grid = TimeGrid::uniform(0.0, horizon, steps)?;
    let mut r = rng::stream(seed, tag::TRIALS, index);
    let pieces: Vec<DMatrix<f64>> =
        (0..INTEGRAND_PIECES).map(|_| DMatrix::from_fn(n, n, |_, _| rng::normal(&mut r))).collect();
    let per = steps / INTEGRAND_PIECES;
    let vals = (0..steps).map(|k| pieces[k / per].clone()).collect();
    Ok((StepFunction::new(grid.clone(), vals, space.clone())?, grid))
}

/// Per-sample `‖BU(ω)‖_{γ(ℝ₊;X)}`.
pub fn path_norms(a: &SectorialOp, b: &DMatrix<f64>, u: &PathEnsemble, space: &SpaceModel) -> Result<Vec<f64>> {
    let knots = u.grid().knots();
    (0..u.samples())
        .into_par_iter()
        .map(|s| {
            let c = path_covariance(a, b, knots, u.path(s))?;
            let v = match space.exponent {
                Exponent::Infinity => {
                    norm_from_cov(&c, space, NormChoice::MonteCarlo { samples: 256, seed: s as u64 })?.value
                }
                _ => norm_from_cov(&c, space, NormChoice::Auto)?.value,
            };
            Ok(v)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochRatio {
    pub ratio: f64,
    pub stderr: f64,
}

/// `‖A^{1/2} S⋄G‖_{L^p(Ω;γ(ℝ₊;X))} / ‖G‖_{γ(ℝ₊;H,X)}` for a deterministic G.
pub fn stoch_maxreg_ratio(a: &SectorialOp, g: &StepFunction, w: &CylindricalBM, p: f64) -> Result<StochRatio> {
    let proc_ = AdaptedProcess::deterministic(g);
    let u = stoch_convolve_auto(a, &proc_, w)?;
    let half = a.frac_power(0.5)?;
    let xs = path_norms(a, &half, &u, g.space())?;
    let (num, err) = lp_norm_estimate(&xs, p);
    let den = gamma_norm(g, NormChoice::Auto)?.value;
    if den == 0.0 {
        return invalid("integrand has zero norm");
    }
    Ok(StochRatio { ratio: num / den, stderr: err / den })
}

/// Max of [`stoch_maxreg_ratio`] over seeded random integrands.
#[allow(clippy::too_many_arguments)]
pub fn stoch_maxreg_constant(
    a: &SectorialOp,
    space: &SpaceModel,
    trials: usize,
    samples: usize,
    steps: usize,
    p: f64,
    seed: u64,
) -> Result<ConstantReport> {
    if trials == 0 || samples < 2 {
        return invalid("need at least one trial and two samples");
    }
    if !(p > 0.0 && p.is_finite()) {
        return invalid("p must be a positive real");
    }
    if !a.invertible() {
        return Err(Error::Precondition("A must be invertible".into()));
    }
    let mut ratios = Vec::with_capacity(trials);
    for i in 0..trials {
        let (g, grid) = random_integrand(a, space, steps, seed, i as u64)?;
        let w = CylindricalBM::new(&grid, a.dim(), samples, rng::mix(seed, i as u64))?;
        ratios.push(stoch_maxreg_ratio(a, &g, &w, p)?.ratio);
    }
    let constant = ratios.iter().copied().fold(0.0, f64::max);
    Ok(ConstantReport { constant, ratios })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacetimeReport {
    /// `(E‖A^{1/2−θ}U‖²_{H^θ(ℝ₊;X)})^{1/2} / ‖G‖_{L²(Ω;γ)}`.
    pub ratio: f64,
    pub moment: MeanEstimate,
    pub forcing: f64,
}

/// Space-time regularity of `U = S⋄G`: per sample, `A^{1/2−θ}U` as bin
/// midpoints on the noise grid with a geometric free-decay tail, measured
/// in `H^θ` by `gamma_s_norm`.
pub fn spacetime_reg_check(
    a: &SectorialOp,
    g: &AdaptedProcess,
    w: &CylindricalBM,
    theta: f64,
    space: &SpaceModel,
) -> Result<SpacetimeReport> {
    if !(0.0..0.5).contains(&theta) {
        return invalid(format!("θ must lie in [0, 1/2), got {theta}"));
    }
    if !a.invertible() {
        return Err(Error::Precondition("A must be invertible".into()));
    }
    let u = stoch_convolve_auto(a, g, w)?;
    let b = a.frac_power(0.5 - theta)?;
    let grid = w.grid();
    let h = grid.min_step();
    let t_end = grid.end();
    let mut knots = grid.knots().to_vec();
    let mut len = h;
    while *knots.last().expect("non-empty") < t_end + 12.0 / a.min_modulus() {
        let last = *knots.last().expect("non-empty");
        knots.push(last + len);
        len *= 2.0;
    }
    let ext = TimeGrid::new(knots.clone(), grid.weight())?;
    let tail: Vec<DMatrix<f64>> = knots[grid.knots().len() - 1..]
        .windows(2)
        .map(|k| a.semigroup(0.5 * (k[0] + k[1]) - t_end))
        .collect::<Result<_>>()?;
    let sq: Vec<f64> = (0..u.samples())
        .into_par_iter()
        .map(|s| {
            let p = u.path(s);
            let mut vals: Vec<DVector<f64>> = p.windows(2).map(|v| &b * (&v[0] + &v[1]) * 0.5).collect();
            let end = &p[p.len() - 1];
            vals.extend(tail.iter().map(|m| &b * (m * end)));
            let f = StepFunction::from_vectors(ext.clone(), vals, space.clone())?;
            Ok(gamma_s_norm(&f, theta)?.value.powi(2))
        })
        .collect::<Result<_>>()?;
    let moment = rng::batch_mean(&sq);
    let forcing_sq: Vec<f64> = match g.samples() {
        None => vec![gamma_norm(&g.sample_step(0, space)?, NormChoice::Auto)?.value.powi(2)],
        Some(k) => (0..k)
            .map(|s| Ok(gamma_norm(&g.sample_step(s, space)?, NormChoice::Auto)?.value.powi(2)))
            .collect::<Result<_>>()?,
    };
    let forcing = rng::mean(&forcing_sq).sqrt();
    if forcing == 0.0 {
        return invalid("integrand has zero norm");
    }
    Ok(SpacetimeReport { ratio: moment.mean.max(0.0).sqrt() / forcing, moment, forcing })
}
