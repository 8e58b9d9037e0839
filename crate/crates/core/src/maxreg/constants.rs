use nalgebra::DVector;
use rayon::prelude::*;

use super::mild::convolve;
use crate::error::{invalid, Error, Result};
use crate::gamma::{gamma_bound_estimate, gamma_norm, norm_from_cov, BoundEstimate, NormChoice, StepFunction, TimeGrid};
use crate::linalg::{CMat, C64};
use crate::rng::{self, tag};
use crate::sectorial::SectorialOp;
use crate::space::SpaceModel;

/// Intervals of the random forcings used by [`maxreg_constant`].
pub const TRIAL_INTERVALS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantReport {
    pub constant: f64,
    pub ratios: Vec<f64>,
}

/// Number of horizon scales cycled through by [`random_forcing`].
pub const FORCING_SCALES: u64 = 4;

/// Random forcing with i.i.d. standard normal values on `TRIAL_INTERVALS`
/// equal pieces of `[0, 8·4^j/min|λ|]`, `j = index mod FORCING_SCALES`.
/// The long horizons put most of the energy at low frequencies, where the
/// ratio approaches its supremum.
pub fn random_forcing(a: &SectorialOp, space: &SpaceModel, seed: u64, index: u64) -> Result<StepFunction> {
    let horizon = 8.0 * 4f64.powi((index % FORCING_SCALES) as i32) / a.min_modulus();
    let grid = TimeGrid::uniform(0.0, horizon, TRIAL_INTERVALS)?;
    let mut r = rng::stream(seed, tag::TRIALS, index);
    let vals = (0..TRIAL_INTERVALS)
        .map(|_| DVector::from_fn(a.dim(), |_, _| rng::normal(&mut r)))
        .collect();
    StepFunction::from_vectors(grid, vals, space.clone())
}

/// `‖Au‖_{γ(ℝ₊;X)} / ‖f‖_{γ(ℝ₊;X)}` for `u = S * f`.
pub fn maxreg_ratio(a: &SectorialOp, f: &StepFunction) -> Result<f64> {
    let u = convolve(a, f, f.grid())?;
    let num = norm_from_cov(&u.au_covariance()?, f.space(), NormChoice::Auto)?.value;
    let den = gamma_norm(f, NormChoice::Auto)?.value;
    if den == 0.0 {
        return invalid("forcing has zero norm");
    }
    Ok(num / den)
}

/// Max of [`maxreg_ratio`] over seeded random forcings; a lower bound for
/// the maximal regularity constant.
pub fn maxreg_constant(a: &SectorialOp, space: &SpaceModel, trials: usize, seed: u64) -> Result<ConstantReport> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    if space.dim != a.dim() {
        return invalid("space and operator dimensions differ");
    }
    if !a.invertible() {
        return Err(Error::Precondition("half-line constants need an invertible operator".into()));
    }
    let ratios = (0..trials)
        .into_par_iter()
        .map(|i| maxreg_ratio(a, &random_forcing(a, space, seed, i as u64)?))
        .collect::<Result<Vec<f64>>>()?;
    let constant = ratios.iter().copied().fold(0.0, f64::max);
    Ok(ConstantReport { constant, ratios })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorialityReport {
    /// `(s, ‖is(is+A)^{-1}‖)` on the sampled frequencies.
    pub profile: Vec<(f64, f64)>,
    pub bound: BoundEstimate,
    pub constant: f64,
    /// `γ-bound ≤ 1 + C`, from `is(is+A)^{-1} = I − A(is+A)^{-1}`.
    pub consistent: bool,
}

pub const PROFILE_POINTS: usize = 25;

/// γ-bound of `{is(is+A)^{-1}}` over `±s` log-spaced across the spectrum,
/// checked against a measured maximal regularity constant.
pub fn gamma_sectoriality_from_maxreg(
    a: &SectorialOp,
    space: &SpaceModel,
    constant: f64,
    trials: usize,
    seed: u64,
) -> Result<SectorialityReport> {
    if !a.invertible() {
        return Err(Error::Precondition("A must be invertible".into()));
    }
    if !(constant >= 0.0) {
        return invalid("maximal regularity constant must be measured first");
    }
    let lo = 1e-3 * a.min_modulus();
    let hi = 1e3 * a.max_modulus();
    let mut family = Vec::with_capacity(2 * PROFILE_POINTS);
    let mut profile = Vec::with_capacity(2 * PROFILE_POINTS);
    for k in 0..PROFILE_POINTS {
        let s0 = lo * (hi / lo).powf(k as f64 / (PROFILE_POINTS - 1) as f64);
        for s in [s0, -s0] {
            let is = C64::new(0.0, s);
            let m: CMat = a.resolvent(is)? * is;
            profile.push((s, crate::linalg::op_norm_c(&m)));
            family.push(m);
        }
    }
    let bound = gamma_bound_estimate(&family, space, trials, seed)?;
    let consistent = bound.value <= (1.0 + constant) * (1.0 + 1e-9);
    Ok(SectorialityReport { profile, bound, constant, consistent })
}
