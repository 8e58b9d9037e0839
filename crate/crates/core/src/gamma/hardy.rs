//! Both sides of the γ-Hardy inequality
//! `‖σ ↦ σ^{-α-1/2} ∫_0^σ f‖_γ ≤ α^{-1} ‖σ ↦ σ^{-α+1/2} f(σ)‖_γ`
//! on (0, ∞) with dσ, f extended by zero beyond its grid.

use nalgebra::DMatrix;

use super::grid::Weight;
use super::norm::{norm_from_cov, NormChoice};
use super::step::StepFunction;
use crate::error::{invalid, Result};
use crate::linalg::{gauss_legendre, gl_interval};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardyPair {
    pub lhs: f64,
    pub rhs: f64,
}

/// `∫_a^b σ^p dσ`, infinite when a = 0 and p ≤ -1.
pub(crate) fn power_moment(p: f64, a: f64, b: f64) -> f64 {
    if a == 0.0 {
        if p <= -1.0 {
            return f64::INFINITY;
        }
        return b.powf(p + 1.0) / (p + 1.0);
    }
    if b / a < 1.5 {
        // Closed forms cancel badly on short intervals.
        let (x, w) = gauss_legendre(20);
        return gl_interval(a, b, &x, &w).map(|(t, wt)| wt * t.powf(p)).sum();
    }
    if (p + 1.0).abs() < 1e-14 {
        (b / a).ln()
    } else {
        (b.powf(p + 1.0) - a.powf(p + 1.0)) / (p + 1.0)
    }
}

fn outer(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b.transpose()
}

fn add_scaled(acc: &mut DMatrix<f64>, m: &DMatrix<f64>, w: f64) -> bool {
    if m.iter().all(|x| *x == 0.0) {
        return true;
    }
    if !w.is_finite() {
        return false;
    }
    *acc += m * w;
    true
}

/// Covariances of both sides; `None` marks a side that is not integrable
/// at the origin.
pub fn hardy_covariances(f: &StepFunction, alpha: f64) -> Result<(Option<DMatrix<f64>>, Option<DMatrix<f64>>)> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    if f.grid().weight() != Weight::Lebesgue {
        return invalid("the Hardy check uses Lebesgue grids");
    }
    let n = f.dim();
    let mut lhs = DMatrix::zeros(n, n);
    let mut rhs = DMatrix::zeros(n, n);
    let (mut lhs_ok, mut rhs_ok) = (true, true);
    let mut prim = DMatrix::zeros(n, f.width());
    for (i, (a, b)) in f.grid().intervals().enumerate() {
        let g = f.value(i);
        // ∫_0^σ f = c + σ g on (a, b).
        let c = &prim - g * a;
        let gg = outer(g, g);
        let cc = outer(&c, &c);
        let cg = outer(&c, g) + outer(g, &c);
        lhs_ok &= add_scaled(&mut lhs, &cc, power_moment(-2.0 * alpha - 1.0, a, b));
        lhs_ok &= add_scaled(&mut lhs, &cg, power_moment(-2.0 * alpha, a, b));
        lhs_ok &= add_scaled(&mut lhs, &gg, power_moment(1.0 - 2.0 * alpha, a, b));
        rhs_ok &= add_scaled(&mut rhs, &gg, power_moment(1.0 - 2.0 * alpha, a, b));
        prim += g * (b - a);
    }
    let t = f.grid().end();
    lhs += outer(&prim, &prim) * (t.powf(-2.0 * alpha) / (2.0 * alpha));
    rhs /= alpha * alpha;
    Ok((lhs_ok.then_some(lhs), rhs_ok.then_some(rhs)))
}

/// Returns (lhs, rhs) with the α^{-1} factor already in rhs. Hilbert
/// targets use the exact formula, finite q the square function and
/// q = ∞ Monte Carlo with a common seed for both sides.
pub fn hardy_check(f: &StepFunction, alpha: f64) -> Result<HardyPair> {
    let (l, r) = hardy_covariances(f, alpha)?;
    let eval = |c: Option<DMatrix<f64>>| -> Result<f64> {
        match c {
            Some(c) => Ok(norm_from_cov(&c, f.space(), NormChoice::Auto)?.value),
            None => Ok(f64::INFINITY),
        }
    };
    Ok(HardyPair { lhs: eval(l)?, rhs: eval(r)? })
}
