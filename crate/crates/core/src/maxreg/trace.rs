use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::mild::MildSolution;
use crate::error::{invalid, Error, Result};
use crate::gamma::{norm_from_cov, GammaEstimate, NormChoice, TimeGrid};
use crate::linalg::{march, phi1};
use crate::sectorial::SectorialOp;
use crate::space::SpaceModel;

/// Dyadic levels `h = T 2^{-k}`, `k = 1..=HOLDER_LEVELS`.
pub const HOLDER_LEVELS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderTrace {
    /// `max ‖A^{1-θ}(u(t+h) − u(t))‖ / h^{θ−1/2}` over dyadic pairs.
    pub holder: f64,
    /// `max ‖A^{1/2}u(t)‖` over the same points.
    pub sup_half: f64,
}

pub fn holder_trace_norms(u: &MildSolution, theta: f64) -> Result<HolderTrace> {
    if !(theta > 0.5 && theta <= 1.0) {
        return invalid(format!("Hölder exponent needs θ in (1/2, 1], got {theta}"));
    }
    let a = u.operator();
    if !a.invertible() {
        return Err(Error::Precondition("A must be invertible".into()));
    }
    let space = u.forcing().space();
    let p = if theta == 1.0 { DMatrix::identity(a.dim(), a.dim()) } else { a.frac_power(1.0 - theta)? };
    let half = a.frac_power(0.5)?;
    let t_end = u.grid().end();
    let m = 1usize << HOLDER_LEVELS;
    let pts = (0..=m).map(|j| u.eval(t_end * j as f64 / m as f64)).collect::<Result<Vec<_>>>()?;
    let mut sup_half = 0.0f64;
    for v in &pts {
        sup_half = sup_half.max(space.norm_vec(&(&half * v)));
    }
    for j in 0..u.grid().knots().len() {
        sup_half = sup_half.max(space.norm_vec(&(&half * u.value(j))));
    }
    let mut holder = 0.0f64;
    for k in 1..=HOLDER_LEVELS {
        let stride = m >> k;
        let h = t_end / (1u64 << k) as f64;
        let scale = h.powf(theta - 0.5);
        for j in (0..=m - stride).step_by(stride) {
            let d = &pts[j + stride] - &pts[j];
            holder = holder.max(space.norm_vec(&(&p * d)) / scale);
        }
    }
    Ok(HolderTrace { holder, sup_half })
}

/// `sup_t ‖u(t)‖` over the knots and the dyadic points of the output grid.
pub fn sup_norm(u: &MildSolution) -> Result<f64> {
    let space = u.forcing().space();
    let t_end = u.grid().end();
    let m = 1usize << HOLDER_LEVELS;
    let mut s = u.states().iter().map(|v| space.norm_vec(v)).fold(0.0, f64::max);
    for j in 0..=m {
        s = s.max(space.norm_vec(&u.eval(t_end * j as f64 / m as f64)?));
    }
    Ok(s)
}

/// Right side of the trace formula
/// `σ^{-1}∫_0^σ u − ∫_0^σ t^{-2}∫_0^t (u(t) − u(τ)) dτ dt`
/// for the piecewise-linear interpolant of the samples, continued
/// linearly to 0 from the first piece.
pub fn trace_formula(knots: &[f64], values: &[DVector<f64>], sigma: f64) -> Result<DVector<f64>> {
    if knots.len() != values.len() || knots.len() < 2 {
        return invalid("need matching knots and values, at least two");
    }
    if !(sigma > 0.0 && sigma <= *knots.last().expect("non-empty")) {
        return invalid("σ must lie in (0, last knot]");
    }
    let slope0 = (&values[1] - &values[0]) / (knots[1] - knots[0]);
    let mut ts = vec![0.0];
    let mut us = vec![&values[0] - &slope0 * knots[0]];
    for (t, v) in knots.iter().zip(values) {
        if *t > 0.0 {
            ts.push(*t);
            us.push(v.clone());
        }
    }
    let n = values[0].len();
    let mut int_u = DVector::zeros(n);
    // ∫_0^t s u'(s) ds up to the current knot.
    let mut moment = DVector::zeros(n);
    let mut inner = DVector::zeros(n);
    for i in 0..ts.len() - 1 {
        let (t0, t1) = (ts[i], ts[i + 1].min(sigma));
        if t1 <= t0 {
            break;
        }
        let d = (&us[i + 1] - &us[i]) / (ts[i + 1] - ts[i]);
        let u1 = &us[i] + &d * (t1 - t0);
        int_u += (&us[i] + &u1) * (0.5 * (t1 - t0));
        // On (t0, t1): t^{-2}∫_0^t s u' = (M − d t0²/2)/t² + d/2.
        let c = &moment - &d * (0.5 * t0 * t0);
        if t0 > 0.0 {
            inner += &c * (1.0 / t0 - 1.0 / t1);
        }
        inner += &d * (0.5 * (t1 - t0));
        moment += &d * (0.5 * (t1 * t1 - t0 * t0));
    }
    Ok(int_u / sigma - inner)
}

/// `Tr₀u` from samples on a grid dense near 0: the trace formula at the
/// first two positive knots, Richardson-extrapolated to σ → 0.
pub fn trace_zero(knots: &[f64], values: &[DVector<f64>]) -> Result<DVector<f64>> {
    if knots.len() < 3 || knots.len() != values.len() {
        return Err(Error::InsufficientGrid("need at least three samples".into()));
    }
    let last = *knots.last().expect("non-empty");
    if knots[0] < 0.0 || knots[0] > 1e-6 * last {
        return Err(Error::InsufficientGrid(format!(
            "first sample at {} is not within 1e-6 of the horizon {last}",
            knots[0]
        )));
    }
    let pos: Vec<f64> = knots.iter().copied().filter(|t| *t > 0.0).collect();
    let (s1, s2) = (pos[0], pos[1]);
    let e1 = trace_formula(knots, values, s1)?;
    let e2 = trace_formula(knots, values, s2)?;
    Ok((e1 * s2 - e2 * s1) / (s2 - s1))
}

/// `(1 + tA)^{-1}x` at every knot.
pub fn extension(a: &SectorialOp, x: &DVector<f64>, grid: &TimeGrid) -> Result<Vec<DVector<f64>>> {
    if x.len() != a.dim() {
        return invalid("vector and operator dimensions differ");
    }
    let n = a.dim();
    grid.knots()
        .iter()
        .map(|t| {
            let m = DMatrix::identity(n, n) + a.matrix() * *t;
            m.lu().solve(x).ok_or_else(|| Error::Singular(format!("1 + {t}A is singular")))
        })
        .collect()
}

fn log_step(a: &SectorialOp) -> f64 {
    (2.0 * PI * (PI - a.angle()) / 40.0).min(0.25)
}

/// `‖t ↦ A(1+tA)^{-1}x‖_{γ(ℝ₊;X)}`, trapezoid in ln t.
pub fn extension_norm(a: &SectorialOp, x: &DVector<f64>, space: &SpaceModel) -> Result<GammaEstimate> {
    if x.len() != a.dim() || space.dim != a.dim() {
        return invalid("vector, operator and space dimensions differ");
    }
    let n = a.dim();
    let h = log_step(a);
    let mut cov = DMatrix::zeros(n, n);
    if x.iter().any(|v| *v != 0.0) {
        march(
            -a.max_modulus().ln(),
            h,
            1e-16,
            |s| {
                let t = s.exp();
                let m = DMatrix::identity(n, n) + a.matrix() * t;
                let v = a.matrix() * m.lu().solve(x).ok_or_else(|| Error::Singular("1 + tA".into()))?;
                Ok(&v * v.transpose() * t)
            },
            |c| c.trace(),
            |c| cov += c,
        )?;
    }
    norm_from_cov(&(cov * h), space, NormChoice::Auto)
}

/// Finite exponential sum `u(t) = Σ_j c_j e^{-μ_j t}` with `μ_j > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpSum {
    pub rates: Vec<f64>,
    pub coeffs: Vec<DVector<f64>>,
}

impl ExpSum {
    pub fn new(rates: Vec<f64>, coeffs: Vec<DVector<f64>>) -> Result<Self> {
        if rates.is_empty() || rates.len() != coeffs.len() {
            return invalid("need one coefficient per rate");
        }
        if rates.iter().any(|m| !(*m > 0.0)) {
            return invalid("rates must be positive");
        }
        let n = coeffs[0].len();
        if coeffs.iter().any(|c| c.len() != n) {
            return invalid("coefficients must share a dimension");
        }
        Ok(ExpSum { rates, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        for (m, c) in self.rates.iter().zip(&self.coeffs) {
            v += c * (-m * t).exp();
        }
        v
    }

    pub fn trace(&self) -> DVector<f64> {
        self.eval(0.0)
    }

    /// `∫_0^∞ (Bu)(Bu)ᵀ`, or of `u'` when `b` is `None`.
    pub fn covariance(&self, b: Option<&DMatrix<f64>>) -> DMatrix<f64> {
        let n = self.dim();
        let mut cov = DMatrix::zeros(n, n);
        let img: Vec<DVector<f64>> = self
            .rates
            .iter()
            .zip(&self.coeffs)
            .map(|(m, c)| match b {
                Some(b) => b * c,
                None => c * -*m,
            })
            .collect();
        for (mj, vj) in self.rates.iter().zip(&img) {
            for (ml, vl) in self.rates.iter().zip(&img) {
                cov += vj * vl.transpose() / (mj + ml);
            }
        }
        cov
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceChain {
    /// `‖A^{1/2}Tr₀u‖`.
    pub trace: f64,
    pub t1: f64,
    pub t2: f64,
    pub au: f64,
    pub du: f64,
}

impl TraceChain {
    /// `‖A^{1/2}Tr₀u‖ ≤ T₁ + T₂`, `T₁ ≤ 2C‖Au‖`, `T₂ ≤ (4C/3)‖u'‖`.
    pub fn holds(&self, c: f64, rel: f64) -> bool {
        let slack = 1.0 + rel;
        self.trace <= (self.t1 + self.t2) * slack
            && self.t1 <= 2.0 * c * self.au * slack
            && self.t2 <= 4.0 / 3.0 * c * self.du * slack
    }
}

/// The two pieces of the trace formula applied through `A(1+σA)^{-1}`:
/// `T₁ = ‖σ ↦ A(1+σA)^{-1} σ^{-1}∫_0^σ u‖` and
/// `T₂ = ‖σ ↦ A(1+σA)^{-1} ∫_0^σ t^{-2}∫_0^t (u(t)−u(τ))dτ dt‖`,
/// both in `γ(ℝ₊;X)`, for an exponential sum where every integral is closed.
pub fn trace_chain(a: &SectorialOp, u: &ExpSum, space: &SpaceModel) -> Result<TraceChain> {
    let n = a.dim();
    if u.dim() != n || space.dim != n {
        return invalid("function, operator and space dimensions differ");
    }
    if !a.invertible() {
        return Err(Error::Precondition("A must be invertible".into()));
    }
    let x = u.trace();
    let trace = space.norm_vec(&(a.frac_power(0.5)? * &x));
    let h = log_step(a);
    let mut c1 = DMatrix::zeros(n, n);
    let mut c2 = DMatrix::zeros(n, n);
    let center = -a.max_modulus().max(u.rates.iter().copied().fold(0.0, f64::max)).ln();
    let piece = |s: f64| -> Result<(DVector<f64>, DVector<f64>)> {
        let sigma = s.exp();
        let mut g1 = DVector::zeros(n);
        for (m, c) in u.rates.iter().zip(&u.coeffs) {
            g1 += c * phi1(-m * sigma);
        }
        let g2 = &g1 - &x;
        let m = DMatrix::identity(n, n) + a.matrix() * sigma;
        let lu = m.lu();
        let solve = |g: &DVector<f64>| lu.solve(g).ok_or_else(|| Error::Singular("1 + σA".into()));
        Ok((a.matrix() * solve(&g1)?, a.matrix() * solve(&g2)?))
    };
    march(
        center,
        h,
        1e-16,
        |s| {
            let (v1, v2) = piece(s)?;
            let w = s.exp();
            Ok((&v1 * v1.transpose() * w, &v2 * v2.transpose() * w))
        },
        |(p, q)| p.trace() + q.trace(),
        |(p, q)| {
            c1 += p;
            c2 += q;
        },
    )?;
    let t1 = norm_from_cov(&(c1 * h), space, NormChoice::Auto)?.value;
    let t2 = norm_from_cov(&(c2 * h), space, NormChoice::Auto)?.value;
    let au = norm_from_cov(&u.covariance(Some(a.matrix())), space, NormChoice::Auto)?.value;
    let du = norm_from_cov(&u.covariance(None), space, NormChoice::Auto)?.value;
    Ok(TraceChain { trace, t1, t2, au, du })
}
