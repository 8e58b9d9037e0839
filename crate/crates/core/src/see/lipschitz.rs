use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::problem::SEEProblem;
use crate::error::{invalid, Error, Result};
use crate::gamma::{gamma_norm, NormChoice, StepFunction};
use crate::rng::{self, tag};

pub type Drift = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type Diffusion = Arc<dyn Fn(f64, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Nonlinearities `F: X₁ → X` and `B: X₁ → γ(H, X_{1/2})` given pointwise in
/// time, with their declared constants.
///
/// The declared bounds are
/// `‖F(φ₁) − F(φ₂)‖_{γ(X)} ≤ L_F‖φ₁ − φ₂‖_{γ(X₁)} + L̃_F‖φ₁ − φ₂‖_{γ(X)}`
/// and the same for B with `γ(H, X_{1/2})` on the left.
#[derive(Clone)]
pub struct LipschitzSpec {
    drift: Option<Drift>,
    diffusion: Option<Diffusion>,
    noise_dim: usize,
    pub l_f: f64,
    pub lt_f: f64,
    pub c_f: f64,
    pub l_b: f64,
    pub lt_b: f64,
    pub c_b: f64,
}

impl fmt::Debug for LipschitzSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LipschitzSpec")
            .field("drift", &self.drift.is_some())
            .field("diffusion", &self.diffusion.is_some())
            .field("noise_dim", &self.noise_dim)
            .field("l_f", &self.l_f)
            .field("lt_f", &self.lt_f)
            .field("c_f", &self.c_f)
            .field("l_b", &self.l_b)
            .field("lt_b", &self.lt_b)
            .field("c_b", &self.c_b)
            .finish()
    }
}

fn check_constants(c: [f64; 3]) -> Result<()> {
    if c.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return invalid("Lipschitz and growth constants must be finite and nonnegative");
    }
    Ok(())
}

impl LipschitzSpec {
    /// `F = 0`, `B = 0`, driven by an `noise_dim`-dimensional Brownian motion.
    pub fn zero(noise_dim: usize) -> Result<Self> {
        if noise_dim == 0 {
            return invalid("noise dimension must be at least 1");
        }
        Ok(LipschitzSpec {
            drift: None,
            diffusion: None,
            noise_dim,
            l_f: 0.0,
            lt_f: 0.0,
            c_f: 0.0,
            l_b: 0.0,
            lt_b: 0.0,
            c_b: 0.0,
        })
    }

    pub fn with_drift(
        mut self,
        f: impl Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        l_f: f64,
        lt_f: f64,
        c_f: f64,
    ) -> Result<Self> {
        check_constants([l_f, lt_f, c_f])?;
        self.drift = Some(Arc::new(f));
        (self.l_f, self.lt_f, self.c_f) = (l_f, lt_f, c_f);
        Ok(self)
    }

    /// `b(t, x)` must return an `n × noise_dim` matrix.
    pub fn with_diffusion(
        mut self,
        b: impl Fn(f64, &DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        l_b: f64,
        lt_b: f64,
        c_b: f64,
    ) -> Result<Self> {
        check_constants([l_b, lt_b, c_b])?;
        self.diffusion = Some(Arc::new(b));
        (self.l_b, self.lt_b, self.c_b) = (l_b, lt_b, c_b);
        Ok(self)
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn has_drift(&self) -> bool {
        self.drift.is_some()
    }

    pub fn has_diffusion(&self) -> bool {
        self.diffusion.is_some()
    }

    pub fn drift_at(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        match &self.drift {
            Some(f) => f(t, x),
            None => DVector::zeros(x.len()),
        }
    }

    pub fn diffusion_at(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.diffusion {
            Some(b) => b(t, x),
            None => DMatrix::zeros(x.len(), self.noise_dim),
        }
    }
}

/// Worst observed `lhs / rhs` of the declared inequalities (0 when the map
/// is absent), over sampled pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzReport {
    pub drift_ratio: f64,
    pub diffusion_ratio: f64,
    pub pairs: usize,
}

/// Slack allowed on the declared bounds.
pub const LIPSCHITZ_SLACK: f64 = 0.01;

/// Checks the declared Lipschitz bounds on `pairs` random pairs of step
/// functions on the problem grid, with the norms of the shifted operator.
pub fn lipschitz_check(problem: &SEEProblem, pairs: usize, seed: u64) -> Result<LipschitzReport> {
    if pairs == 0 {
        return invalid("need at least one pair");
    }
    let spec = problem.spec();
    let a = problem.shifted_operator();
    let n = a.dim();
    let am = a.matrix();
    let half = a.frac_power(0.5)?;
    let grid = problem.grid();
    let space = problem.space();
    let knots = grid.knots();
    let norm = |f: &StepFunction| gamma_norm(f, NormChoice::Auto).map(|e| e.value);
    let mut report = LipschitzReport { drift_ratio: 0.0, diffusion_ratio: 0.0, pairs };
    for p in 0..pairs {
        let mut r = rng::stream(seed, tag::LIPSCHITZ, p as u64);
        let scale = 10f64.powf(-3.0 * rng::uniform(&mut r));
        let mut x1 = Vec::with_capacity(grid.len());
        let mut x2 = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let u = DVector::from_fn(n, |_, _| rng::normal(&mut r));
            let d = DVector::from_fn(n, |_, _| scale * rng::normal(&mut r));
            x2.push(&u + d);
            x1.push(u);
        }
        let diff: Vec<DVector<f64>> = x1.iter().zip(&x2).map(|(u, v)| u - v).collect();
        let d0 = norm(&StepFunction::from_vectors(grid.clone(), diff.clone(), space.clone())?)?;
        let d1 = norm(&StepFunction::from_vectors(
            grid.clone(),
            diff.iter().map(|d| am * d).collect(),
            space.clone(),
        )?)?;
        if d1 == 0.0 {
            continue;
        }
        if spec.has_drift() {
            let vals = (0..grid.len())
                .map(|i| spec.drift_at(knots[i], &x1[i]) - spec.drift_at(knots[i], &x2[i]))
                .collect();
            let lhs = norm(&StepFunction::from_vectors(grid.clone(), vals, space.clone())?)?;
            let rhs = spec.l_f * d1 + spec.lt_f * d0;
            report.drift_ratio = report.drift_ratio.max(ratio(lhs, rhs));
        }
        if spec.has_diffusion() {
            let vals = (0..grid.len())
                .map(|i| &half * (spec.diffusion_at(knots[i], &x1[i]) - spec.diffusion_at(knots[i], &x2[i])))
                .collect();
            let lhs = norm(&StepFunction::new(grid.clone(), vals, space.clone())?)?;
            let rhs = spec.l_b * d1 + spec.lt_b * d0;
            report.diffusion_ratio = report.diffusion_ratio.max(ratio(lhs, rhs));
        }
    }
    for (name, v) in [("drift", report.drift_ratio), ("diffusion", report.diffusion_ratio)] {
        if v > 1.0 + LIPSCHITZ_SLACK {
            return Err(Error::SpecViolation(format!("{name} exceeds its declared bound by a factor {v:.6}")));
        }
    }
    Ok(report)
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}
