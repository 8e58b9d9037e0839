use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::lipschitz::LipschitzSpec;
use crate::error::{invalid, Error, Result};
use crate::gamma::{StepFunction, TimeGrid, Weight};
use crate::maxreg::maxreg_constant;
use crate::sectorial::SectorialOp;
use crate::space::SpaceModel;
use crate::stochastic::stoch_maxreg_constant;

/// `𝔉₀`-measurable initial value: one vector for all samples, or one per sample.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Deterministic(DVector<f64>),
    Samples(Vec<DVector<f64>>),
}

impl InitialData {
    pub fn get(&self, sample: usize) -> &DVector<f64> {
        match self {
            InitialData::Deterministic(x) => x,
            InitialData::Samples(xs) => &xs[sample],
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        let all: Vec<&DVector<f64>> = match self {
            InitialData::Deterministic(x) => vec![x],
            InitialData::Samples(xs) => xs.iter().collect(),
        };
        if all.is_empty() {
            return invalid("no initial samples");
        }
        if all.iter().any(|x| x.len() != n) {
            return invalid("initial value has the wrong dimension");
        }
        if all.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
            return invalid("initial value is not finite");
        }
        Ok(())
    }
}

/// `w = 0` when the spectrum already lies in the open right half-plane,
/// otherwise `2·max(0, −min Re λ) + 1`.
pub fn default_shift(a: &SectorialOp) -> f64 {
    if a.spectrum_in_open_right_half_plane() {
        return 0.0;
    }
    let min_re = a.eigenvalues().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    2.0 * (-min_re).max(0.0) + 1.0
}

/// `dU + AU dt = (F(t,U) + f) dt + (B(t,U) + b) dW_H`, `U(0) = u₀`, on a
/// Lebesgue grid starting at 0. The solver works with `A + w` and `F + w`.
#[derive(Debug, Clone)]
pub struct SEEProblem {
    operator: Arc<SectorialOp>,
    shifted: Arc<SectorialOp>,
    shift: f64,
    spec: LipschitzSpec,
    u0: InitialData,
    grid: TimeGrid,
    space: SpaceModel,
    forcing: Option<StepFunction>,
    noise_forcing: Option<StepFunction>,
}

impl SEEProblem {
    pub fn new(a: SectorialOp, spec: LipschitzSpec, u0: InitialData, grid: TimeGrid, space: SpaceModel) -> Result<Self> {
        let n = a.dim();
        if space.dim != n {
            return invalid("space and operator dimensions differ");
        }
        if grid.weight() != Weight::Lebesgue || grid.start() != 0.0 {
            return invalid("the problem grid must be a Lebesgue grid starting at 0");
        }
        if a.angle() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::NotAnalytic(format!("angle {:.6} is not below π/2", a.angle())));
        }
        u0.check(n)?;
        let w = default_shift(&a);
        let shifted = if w == 0.0 { a.clone() } else { a.shifted(w)? };
        Ok(SEEProblem {
            operator: Arc::new(a),
            shifted: Arc::new(shifted),
            shift: w,
            spec,
            u0,
            grid,
            space,
            forcing: None,
            noise_forcing: None,
        })
    }

    pub fn with_shift(mut self, w: f64) -> Result<Self> {
        if !w.is_finite() {
            return invalid("shift must be finite");
        }
        let shifted = self.operator.shifted(w)?;
        if !shifted.invertible() {
            return Err(Error::Precondition(format!("A + {w} is not invertible")));
        }
        self.shifted = Arc::new(shifted);
        self.shift = w;
        Ok(self)
    }

    /// Deterministic `f`, an `n × 1` step function evaluated at interval midpoints.
    pub fn with_forcing(mut self, f: StepFunction) -> Result<Self> {
        if f.dim() != self.dim() || f.width() != 1 {
            return invalid("forcing must be n × 1");
        }
        self.forcing = Some(f);
        Ok(self)
    }

    /// Deterministic `b`, an `n × m` step function evaluated at interval midpoints.
    pub fn with_noise_forcing(mut self, b: StepFunction) -> Result<Self> {
        if b.dim() != self.dim() || b.width() != self.spec.noise_dim() {
            return invalid("noise forcing must be n × noise_dim");
        }
        self.noise_forcing = Some(b);
        Ok(self)
    }

    pub fn operator(&self) -> &Arc<SectorialOp> {
        &self.operator
    }

    pub fn shifted_operator(&self) -> &Arc<SectorialOp> {
        &self.shifted
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn spec(&self) -> &LipschitzSpec {
        &self.spec
    }

    pub fn initial(&self) -> &InitialData {
        &self.u0
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn space(&self) -> &SpaceModel {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.grid.end()
    }

    pub fn is_deterministic(&self) -> bool {
        !self.spec.has_diffusion() && self.noise_forcing.is_none()
    }

    /// `f` on interval `i` of the problem grid.
    pub fn forcing_at(&self, i: usize) -> DVector<f64> {
        let (a, b) = self.grid.interval(i);
        match &self.forcing {
            Some(f) => f.eval(0.5 * (a + b)).column(0).clone_owned(),
            None => DVector::zeros(self.dim()),
        }
    }

    /// `b` on interval `i` of the problem grid.
    pub fn noise_forcing_at(&self, i: usize) -> DMatrix<f64> {
        let (a, b) = self.grid.interval(i);
        match &self.noise_forcing {
            Some(g) => g.eval(0.5 * (a + b)),
            None => DMatrix::zeros(self.dim(), self.spec.noise_dim()),
        }
    }

    /// `F(t, x) + w x`.
    pub fn shifted_drift(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let f = self.spec.drift_at(t, x);
        if self.shift == 0.0 {
            f
        } else {
            f + x * self.shift
        }
    }

    /// `L_F K* + L_B K⋄` for the declared constants.
    pub fn contraction_factor(&self, k: &RegularityConstants) -> f64 {
        k.factor(self.spec.l_f, self.spec.l_b)
    }
}

/// Measured norms of `g ↦ S_w ∗ g` into `γ(X₁)` and `G ↦ S_w ⋄ G` from
/// `γ(H, X_{1/2})` into `L²(Ω; γ(X₁))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityConstants {
    pub k_star: f64,
    pub k_diamond: f64,
}

impl RegularityConstants {
    pub fn factor(&self, l_f: f64, l_b: f64) -> f64 {
        l_f * self.k_star + l_b * self.k_diamond
    }
}

/// Monte Carlo samples and grid steps used for `K⋄`.
pub const DIAMOND_SAMPLES: usize = 256;
pub const DIAMOND_STEPS: usize = 64;

/// Randomized lower bounds for both constants of the shifted operator.
pub fn measure_constants(problem: &SEEProblem, trials: usize, seed: u64) -> Result<RegularityConstants> {
    let a = problem.shifted_operator();
    if !a.invertible() {
        return Err(Error::Precondition("shifted operator is not invertible".into()));
    }
    let k_star = maxreg_constant(a, problem.space(), trials, seed)?.constant;
    let k_diamond =
        stoch_maxreg_constant(a, problem.space(), trials, DIAMOND_SAMPLES, DIAMOND_STEPS, 2.0, seed)?.constant;
    Ok(RegularityConstants { k_star, k_diamond })
}
