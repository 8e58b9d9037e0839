use std::f64::consts::PI;

use rayon::prelude::*;

use super::field::{SpectralField, Transform};
use super::noise::NoisePreset;
use crate::error::{Error, Result};
use crate::gamma::{TimeGrid, Weight};
use crate::linalg::C64;
use crate::rng::{batch_mean, MeanEstimate};
use crate::stochastic::CylindricalBM;

/// Largest admissible `c² K² dt`, with `c` the coefficient of `Du` in the noise.
pub const STABILITY_BOUND: f64 = 4.0;
/// Stochastic parabolicity needs `sup |b|² < 2`.
pub const PARABOLICITY_LIMIT: f64 = 2.0;

/// Exponential Euler for `du = Δu dt + B(u) dW`:
/// `û_k ← e^{−|k|²dt}(û_k + Σ_n (B_n(u))^_k dw_n)`, with `B(u)` formed on
/// the collocation grid.
#[derive(Debug, Clone)]
pub struct HeatStepper {
    template: SpectralField,
    transform: Transform,
    noise: NoisePreset,
    b_grid: Vec<[f64; 2]>,
    du_coeff: f64,
}

impl HeatStepper {
    pub fn new(template: &SpectralField, noise: &NoisePreset) -> Result<Self> {
        let transform = template.transform();
        let n = template.points_per_axis();
        let h = 2.0 * PI / n as f64;
        let d = template.dim();
        let (b_grid, du_coeff) = match noise {
            NoisePreset::Gradient(b) => {
                let grid: Vec<[f64; 2]> = (0..transform.points())
                    .map(|j| {
                        let x = if d == 1 { vec![j as f64 * h] } else { vec![(j / n) as f64 * h, (j % n) as f64 * h] };
                        let mut v = b(&x);
                        if d == 1 {
                            v[1] = 0.0;
                        }
                        v
                    })
                    .collect();
                if grid.iter().any(|v| !(v[0].is_finite() && v[1].is_finite())) {
                    return Err(Error::InvalidConfig("gradient coefficient is not finite".into()));
                }
                let c = grid.iter().map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt()).fold(0.0, f64::max);
                (grid, c)
            }
            NoisePreset::Sequence { l2, .. } => (Vec::new(), *l2),
        };
        Ok(HeatStepper { template: template.like(), transform, noise: noise.clone(), b_grid, du_coeff })
    }

    pub fn noise_dim(&self) -> usize {
        self.noise.noise_dim()
    }

    /// `sup |b|²` for gradient noise, `L_{g,2}²` for sequence noise.
    pub fn parabolicity_index(&self) -> f64 {
        self.du_coeff * self.du_coeff
    }

    pub fn is_parabolic(&self) -> bool {
        self.parabolicity_index() < PARABOLICITY_LIMIT
    }

    /// Rejects steps with `c² K² dt > STABILITY_BOUND`.
    pub fn check_dt(&self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig("time step must be positive".into()));
        }
        let k = self.template.k_max() as f64;
        let v = self.parabolicity_index() * k * k * dt;
        if v > STABILITY_BOUND {
            return Err(Error::InvalidConfig(format!(
                "noise step c²K²dt = {v:.4} exceeds {STABILITY_BOUND}; refine the time grid"
            )));
        }
        Ok(())
    }

    fn check_field(&self, u: &SpectralField) -> Result<()> {
        if u.dim() != self.template.dim()
            || u.k_max() != self.template.k_max()
            || u.points_per_axis() != self.template.points_per_axis()
        {
            return Err(Error::InvalidInput("field layout differs from the stepper".into()));
        }
        Ok(())
    }

    /// `B_n(u)` projected onto the retained modes, one vector per noise term.
    pub fn noise_terms(&self, u: &SpectralField) -> Vec<Vec<C64>> {
        let t = &self.transform;
        let d = u.dim();
        let grads: Vec<Vec<f64>> = (0..d).map(|a| u.derivative(t, a)).collect();
        match &self.noise {
            NoisePreset::Gradient(_) => {
                let vals: Vec<f64> = (0..t.points())
                    .map(|j| (0..d).map(|a| self.b_grid[j][a] * grads[a][j]).sum())
                    .collect();
                vec![u.project(t, &vals)]
            }
            NoisePreset::Sequence { g, m, .. } => {
                let vals = u.collocation(t);
                let mut out = vec![vec![0.0; t.points()]; *m];
                for j in 0..t.points() {
                    let mut du = [0.0; 2];
                    for a in 0..d {
                        du[a] = grads[a][j];
                    }
                    let gv = g(vals[j], du);
                    for n in 0..*m {
                        out[n][j] = gv[n];
                    }
                }
                out.iter().map(|v| u.project(t, v)).collect()
            }
        }
    }

    /// One step in place.
    pub fn step(&self, u: &mut SpectralField, dt: f64, dw: &[f64]) -> Result<()> {
        self.check_field(u)?;
        if dw.len() != self.noise_dim() {
            return Err(Error::InvalidInput(format!("expected {} increments, got {}", self.noise_dim(), dw.len())));
        }
        if dw.iter().any(|w| *w != 0.0) {
            let terms = self.noise_terms(u);
            let modes = u.modes_mut();
            for (term, w) in terms.iter().zip(dw) {
                for (c, b) in modes.iter_mut().zip(term) {
                    *c += b * *w;
                }
            }
        }
        for i in 0..u.modes().len() {
            let decay = (-u.k2(i) * dt).exp();
            u.modes_mut()[i] *= decay;
        }
        u.enforce_reality();
        Ok(())
    }
}

/// Result of a single step, with the parabolicity flag of the noise.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub field: SpectralField,
    pub parabolic: bool,
}

pub fn spectral_heat_step(field: &SpectralField, noise: &NoisePreset, dt: f64, dw: &[f64]) -> Result<StepOutcome> {
    let stepper = HeatStepper::new(field, noise)?;
    stepper.check_dt(dt)?;
    let mut out = field.clone();
    stepper.step(&mut out, dt, dw)?;
    Ok(StepOutcome { field: out, parabolic: stepper.is_parabolic() })
}

/// Trajectories of the spectral heat equation at every grid knot.
#[derive(Debug, Clone)]
pub struct HeatEnsemble {
    pub grid: TimeGrid,
    pub paths: Vec<Vec<SpectralField>>,
    /// False when the noise violates stochastic parabolicity; moments may grow.
    pub parabolic: bool,
    pub warnings: Vec<String>,
}

impl HeatEnsemble {
    pub fn samples(&self) -> usize {
        self.paths.len()
    }

    pub fn terminal(&self, sample: usize) -> &SpectralField {
        self.paths[sample].last().expect("paths contain the initial value")
    }
}

/// Runs `samples` paths on a Lebesgue grid driven by `CylindricalBM(grid, m, samples, seed)`,
/// so runs on nested dyadic grids with the same seed share Brownian paths.
pub fn simulate(u0: &SpectralField, noise: &NoisePreset, grid: &TimeGrid, samples: usize, seed: u64) -> Result<HeatEnsemble> {
    if grid.weight() != Weight::Lebesgue {
        return Err(Error::InvalidConfig("heat runs need a Lebesgue grid".into()));
    }
    let w = CylindricalBM::new(grid, noise.noise_dim(), samples, seed)?;
    simulate_with(u0, noise, &w)
}

pub fn simulate_with(u0: &SpectralField, noise: &NoisePreset, w: &CylindricalBM) -> Result<HeatEnsemble> {
    let stepper = HeatStepper::new(u0, noise)?;
    if w.noise_dim() != stepper.noise_dim() {
        return Err(Error::InvalidConfig("Brownian motion dimension differs from the noise".into()));
    }
    let grid = w.grid().clone();
    for i in 0..grid.len() {
        let (a, b) = grid.interval(i);
        stepper.check_dt(b - a)?;
    }
    let mut warnings = Vec::new();
    if !stepper.is_parabolic() {
        warnings.push(format!(
            "stochastic parabolicity fails: index {:.4} ≥ {PARABOLICITY_LIMIT}; second moments may grow",
            stepper.parabolicity_index()
        ));
    }
    let paths = (0..w.samples())
        .into_par_iter()
        .map(|s| {
            let inc = w.increments(s);
            let mut u = u0.clone();
            let mut path = Vec::with_capacity(grid.len() + 1);
            path.push(u.clone());
            for i in 0..grid.len() {
                let (a, b) = grid.interval(i);
                let dw: Vec<f64> = inc.column(i).iter().copied().collect();
                stepper.step(&mut u, b - a, &dw)?;
                path.push(u.clone());
            }
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HeatEnsemble { grid, paths, parabolic: stepper.is_parabolic(), warnings })
}

/// Per-unit-time growth rate of `E|û_k|²` from the exponential Euler
/// recursion with constant `b`: `(ln(1 + (b·k)²dt) − 2|k|²dt)/dt`.
pub fn discrete_growth_rate(b: [f64; 2], k: [i64; 2], dt: f64) -> f64 {
    let bk = b[0] * k[0] as f64 + b[1] * k[1] as f64;
    let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
    ((bk * bk * dt).ln_1p() - 2.0 * k2 * dt) / dt
}

/// `(b·k)² − 2|k|²`.
pub fn continuum_growth_rate(b: [f64; 2], k: [i64; 2]) -> f64 {
    let bk = b[0] * k[0] as f64 + b[1] * k[1] as f64;
    bk * bk - 2.0 * (k[0] * k[0] + k[1] * k[1]) as f64
}

/// Rate `ln(E|û_k(T)|² / |û_k(0)|²)/T` with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthEstimate {
    pub rate: f64,
    pub stderr: f64,
    pub moment: MeanEstimate,
}

pub fn second_moment_growth(ens: &HeatEnsemble, k: &[i64]) -> Result<GrowthEstimate> {
    let first = &ens.paths[0][0];
    let m0 = first.mode(k).norm_sqr();
    if m0 == 0.0 {
        return Err(Error::InvalidInput(format!("mode {k:?} of the initial value is zero")));
    }
    let xs: Vec<f64> = (0..ens.samples()).map(|s| ens.terminal(s).mode(k).norm_sqr() / m0).collect();
    let moment = batch_mean(&xs);
    let t = ens.grid.end() - ens.grid.start();
    Ok(GrowthEstimate { rate: moment.mean.ln() / t, stderr: moment.stderr / (moment.mean * t), moment })
}
