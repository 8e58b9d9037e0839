//! Run configuration: a TOML document of `key = value` lines under
//! `[section]` headers. Every key has a default; unknown keys are errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat::{DeterministicExponents, StochasticExponents};
use crate::rng;

/// Stream family for per-suite seeds derived from the global seed.
const SUITE_TAG: u64 = 0x5e_ed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Suite run when the subcommand does not name one.
    pub suite: Option<String>,
    pub seed: u64,
    pub out: Option<String>,
    pub gamma: GammaConfig,
    pub sectorial: SectorialConfig,
    pub maxreg: MaxregConfig,
    pub stochastic: StochasticConfig,
    pub see: SeeConfig,
    pub heat: HeatConfig,
    pub tables: TablesConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            suite: None,
            seed: 1,
            out: None,
            gamma: GammaConfig::default(),
            sectorial: SectorialConfig::default(),
            maxreg: MaxregConfig::default(),
            stochastic: StochasticConfig::default(),
            see: SeeConfig::default(),
            heat: HeatConfig::default(),
            tables: TablesConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaConfig {
    pub seed: Option<u64>,
    /// Step functions compared against the Hilbert formula.
    pub cases: usize,
    pub max_dim: usize,
    pub max_intervals: usize,
    /// Gaussian samples per Monte Carlo estimate; at least 2.
    pub samples: usize,
    /// Seconds allowed for the Monte Carlo batch.
    pub time_limit: f64,
    pub hardy_cases: usize,
    pub alphas: Vec<f64>,
    pub hardy_slack: f64,
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig {
            seed: None,
            cases: 50,
            max_dim: 16,
            max_intervals: 32,
            samples: 4096,
            time_limit: 10.0,
            hardy_cases: 50,
            alphas: vec![0.25, 0.5, 1.0, 1.5],
            hardy_slack: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SectorialConfig {
    pub seed: Option<u64>,
    /// Scalar operators for the `z^{1/2}e^{−z}` square function.
    pub lambdas: Vec<f64>,
    pub scalar_tol: f64,
    pub diagonal: Vec<f64>,
    pub diagonal_tol: f64,
    pub q_values: Vec<f64>,
}

impl Default for SectorialConfig {
    fn default() -> Self {
        SectorialConfig {
            seed: None,
            lambdas: vec![0.1, 1.0, 30.0],
            scalar_tol: 1e-4,
            diagonal: vec![0.5, 1.0, 4.0],
            diagonal_tol: 1e-8,
            q_values: vec![1.5, 2.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaxregConfig {
    pub seed: Option<u64>,
    pub diagonal: Vec<f64>,
    pub trials: usize,
    pub constant_tol: f64,
    pub route_cases: usize,
    pub route_tol: f64,
    pub trace_cases: usize,
    pub trace_tol: f64,
    pub chain_cases: usize,
}

impl Default for MaxregConfig {
    fn default() -> Self {
        MaxregConfig {
            seed: None,
            diagonal: vec![0.5, 1.0, 3.0, 10.0],
            trials: 100,
            constant_tol: 1.05,
            route_cases: 50,
            route_tol: 1e-5,
            trace_cases: 5,
            trace_tol: 1e-8,
            chain_cases: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StochasticConfig {
    pub seed: Option<u64>,
    pub iso_cases: usize,
    pub iso_steps: usize,
    pub iso_samples: usize,
    /// Relative change allowed for p ∈ {1/2, 4} under sample doubling.
    pub doubling_tol: f64,
    pub diagonal: Vec<f64>,
    pub constant_trials: usize,
    pub constant_samples: usize,
    pub constant_steps: usize,
    pub constant_tol: f64,
    pub endpoint_theta: f64,
    /// Coarse steps on `[0, 8]` for the time-regularity check; the fine grid doubles them.
    pub spacetime_steps: usize,
    pub spacetime_samples: usize,
}

impl Default for StochasticConfig {
    fn default() -> Self {
        StochasticConfig {
            seed: None,
            iso_cases: 50,
            iso_steps: 32,
            iso_samples: 2048,
            doubling_tol: 0.15,
            diagonal: vec![0.5, 1.0, 3.0],
            constant_trials: 4,
            constant_samples: 1024,
            constant_steps: 256,
            constant_tol: 0.05,
            endpoint_theta: 0.49,
            spacetime_steps: 128,
            spacetime_samples: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeeConfig {
    pub seed: Option<u64>,
    pub lambda: f64,
    pub beta: f64,
    pub steps: usize,
    pub samples: usize,
    pub ratio_slack: f64,
    /// Diffusion strength whose factor must be refused.
    pub refuse_beta: f64,
    pub split_steps: usize,
    pub split_eps: Vec<f64>,
    pub cauchy_steps: usize,
    pub cauchy_samples: usize,
    pub cauchy_eps: Vec<f64>,
}

impl Default for SeeConfig {
    fn default() -> Self {
        SeeConfig {
            seed: None,
            lambda: 1.0,
            beta: 0.5,
            steps: 256,
            samples: 4000,
            ratio_slack: 0.05,
            refuse_beta: 1.6,
            split_steps: 2048,
            split_eps: vec![0.5, 0.25, 0.1, 0.05],
            cauchy_steps: 512,
            cauchy_samples: 64,
            cauchy_eps: vec![0.4, 0.2, 0.1, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatConfig {
    pub seed: Option<u64>,
    pub b_values: Vec<f64>,
    pub growth_samples: usize,
    pub growth_steps: usize,
    pub k_max: usize,
    pub steps: usize,
    pub horizon: f64,
    pub samples: usize,
    pub q_values: Vec<f64>,
    pub refinement_tol: f64,
    pub nemytskii_pairs: usize,
}

impl Default for HeatConfig {
    fn default() -> Self {
        HeatConfig {
            seed: None,
            b_values: vec![1.0, 1.8],
            growth_samples: 2048,
            growth_steps: 256,
            k_max: 16,
            steps: 256,
            horizon: 0.5,
            samples: 64,
            q_values: vec![1.5, 2.0, 4.0],
            refinement_tol: 0.05,
            nemytskii_pairs: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TablesConfig {
    pub seed: Option<u64>,
    pub deterministic_thetas: Vec<f64>,
    pub stochastic_thetas: Vec<f64>,
    pub time_tol: f64,
    pub deterministic: DeterministicExponents,
    pub stochastic: StochasticExponents,
}

impl Default for TablesConfig {
    fn default() -> Self {
        TablesConfig {
            seed: None,
            deterministic_thetas: vec![0.625, 0.75, 0.875, 1.0],
            stochastic_thetas: vec![0.125, 0.25, 0.375],
            time_tol: 0.05,
            deterministic: DeterministicExponents::default(),
            stochastic: StochasticExponents::default(),
        }
    }
}

/// Suites in run order.
pub const SUITES: [&str; 7] = ["gamma-norm", "sectorial", "maxreg", "stochastic", "solve-see", "heat", "tables"];

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the offending line or field.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Seed of one suite: its own `seed` key, otherwise derived from the global seed.
    pub fn suite_seed(&self, suite: &str) -> u64 {
        let own = match suite {
            "gamma-norm" => self.gamma.seed,
            "sectorial" => self.sectorial.seed,
            "maxreg" => self.maxreg.seed,
            "stochastic" => self.stochastic.seed,
            "solve-see" => self.see.seed,
            "heat" => self.heat.seed,
            "tables" => self.tables.seed,
            _ => None,
        };
        let index = SUITES.iter().position(|s| *s == suite).unwrap_or(SUITES.len()) as u64;
        own.unwrap_or_else(|| rng::mix(self.seed, SUITE_TAG + index))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::InvalidConfig(format!("{field}: {msg}")));
        if let Some(s) = &self.suite {
            if s != "all" && !SUITES.contains(&s.as_str()) {
                return bad("suite", &format!("unknown suite '{s}'"));
            }
        }
        let g = &self.gamma;
        if g.samples < 2 {
            return bad("gamma.samples", "Monte Carlo γ-norms need at least 2 samples");
        }
        if g.cases == 0 || g.max_dim == 0 || g.max_intervals == 0 || g.hardy_cases == 0 {
            return bad("gamma", "case counts, dimensions and interval counts must be positive");
        }
        if g.alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return bad("gamma.alphas", "Hardy exponents must be positive");
        }
        if self.sectorial.lambdas.iter().chain(&self.sectorial.diagonal).any(|l| !(*l > 0.0 && l.is_finite())) {
            return bad("sectorial", "eigenvalues must be positive");
        }
        if self.sectorial.q_values.iter().any(|q| !(*q >= 1.0)) {
            return bad("sectorial.q_values", "exponents must be at least 1");
        }
        let m = &self.maxreg;
        if m.diagonal.is_empty() || m.diagonal.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return bad("maxreg.diagonal", "eigenvalues must be positive");
        }
        if m.trials == 0 || m.route_cases == 0 || m.trace_cases == 0 || m.chain_cases == 0 {
            return bad("maxreg", "case counts must be positive");
        }
        let s = &self.stochastic;
        if s.iso_samples < 2 || s.constant_samples < 2 || s.spacetime_samples < 2 {
            return bad("stochastic", "Monte Carlo checks need at least 2 samples");
        }
        if s.iso_cases == 0 || s.iso_steps == 0 || s.constant_trials == 0 || s.constant_steps == 0 || s.spacetime_steps == 0 {
            return bad("stochastic", "case counts and steps must be positive");
        }
        if !(s.endpoint_theta > 0.25 && s.endpoint_theta < 0.5) {
            return bad("stochastic.endpoint_theta", "must lie in (1/4, 1/2)");
        }
        let e = &self.see;
        if !(e.lambda > 0.0) || e.steps == 0 || e.samples < 2 || e.split_steps == 0 || e.cauchy_steps == 0 {
            return bad("see", "λ, steps and samples must be positive (samples ≥ 2)");
        }
        if e.cauchy_eps.len() < 3 || e.split_eps.is_empty() {
            return bad("see.cauchy_eps", "at least three tolerances are needed");
        }
        if e.split_eps.iter().chain(&e.cauchy_eps).any(|v| !(*v > 0.0)) {
            return bad("see", "split tolerances must be positive");
        }
        let h = &self.heat;
        if h.growth_samples < 2 || h.samples < 2 || h.k_max == 0 || h.steps == 0 || h.growth_steps == 0 {
            return bad("heat", "samples (≥ 2), mode cutoff and steps must be positive");
        }
        if !(h.horizon > 0.0) || h.nemytskii_pairs == 0 {
            return bad("heat", "horizon and pair count must be positive");
        }
        if h.q_values.iter().any(|q| !(*q >= 1.0 && q.is_finite())) {
            return bad("heat.q_values", "exponents must be finite and at least 1");
        }
        let t = &self.tables;
        if t.deterministic.levels.len() < crate::heat::exponents::MIN_LEVELS {
            return bad("tables.deterministic.levels", "at least 3 refinement levels are needed");
        }
        Ok(())
    }
}
