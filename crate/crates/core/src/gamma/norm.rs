use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use super::step::StepFunction;
use crate::error::{invalid, Error, Result};
use crate::linalg::psd_factor;
use crate::rng::{self, tag};
use crate::space::{lq_norm, Exponent, SpaceModel};

pub const DEFAULT_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    HilbertExact,
    SquareFunction,
    MonteCarlo,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::HilbertExact => "hilbert_exact",
            Method::SquareFunction => "square_function",
            Method::MonteCarlo => "monte_carlo",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    pub value: f64,
    pub method: Method,
    pub samples: usize,
    pub stderr: f64,
}

impl GammaEstimate {
    pub fn exact(value: f64, method: Method) -> Self {
        GammaEstimate { value, method, samples: 0, stderr: 0.0 }
    }
}

/// Which evaluator to use when a caller does not care.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormChoice {
    /// Hilbert formula for q = 2, square function for finite q, Monte Carlo for q = ∞.
    Auto,
    MonteCarlo { samples: usize, seed: u64 },
}

/// `sqrt(trace C)`; the γ-norm when X is Hilbert.
pub fn hilbert_from_cov(cov: &DMatrix<f64>) -> f64 {
    cov.trace().max(0.0).sqrt()
}

/// `‖(diag C)^{1/2}‖_q`.
pub fn sqfn_from_cov(cov: &DMatrix<f64>, q: Exponent) -> f64 {
    lq_norm((0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()), q)
}

/// Monte Carlo estimate of `(E‖Σ_k γ_k v_k‖²)^{1/2}` for the columns of `v`.
pub fn mc_from_columns(v: &DMatrix<f64>, space: &SpaceModel, samples: usize, seed: u64) -> Result<GammaEstimate> {
    if samples < 2 {
        return invalid("Monte Carlo needs at least 2 samples");
    }
    if v.iter().all(|x| *x == 0.0) {
        return Ok(GammaEstimate { value: 0.0, method: Method::MonteCarlo, samples, stderr: 0.0 });
    }
    // Reduce to an n×n factor when there are more columns than rows.
    let factor = if v.ncols() > v.nrows() { psd_factor(&(v * v.transpose())) } else { v.clone() };
    let k = factor.ncols();
    let sq: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|j| {
            let mut r = rng::stream(seed, tag::GAMMA_MC, j as u64);
            let mut xi = vec![0.0; k];
            rng::fill_normal(&mut r, &mut xi);
            let x = &factor * nalgebra::DVector::from_vec(xi);
            let n = space.norm_unchecked(x.as_slice());
            n * n
        })
        .collect();
    let est = rng::batch_mean(&sq);
    let (value, stderr) = rng::sqrt_estimate(est);
    Ok(GammaEstimate { value, method: Method::MonteCarlo, samples, stderr })
}

/// γ-norm of a centred Gaussian with covariance `cov`.
pub fn norm_from_cov(cov: &DMatrix<f64>, space: &SpaceModel, choice: NormChoice) -> Result<GammaEstimate> {
    match choice {
        NormChoice::Auto => match space.exponent {
            e if e.is_hilbert() => Ok(GammaEstimate::exact(hilbert_from_cov(cov), Method::HilbertExact)),
            Exponent::Finite(_) => Ok(GammaEstimate::exact(sqfn_from_cov(cov, space.exponent), Method::SquareFunction)),
            Exponent::Infinity => mc_from_columns(&psd_factor(cov), space, DEFAULT_SAMPLES, 0),
        },
        NormChoice::MonteCarlo { samples, seed } => mc_from_columns(&psd_factor(cov), space, samples, seed),
    }
}

pub fn gamma_norm_hilbert(f: &StepFunction) -> Result<GammaEstimate> {
    if !f.space().is_hilbert() {
        return Err(Error::MethodMismatch(format!("Hilbert formula needs q = 2, got q = {}", f.space().exponent)));
    }
    let mut s = 0.0;
    for (i, g) in f.values().iter().enumerate() {
        s += f.grid().measure(i) * g.norm_squared();
    }
    Ok(GammaEstimate::exact(s.sqrt(), Method::HilbertExact))
}

pub fn gamma_norm_mc(f: &StepFunction, samples: usize, seed: u64) -> Result<GammaEstimate> {
    mc_from_columns(&f.gaussian_columns(), f.space(), samples, seed)
}

pub fn gamma_norm_sqfn(f: &StepFunction) -> Result<GammaEstimate> {
    if f.space().exponent == Exponent::Infinity {
        return Err(Error::Unsupported("square function norm needs finite q".into()));
    }
    let n = f.dim();
    let mut d = vec![0.0; n];
    for (i, g) in f.values().iter().enumerate() {
        let mu = f.grid().measure(i);
        for r in 0..n {
            d[r] += mu * g.row(r).norm_squared();
        }
    }
    Ok(GammaEstimate::exact(lq_norm(d.iter().map(|x| x.sqrt()), f.space().exponent), Method::SquareFunction))
}

pub fn gamma_norm(f: &StepFunction, choice: NormChoice) -> Result<GammaEstimate> {
    match choice {
        NormChoice::Auto => match f.space().exponent {
            e if e.is_hilbert() => gamma_norm_hilbert(f),
            Exponent::Finite(_) => gamma_norm_sqfn(f),
            Exponent::Infinity => gamma_norm_mc(f, DEFAULT_SAMPLES, 0),
        },
        NormChoice::MonteCarlo { samples, seed } => gamma_norm_mc(f, samples, seed),
    }
}
