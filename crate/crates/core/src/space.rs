//! Finite-dimensional models of X: ℓ^q_n and the fractional domain scale.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::C64;
use crate::sectorial::SectorialOp;

/// Lebesgue exponent. `Infinity` is kept exact rather than a large q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn from_f64(q: f64) -> Result<Self> {
        if q.is_infinite() && q > 0.0 {
            Ok(Exponent::Infinity)
        } else if q.is_finite() && q >= 1.0 {
            Ok(Exponent::Finite(q))
        } else {
            invalid(format!("exponent q must lie in [1, inf], got {q}"))
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(q) => q,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    pub fn is_hilbert(self) -> bool {
        matches!(self, Exponent::Finite(q) if q == 2.0)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(q) => write!(f, "{q}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceModel {
    pub dim: usize,
    pub exponent: Exponent,
    pub label: String,
}

impl SpaceModel {
    pub fn new(dim: usize, q: f64) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        Ok(SpaceModel { dim, exponent: Exponent::from_f64(q)?, label: format!("l^{q}_{dim}") })
    }

    pub fn hilbert(dim: usize) -> Self {
        SpaceModel { dim, exponent: Exponent::Finite(2.0), label: format!("l^2_{dim}") }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn q(&self) -> f64 {
        self.exponent.as_f64()
    }

    pub fn is_hilbert(&self) -> bool {
        self.exponent.is_hilbert()
    }

    /// ℓ^q norm; rejects NaN/Inf coordinates and wrong lengths.
    pub fn norm(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim {
            return invalid(format!("expected {} coordinates, got {}", self.dim, v.len()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return invalid("non-finite coordinate");
        }
        Ok(self.norm_unchecked(v))
    }

    pub fn norm_unchecked(&self, v: &[f64]) -> f64 {
        lq_norm(v.iter().map(|x| x.abs()), self.exponent)
    }

    /// ℓ^q norm of the moduli.
    pub fn norm_c(&self, v: &[C64]) -> f64 {
        lq_norm(v.iter().map(|z| z.norm()), self.exponent)
    }

    pub fn norm_vec(&self, v: &DVector<f64>) -> f64 {
        self.norm_unchecked(v.as_slice())
    }
}

pub(crate) fn lq_norm(abs: impl Iterator<Item = f64>, q: Exponent) -> f64 {
    match q {
        Exponent::Infinity => abs.fold(0.0, f64::max),
        Exponent::Finite(q) if q == 2.0 => {
            let v: Vec<f64> = abs.collect();
            let m = v.iter().cloned().fold(0.0, f64::max);
            if m == 0.0 {
                return 0.0;
            }
            m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt()
        }
        Exponent::Finite(q) if q == 1.0 => abs.sum(),
        Exponent::Finite(q) => {
            let v: Vec<f64> = abs.collect();
            let m = v.iter().cloned().fold(0.0, f64::max);
            if m == 0.0 {
                return 0.0;
            }
            m * v.iter().map(|x| (x / m).powf(q)).sum::<f64>().powf(1.0 / q)
        }
    }
}

/// X_α = D(A^α) normed by `‖A^α x‖`.
#[derive(Debug, Clone)]
pub struct DomainScale {
    pub base: SpaceModel,
    pub operator: Arc<SectorialOp>,
    pub alpha: f64,
    power: DMatrix<f64>,
}

impl DomainScale {
    pub fn new(base: SpaceModel, operator: Arc<SectorialOp>, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return invalid(format!("alpha must lie in [0, 1], got {alpha}"));
        }
        if operator.dim() != base.dim {
            return invalid("operator and space dimensions differ");
        }
        if !operator.spectrum_in_open_right_half_plane() {
            return Err(Error::Precondition(
                "fractional domain norms need spectrum in the open right half-plane".into(),
            ));
        }
        let power = operator.frac_power(alpha)?;
        Ok(DomainScale { base, operator, alpha, power })
    }

    pub fn power(&self) -> &DMatrix<f64> {
        &self.power
    }

    pub fn norm(&self, v: &DVector<f64>) -> Result<f64> {
        self.base.norm(v.as_slice())?;
        Ok(self.base.norm_vec(&(&self.power * v)))
    }
}

/// `‖A^α v‖` in the base norm.
pub fn domain_norm(v: &DVector<f64>, scale: &DomainScale) -> Result<f64> {
    scale.norm(v)
}
