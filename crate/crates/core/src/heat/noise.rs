use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Largest number of scalar Brownian motions in a sequence preset.
pub const MAX_SEQUENCE: usize = 8;

pub type GradientCoeff = Arc<dyn Fn(&[f64]) -> [f64; 2] + Send + Sync>;
/// `(u, Du) ↦ (g_1, …, g_m)`; entries past `m` are ignored.
pub type SequenceMap = Arc<dyn Fn(f64, [f64; 2]) -> [f64; MAX_SEQUENCE] + Send + Sync>;

/// Multiplicative noise `B(u) dW`.
#[derive(Clone)]
pub enum NoisePreset {
    /// `b(x)·∇u dw`, one scalar Brownian motion.
    Gradient(GradientCoeff),
    /// `Σ_n g_n(u, Du) dw_n` with `(Σ_n |g_n(x,a) − g_n(y,c)|²)^{1/2} ≤ l1|x−y| + l2|a−c|`.
    Sequence { g: SequenceMap, m: usize, l1: f64, l2: f64 },
}

impl std::fmt::Debug for NoisePreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoisePreset::Gradient(_) => write!(f, "Gradient(..)"),
            NoisePreset::Sequence { m, l1, l2, .. } => write!(f, "Sequence {{ m: {m}, l1: {l1}, l2: {l2} }}"),
        }
    }
}

impl NoisePreset {
    pub fn zero() -> Self {
        Self::constant_gradient([0.0, 0.0])
    }

    pub fn constant_gradient(b: [f64; 2]) -> Self {
        NoisePreset::Gradient(Arc::new(move |_| b))
    }

    pub fn gradient(b: impl Fn(&[f64]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        NoisePreset::Gradient(Arc::new(b))
    }

    pub fn sequence(
        g: impl Fn(f64, [f64; 2]) -> [f64; MAX_SEQUENCE] + Send + Sync + 'static,
        m: usize,
        l1: f64,
        l2: f64,
    ) -> Result<Self> {
        if m == 0 || m > MAX_SEQUENCE {
            return Err(Error::InvalidConfig(format!("sequence noise needs 1 to {MAX_SEQUENCE} terms, got {m}")));
        }
        if !(l1 >= 0.0 && l2 >= 0.0 && l1.is_finite() && l2.is_finite()) {
            return Err(Error::InvalidConfig("Lipschitz constants must be finite and nonnegative".into()));
        }
        Ok(NoisePreset::Sequence { g: Arc::new(g), m, l1, l2 })
    }

    pub fn noise_dim(&self) -> usize {
        match self {
            NoisePreset::Gradient(_) => 1,
            NoisePreset::Sequence { m, .. } => *m,
        }
    }
}

/// Largest ratio of `(Σ_n |Δg_n|²)^{1/2}` to `l1|Δx| + l2|Δa|` over random
/// pairs in `[−scale, scale]^{1+d}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceCheck {
    pub worst_ratio: f64,
    pub pairs: usize,
}

pub fn check_sequence(noise: &NoisePreset, d: usize, pairs: usize, scale: f64, seed: u64) -> Result<SequenceCheck> {
    let NoisePreset::Sequence { g, m, l1, l2 } = noise else {
        return Err(Error::InvalidInput("not a sequence preset".into()));
    };
    let mut r = rng::stream(seed, tag::HEAT, u64::MAX);
    let mut draw = || scale * (2.0 * rng::uniform(&mut r) - 1.0);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let (x, y) = (draw(), draw());
        let mut a = [0.0; 2];
        let mut c = [0.0; 2];
        for i in 0..d {
            a[i] = draw();
            c[i] = draw();
        }
        let (ga, gc) = (g(x, a), g(y, c));
        let lhs = (0..*m).map(|n| (ga[n] - gc[n]).powi(2)).sum::<f64>().sqrt();
        let da = ((a[0] - c[0]).powi(2) + (a[1] - c[1]).powi(2)).sqrt();
        let rhs = l1 * (x - y).abs() + l2 * da;
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst = worst.max(ratio);
    }
    if worst > 1.0 + 1e-9 {
        return Err(Error::SpecViolation(format!("sequence noise exceeds its Lipschitz constants by factor {worst:.6}")));
    }
    Ok(SequenceCheck { worst_ratio: worst, pairs })
}
