use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{invalid, Result};

/// Measure attached to a time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    /// dt
    Lebesgue,
    /// dt / t
    DtOverT,
    /// σ^β dσ
    Power(f64),
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Lebesgue => write!(f, "lebesgue"),
            Weight::DtOverT => write!(f, "dt_over_t"),
            Weight::Power(b) => write!(f, "power({b})"),
        }
    }
}

impl Weight {
    pub fn parse(s: &str) -> Option<Weight> {
        let s = s.trim();
        match s {
            "lebesgue" => Some(Weight::Lebesgue),
            "dt_over_t" => Some(Weight::DtOverT),
            _ => {
                let inner = s.strip_prefix("power(")?.strip_suffix(')')?;
                inner.trim().parse().ok().map(Weight::Power)
            }
        }
    }

    /// Exact measure of (a, b).
    pub fn measure(&self, a: f64, b: f64) -> f64 {
        match *self {
            Weight::Lebesgue => b - a,
            Weight::DtOverT => (b / a).ln(),
            Weight::Power(beta) => {
                if (beta + 1.0).abs() < 1e-14 {
                    (b / a).ln()
                } else {
                    let e = beta + 1.0;
                    (b.powf(e) - a.powf(e)) / e
                }
            }
        }
    }

    fn needs_positive_origin(&self) -> bool {
        match *self {
            Weight::Lebesgue => false,
            Weight::DtOverT => true,
            Weight::Power(beta) => beta <= -1.0,
        }
    }
}

/// Strictly increasing knots with a measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    knots: Vec<f64>,
    weight: Weight,
}

impl TimeGrid {
    pub fn new(knots: Vec<f64>, weight: Weight) -> Result<Self> {
        if knots.len() < 2 {
            return invalid("a grid needs at least two knots");
        }
        if knots.iter().any(|t| !t.is_finite()) {
            return invalid("non-finite knot");
        }
        if knots[0] < 0.0 {
            return invalid("knots must be nonnegative");
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("knots must be strictly increasing");
        }
        if weight.needs_positive_origin() && knots[0] <= 0.0 {
            return invalid(format!("weight {weight} requires t_0 > 0"));
        }
        if let Weight::Power(b) = weight {
            if !b.is_finite() {
                return invalid("power weight exponent must be finite");
            }
        }
        Ok(TimeGrid { knots, weight })
    }

    pub fn uniform(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if n == 0 || !(t1 > t0) {
            return invalid("uniform grid needs n > 0 and t1 > t0");
        }
        let h = (t1 - t0) / n as f64;
        let mut k: Vec<f64> = (0..=n).map(|i| t0 + h * i as f64).collect();
        k[n] = t1;
        TimeGrid::new(k, Weight::Lebesgue)
    }

    /// Geometric knots from t0 to t1 with `per_decade` intervals per decade.
    pub fn log_spaced(t0: f64, t1: f64, per_decade: usize, weight: Weight) -> Result<Self> {
        if !(t0 > 0.0 && t1 > t0) || per_decade == 0 {
            return invalid("log grid needs 0 < t0 < t1");
        }
        let decades = (t1 / t0).log10();
        let n = ((decades * per_decade as f64).ceil() as usize).max(1);
        let r = (t1 / t0).ln() / n as f64;
        let mut k: Vec<f64> = (0..=n).map(|i| t0 * (r * i as f64).exp()).collect();
        k[n] = t1;
        TimeGrid::new(k, weight)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn weight(&self) -> Weight {
        self.weight
    }

    pub fn with_weight(&self, weight: Weight) -> Result<Self> {
        TimeGrid::new(self.knots.clone(), weight)
    }

    /// Number of intervals.
    pub fn len(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.knots[i], self.knots[i + 1])
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.knots.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn measure(&self, i: usize) -> f64 {
        let (a, b) = self.interval(i);
        self.weight.measure(a, b)
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn min_step(&self) -> f64 {
        self.intervals().map(|(a, b)| b - a).fold(f64::INFINITY, f64::min)
    }

    /// Uniform up to relative rounding.
    pub fn is_uniform(&self) -> bool {
        let h = (self.end() - self.start()) / self.len() as f64;
        self.intervals().all(|(a, b)| ((b - a) - h).abs() <= 1e-9 * h)
    }

    /// Grid with extra knots inserted; returns the new grid and, for every new
    /// interval, the index of the old interval containing it.
    pub fn refine(&self, points: &[f64]) -> (TimeGrid, Vec<usize>) {
        let (t0, t1) = (self.start(), self.end());
        let mut extra: Vec<f64> = points.iter().cloned().filter(|p| *p > t0 && *p < t1).collect();
        extra.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut knots = Vec::with_capacity(self.knots.len() + extra.len());
        let mut owner = Vec::new();
        let mut e = 0;
        for i in 0..self.len() {
            let (a, b) = self.interval(i);
            knots.push(a);
            while e < extra.len() && extra[e] <= a {
                e += 1;
            }
            while e < extra.len() && extra[e] < b {
                let p = extra[e];
                if p > *knots.last().unwrap() {
                    owner.push(i);
                    knots.push(p);
                }
                e += 1;
            }
            owner.push(i);
        }
        knots.push(t1);
        (TimeGrid { knots, weight: self.weight }, owner)
    }

    /// Index of the interval containing t (right-closed at the last knot).
    pub fn locate(&self, t: f64) -> Option<usize> {
        if t < self.start() || t > self.end() {
            return None;
        }
        let i = self.knots.partition_point(|k| *k <= t);
        Some(i.saturating_sub(1).min(self.len() - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn validation() {
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0], Weight::Lebesgue).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0], Weight::DtOverT).is_err());
        assert!(TimeGrid::new(vec![-1.0, 1.0], Weight::Lebesgue).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0], Weight::Power(-1.5)).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0], Weight::Power(0.5)).is_ok());
    }

    #[test]
    fn exact_measures() {
        let g = TimeGrid::new(vec![1.0, 2.0, 4.0], Weight::DtOverT).unwrap();
        assert_relative_eq!(g.measure(1), 2f64.ln());
        let g = TimeGrid::new(vec![0.0, 2.0], Weight::Power(2.0)).unwrap();
        assert_relative_eq!(g.measure(0), 8.0 / 3.0);
        let g = TimeGrid::new(vec![1.0, 3.0], Weight::Power(-1.0)).unwrap();
        assert_relative_eq!(g.measure(0), 3f64.ln());
    }

    #[test]
    fn refine_maps_owners() {
        let g = TimeGrid::uniform(0.0, 2.0, 2).unwrap();
        let (r, own) = g.refine(&[0.5, 1.0, 1.5, 3.0, -1.0]);
        assert_eq!(r.knots(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(own, vec![0, 0, 1, 1]);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = TimeGrid::log_spaced(1e-3, 1e3, 8, Weight::DtOverT).unwrap();
        assert_eq!(g.len(), 48);
        assert_relative_eq!(g.end(), 1e3);
        let total: f64 = (0..g.len()).map(|i| g.measure(i)).sum();
        assert_relative_eq!(total, 1e6f64.ln(), max_relative = 1e-12);
    }
}
