use std::sync::Arc;

use super::field::{SpectralField, Transform};
use super::sqfn::sqfn_values;
use super::step::HeatEnsemble;
use crate::error::{Error, Result};
use crate::gamma::TimeGrid;
use crate::linalg::C64;
use crate::rng::{self, tag};

pub type Pointwise = Arc<dyn Fn(f64, [f64; 2], [[f64; 2]; 2]) -> f64 + Send + Sync>;

/// `u ↦ f(u, Du, D²u)` with `|f(a) − f(b)| ≤ l1|Δu| + l2|ΔDu| + l3|ΔD²u|`
/// (Euclidean and Frobenius norms).
#[derive(Clone)]
pub struct NemytskiiMap {
    f: Pointwise,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl std::fmt::Debug for NemytskiiMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NemytskiiMap {{ l1: {}, l2: {}, l3: {} }}", self.l1, self.l2, self.l3)
    }
}

/// `u`, `Du` and `D²u` on the collocation grid.
#[derive(Debug, Clone)]
pub struct Jet {
    pub u: Vec<f64>,
    pub du: Vec<[f64; 2]>,
    pub d2u: Vec<[[f64; 2]; 2]>,
}

pub fn jet(u: &SpectralField, t: &Transform) -> Jet {
    let d = u.dim();
    let p = t.points();
    let mut du = vec![[0.0; 2]; p];
    let mut d2u = vec![[[0.0; 2]; 2]; p];
    for a in 0..d {
        for (j, v) in u.derivative(t, a).into_iter().enumerate() {
            du[j][a] = v;
        }
        for b in 0..d {
            for (j, v) in u.second_derivative(t, a, b).into_iter().enumerate() {
                d2u[j][a][b] = v;
            }
        }
    }
    Jet { u: u.collocation(t), du, d2u }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn dist22(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> f64 {
    (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| (a[i][j] - b[i][j]).powi(2)).sum::<f64>().sqrt()
}

impl NemytskiiMap {
    pub fn new(f: impl Fn(f64, [f64; 2], [[f64; 2]; 2]) -> f64 + Send + Sync + 'static, l1: f64, l2: f64, l3: f64) -> Result<Self> {
        if [l1, l2, l3].iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidConfig("Lipschitz constants must be finite and nonnegative".into()));
        }
        Ok(NemytskiiMap { f: Arc::new(f), l1, l2, l3 })
    }

    pub fn eval_jet(&self, j: &Jet) -> Vec<f64> {
        (0..j.u.len()).map(|i| (self.f)(j.u[i], j.du[i], j.d2u[i])).collect()
    }

    /// `f(u, Du, D²u)` on the collocation grid.
    pub fn apply(&self, u: &SpectralField, t: &Transform) -> Vec<f64> {
        self.eval_jet(&jet(u, t))
    }

    /// Collocation values at every knot of every sample.
    pub fn apply_ensemble(&self, ens: &HeatEnsemble) -> Vec<Vec<Vec<f64>>> {
        let t = ens.paths[0][0].transform();
        ens.paths.iter().map(|p| p.iter().map(|u| self.apply(u, &t)).collect()).collect()
    }
}

/// Both sides of `‖f(φ₁) − f(φ₂)‖ ≤ C(l1‖φ₁ − φ₂‖ + l2‖Dφ₁ − Dφ₂‖ + l3‖D²φ₁ − D²φ₂‖)`
/// in the square-function norm, with `C = 1` on the collocation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NemytskiiReport {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `rhs − lhs` per pair.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    pub constant: f64,
}

/// Smooth random trajectory with modes `(a_k + b_k t)/(1 + |k|²)`.
fn random_path(template: &SpectralField, knots: &[f64], seed: u64, index: u64) -> Result<Vec<SpectralField>> {
    let mut r = rng::stream(seed, tag::LIPSCHITZ, index);
    let m = template.modes().len();
    let coef: Vec<(C64, C64)> = (0..m)
        .map(|_| {
            let mut z = || C64::new(rng::normal(&mut r), rng::normal(&mut r));
            (z(), z())
        })
        .collect();
    knots
        .iter()
        .map(|t| {
            let mut u = template.like();
            for i in 0..m {
                u.modes_mut()[i] = (coef[i].0 + coef[i].1 * *t) / (1.0 + template.k2(i));
            }
            u.enforce_reality();
            Ok(u)
        })
        .collect()
}

pub fn lipschitz_check(
    map: &NemytskiiMap,
    template: &SpectralField,
    grid: &TimeGrid,
    pairs: usize,
    seed: u64,
) -> Result<NemytskiiReport> {
    if pairs == 0 {
        return Err(Error::InvalidConfig("at least one pair is required".into()));
    }
    let t = template.transform();
    let knots = grid.knots();
    let q = template.q();
    let mut lhs = Vec::with_capacity(pairs);
    let mut rhs = Vec::with_capacity(pairs);
    for p in 0..pairs as u64 {
        let a = random_path(template, knots, seed, 2 * p)?;
        let dir = random_path(template, knots, seed, 2 * p + 1)?;
        let mut r = rng::stream(seed, tag::LIPSCHITZ, u64::MAX - p);
        let scale = 10f64.powf(-2.0 * rng::uniform(&mut r));
        let mut rows = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        for (ua, ud) in a.iter().zip(&dir) {
            let mut ub = ua.clone();
            ub.modes_mut().iter_mut().zip(ud.modes()).for_each(|(x, y)| *x += y * scale);
            let (ja, jb) = (jet(ua, &t), jet(&ub, &t));
            let (fa, fb) = (map.eval_jet(&ja), map.eval_jet(&jb));
            rows[0].push(fa.iter().zip(&fb).map(|(x, y)| x - y).collect::<Vec<f64>>());
            rows[1].push(ja.u.iter().zip(&jb.u).map(|(x, y)| x - y).collect());
            rows[2].push(ja.du.iter().zip(&jb.du).map(|(x, y)| dist2(*x, *y)).collect());
            rows[3].push(ja.d2u.iter().zip(&jb.d2u).map(|(x, y)| dist22(*x, *y)).collect());
        }
        let n: Vec<f64> = rows.iter().map(|v| sqfn_values(v, knots, q)).collect::<Result<_>>()?;
        lhs.push(n[0]);
        rhs.push(map.l1 * n[1] + map.l2 * n[2] + map.l3 * n[3]);
    }
    let margins: Vec<f64> = lhs.iter().zip(&rhs).map(|(l, r)| r - l).collect();
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    for (i, m) in margins.iter().enumerate() {
        if *m < -1e-9 * (1.0 + rhs[i]) {
            return Err(Error::SpecViolation(format!(
                "pair {i}: ‖f(φ₁) − f(φ₂)‖ = {:.6e} exceeds the declared bound {:.6e}",
                lhs[i], rhs[i]
            )));
        }
    }
    Ok(NemytskiiReport { lhs, rhs, margins, min_margin, constant: 1.0 })
}
