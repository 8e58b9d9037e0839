use nalgebra::{DMatrix, DMatrixView, DVector};
use rayon::prelude::*;

use super::problem::{RegularityConstants, SEEProblem};
use crate::error::{invalid, Error, Result};
use crate::gamma::sqfn_from_cov;
use crate::maxreg::PropagatorCache;
use crate::rng;
use crate::sectorial::{Propagator, SectorialOp};
use crate::space::SpaceModel;
use crate::stochastic::{CylindricalBM, PathEnsemble};

/// Starting iterate of the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicardInit {
    /// `U₀(t) = S(t)u₀`.
    Semigroup,
    /// `U₀(t) = u₀`.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub max_iter: usize,
    /// Absolute tolerance on the per-sample `γ(0,T;X₁)` increment.
    pub tol: f64,
    pub init: PicardInit,
    /// Refuse when the contraction factor is at least 1.
    pub enforce_smallness: bool,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { max_iter: 100, tol: 1e-10, init: PicardInit::Semigroup, enforce_smallness: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    pub iterations: usize,
    pub converged: bool,
    /// Largest per-sample `‖U_{k+1} − U_k‖_{γ(0,T;X₁)}`, per iteration.
    pub increments: Vec<f64>,
    /// `‖U_{k+1} − U_k‖ / ‖U_k − U_{k−1}‖` in `L²(Ω; γ(0,T;X₁))`, from the
    /// second iteration on.
    pub ratios: Vec<f64>,
    pub factor: f64,
}

/// Consecutive ratios above 1 that count as divergence.
pub const DIVERGENCE_RUN: usize = 3;

pub(crate) type PieceDrift<'a> = Box<dyn Fn(usize, &DVector<f64>) -> DVector<f64> + Send + Sync + 'a>;
pub(crate) type PieceDiffusion<'a> = Box<dyn Fn(usize, &DVector<f64>) -> DMatrix<f64> + Send + Sync + 'a>;

/// One time window with a fixed operator. Interval `i` spans
/// `knots[i]..knots[i + 1]` and uses Brownian increment column `offset + i`.
pub(crate) struct Piece<'a> {
    pub a: &'a SectorialOp,
    pub knots: &'a [f64],
    pub offset: usize,
    pub props: Vec<Propagator>,
    pub drift: PieceDrift<'a>,
    pub diffusion: Option<PieceDiffusion<'a>>,
    pub space: &'a SpaceModel,
}

impl<'a> Piece<'a> {
    pub fn new(
        a: &'a SectorialOp,
        knots: &'a [f64],
        offset: usize,
        drift: PieceDrift<'a>,
        diffusion: Option<PieceDiffusion<'a>>,
        space: &'a SpaceModel,
    ) -> Result<Self> {
        let mut cache = PropagatorCache::default();
        let props = knots.windows(2).map(|w| cache.get(a, w[1] - w[0]).cloned()).collect::<Result<_>>()?;
        Ok(Piece { a, knots, offset, props, drift, diffusion, space })
    }

    fn initial_iterate(&self, u0: &DVector<f64>, init: PicardInit) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity(self.knots.len());
        let mut u = u0.clone();
        out.push(u.clone());
        for p in &self.props {
            if init == PicardInit::Semigroup {
                u = &p.s * &u;
            }
            out.push(u.clone());
        }
        out
    }

    /// The discrete mild map `Φ(V)`:
    /// `U_{i+1} = S U_i + Φ (F(V_i) + f_i) + S (B(V_i) + b_i) ΔW_i`.
    fn mild_map(&self, u0: &DVector<f64>, v: &[DVector<f64>], inc: Option<DMatrixView<'_, f64>>) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity(v.len());
        let mut u = u0.clone();
        out.push(u.clone());
        for (i, p) in self.props.iter().enumerate() {
            let mut next = &p.s * &u + &p.phi * (self.drift)(i, &v[i]);
            if let (Some(b), Some(inc)) = (&self.diffusion, &inc) {
                next += &p.s * (b(i, &v[i]) * inc.column(self.offset + i));
            }
            u = next;
            out.push(u.clone());
        }
        out
    }

    /// `‖A(U − V)‖_{γ(0,T;X)}` with the trapezoid covariance, evaluated by the
    /// Hilbert or square-function formula.
    pub fn distance(&self, u: &[DVector<f64>], v: &[DVector<f64>]) -> f64 {
        let a = self.a.matrix();
        let d: Vec<DVector<f64>> = u.iter().zip(v).map(|(x, y)| a * (x - y)).collect();
        path_norm(&d, self.knots, self.space)
    }

    /// Fixed-point iteration for every sample.
    pub fn solve(
        &self,
        u0: &[DVector<f64>],
        w: Option<&CylindricalBM>,
        opts: &PicardOptions,
    ) -> Result<(Vec<Vec<DVector<f64>>>, PicardReport)> {
        let mut paths: Vec<Vec<DVector<f64>>> = u0.iter().map(|x| self.initial_iterate(x, opts.init)).collect();
        let mut report =
            PicardReport { iterations: 0, converged: false, increments: Vec::new(), ratios: Vec::new(), factor: 0.0 };
        let mut prev_l2: Option<f64> = None;
        let mut run = 0;
        for it in 1..=opts.max_iter {
            let step: Vec<(Vec<DVector<f64>>, f64)> = paths
                .par_iter()
                .enumerate()
                .map(|(s, v)| {
                    let inc = w.map(|w| w.increments(s).as_view());
                    let u = self.mild_map(&u0[s], v, inc);
                    let d = self.distance(&u, v);
                    (u, d)
                })
                .collect();
            let dists: Vec<f64> = step.iter().map(|x| x.1).collect();
            paths = step.into_iter().map(|x| x.0).collect();
            let max = dists.iter().copied().fold(0.0, f64::max);
            let l2 = rng::mean(&dists.iter().map(|d| d * d).collect::<Vec<_>>()).sqrt();
            report.iterations = it;
            report.increments.push(max);
            if let Some(p) = prev_l2 {
                let r = if p > 0.0 { l2 / p } else { 0.0 };
                report.ratios.push(r);
                run = if r > 1.0 { run + 1 } else { 0 };
                if run >= DIVERGENCE_RUN {
                    return Err(Error::Divergence { iter: it });
                }
            }
            if max <= opts.tol {
                report.converged = true;
                break;
            }
            prev_l2 = Some(l2);
        }
        Ok((paths, report))
    }
}

pub(crate) fn path_norm(d: &[DVector<f64>], knots: &[f64], space: &SpaceModel) -> f64 {
    let n = d[0].len();
    if space.is_hilbert() {
        let mut acc = 0.0;
        for (k, w) in knots.windows(2).enumerate() {
            acc += 0.5 * (w[1] - w[0]) * (d[k].norm_squared() + d[k + 1].norm_squared());
        }
        return acc.max(0.0).sqrt();
    }
    let mut c = DMatrix::zeros(n, n);
    for (k, w) in knots.windows(2).enumerate() {
        for i in 0..n {
            c[(i, i)] += 0.5 * (w[1] - w[0]) * (d[k][i] * d[k][i] + d[k + 1][i] * d[k + 1][i]);
        }
    }
    sqfn_from_cov(&c, space.exponent)
}

pub(crate) fn initial_values(problem: &SEEProblem, samples: usize) -> Result<Vec<DVector<f64>>> {
    if let super::problem::InitialData::Samples(xs) = problem.initial() {
        if xs.len() < samples {
            return invalid(format!("{} initial samples for {samples} paths", xs.len()));
        }
    }
    Ok((0..samples).map(|s| problem.initial().get(s).clone()).collect())
}

fn check_noise(problem: &SEEProblem, w: &CylindricalBM) -> Result<()> {
    if w.grid().knots() != problem.grid().knots() {
        return invalid("Brownian motion and problem grids differ");
    }
    if w.noise_dim() != problem.spec().noise_dim() {
        return invalid("Brownian motion and spec noise dimensions differ");
    }
    Ok(())
}

pub(crate) fn problem_piece<'a>(problem: &'a SEEProblem, knots: &'a [f64], offset: usize) -> Result<Piece<'a>> {
    let drift: PieceDrift<'a> = Box::new(move |i, x| {
        problem.shifted_drift(knots[i], x) + problem.forcing_at(offset + i)
    });
    let diffusion: Option<PieceDiffusion<'a>> = if problem.is_deterministic() {
        None
    } else {
        Some(Box::new(move |i, x| {
            problem.spec().diffusion_at(knots[i], x) + problem.noise_forcing_at(offset + i)
        }))
    };
    Piece::new(problem.shifted_operator(), knots, offset, drift, diffusion, problem.space())
}

/// Picard iteration for the mild form on matched Brownian paths `w`.
pub fn picard_solve(
    problem: &SEEProblem,
    constants: &RegularityConstants,
    w: &CylindricalBM,
    opts: &PicardOptions,
) -> Result<(PathEnsemble, PicardReport)> {
    check_noise(problem, w)?;
    if opts.max_iter == 0 || !(opts.tol >= 0.0) {
        return invalid("need max_iter ≥ 1 and a nonnegative tolerance");
    }
    let factor = problem.contraction_factor(constants);
    if opts.enforce_smallness && factor >= 1.0 {
        return Err(Error::SmallnessViolation { factor });
    }
    let u0 = initial_values(problem, w.samples())?;
    let piece = problem_piece(problem, problem.grid().knots(), 0)?;
    let (paths, mut report) = piece.solve(&u0, Some(w), opts)?;
    report.factor = factor;
    Ok((PathEnsemble::new(problem.grid().clone(), paths, Some(w.seed()))?, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// Per sample, `max_k ‖r_k‖_X / scale` with `scale = max_k ‖U(t_k)‖_X`.
    pub per_sample: Vec<f64>,
    pub max: f64,
    pub median: f64,
}

/// Residual of the strong form
/// `U(t) + ∫_0^t AU = u₀ + ∫_0^t (F(U) + f) + ∫_0^t (B(U) + b) dW` at every
/// knot. On each interval the drift part of `∫AU` is integrated exactly
/// (`A(ΦU_k + Ψ(F + f))`) and the noise part by the trapezoid rule, so the
/// residual vanishes for deterministic problems and is first order otherwise.
pub fn mild_strong_check(u: &PathEnsemble, problem: &SEEProblem, w: &CylindricalBM) -> Result<ResidualReport> {
    check_noise(problem, w)?;
    if u.grid().knots() != problem.grid().knots() || u.samples() != w.samples() || u.dim() != problem.dim() {
        return invalid("ensemble does not match the problem and noise");
    }
    let knots = problem.grid().knots();
    let piece = problem_piece(problem, knots, 0)?;
    let a = problem.shifted_operator().matrix();
    let space = problem.space();
    let per_sample: Vec<f64> = (0..u.samples())
        .into_par_iter()
        .map(|s| {
            let path = u.path(s);
            let inc = w.increments(s);
            let mut r = &path[0] - problem.initial().get(s);
            let mut scale = space.norm_vec(&path[0]);
            let mut worst = space.norm_vec(&r);
            for (i, p) in piece.props.iter().enumerate() {
                let d = (piece.drift)(i, &path[i]);
                let mut int_au = a * (&p.phi * &path[i] + &p.psi * &d);
                let mut noise = DVector::zeros(path[i].len());
                if let Some(b) = &piece.diffusion {
                    noise = b(i, &path[i]) * inc.column(i);
                    int_au += a * (&p.s * &noise) * (0.5 * p.dt);
                }
                r += &path[i + 1] - &path[i] + int_au - d * p.dt - noise;
                scale = scale.max(space.norm_vec(&path[i + 1]));
                worst = worst.max(space.norm_vec(&r));
            }
            if scale > 0.0 {
                worst / scale
            } else {
                worst
            }
        })
        .collect();
    let max = per_sample.iter().copied().fold(0.0, f64::max);
    let mut sorted = per_sample.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite residual"));
    let m = sorted.len();
    let median = if m % 2 == 1 { sorted[m / 2] } else { 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) };
    Ok(ResidualReport { per_sample, max, median })
}
