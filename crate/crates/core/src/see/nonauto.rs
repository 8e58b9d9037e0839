use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::picard::{initial_values, Piece, PicardOptions, PicardReport, PieceDiffusion, PieceDrift};
use super::problem::{default_shift, RegularityConstants, SEEProblem};
use crate::error::{invalid, Error, Result};
use crate::gamma::{gamma_bound_real, TimeGrid};
use crate::sectorial::SectorialOp;
use crate::space::SpaceModel;
use crate::stochastic::{CylindricalBM, PathEnsemble};

pub type OperatorFamily = Arc<dyn Fn(f64) -> Result<SectorialOp> + Send + Sync>;

/// Bisection depth before a window is declared non-splittable.
pub const SPLIT_DEPTH: usize = 20;
/// Points sampled per window for the oscillation estimate.
pub const SPLIT_POINTS: usize = 9;
const BOUND_TRIALS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPiece {
    pub start: f64,
    pub end: f64,
    /// Estimated `γ({A(u) − A(v) : u, v ∈ [start, end]})`.
    pub bound: f64,
}

/// γ-bound estimate of `{A(u) − A(v)}` over equally spaced points of `[s, e]`.
pub fn oscillation(family: &OperatorFamily, s: f64, e: f64, space: &SpaceModel, seed: u64) -> Result<f64> {
    let ops: Vec<DMatrix<f64>> = (0..SPLIT_POINTS)
        .map(|k| family(s + (e - s) * k as f64 / (SPLIT_POINTS - 1) as f64).map(|a| a.matrix().clone()))
        .collect::<Result<_>>()?;
    let mut diffs = Vec::with_capacity(SPLIT_POINTS * (SPLIT_POINTS - 1) / 2);
    for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            diffs.push(&ops[j] - &ops[i]);
        }
    }
    Ok(gamma_bound_real(&diffs, space, BOUND_TRIALS, seed)?.value)
}

/// Greedy left-to-right split of the grid horizon into windows whose
/// oscillation is below `epsilon`. Each window end is found by bisection and
/// snapped down to a grid knot.
pub fn split_horizon(
    family: &OperatorFamily,
    grid: &TimeGrid,
    epsilon: f64,
    space: &SpaceModel,
    seed: u64,
) -> Result<Vec<SplitPiece>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return invalid("split tolerance must be positive");
    }
    let knots = grid.knots();
    let t_end = grid.end();
    let mut pieces = Vec::new();
    let mut s = grid.start();
    while s < t_end {
        let whole = oscillation(family, s, t_end, space, seed)?;
        if whole < epsilon {
            pieces.push(SplitPiece { start: s, end: t_end, bound: whole });
            break;
        }
        let (mut lo, mut hi) = (s, t_end);
        for _ in 0..SPLIT_DEPTH {
            let mid = 0.5 * (lo + hi);
            if oscillation(family, s, mid, space, seed)? < epsilon {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let idx = knots.partition_point(|k| *k <= lo);
        let e = knots[idx.saturating_sub(1)];
        if e <= s {
            return Err(Error::NonSplittable { depth: SPLIT_DEPTH });
        }
        pieces.push(SplitPiece { start: s, end: e, bound: oscillation(family, s, e, space, seed)? });
        s = e;
    }
    Ok(pieces)
}

#[derive(Debug, Clone)]
pub struct NonautonomousSolution {
    pub ensemble: PathEnsemble,
    pub pieces: Vec<SplitPiece>,
    pub reports: Vec<PicardReport>,
}

/// Solves the problem with `A(t)` in place of the problem operator. On each
/// window `[s_{m−1}, s_m]` the operator is frozen at `A_m = A(s_{m−1})` and
/// `F(t, x) − A(t)x + A_m x` is used as drift; the terminal value of one
/// window starts the next. The smallness check uses
/// `(L_F + ε_m) K* + L_B K⋄` with the window's oscillation `ε_m`.
pub fn solve_nonautonomous(
    problem: &SEEProblem,
    family: &OperatorFamily,
    epsilon: f64,
    constants: &RegularityConstants,
    w: &CylindricalBM,
    opts: &PicardOptions,
    seed: u64,
) -> Result<NonautonomousSolution> {
    if w.grid().knots() != problem.grid().knots() || w.noise_dim() != problem.spec().noise_dim() {
        return invalid("Brownian motion does not match the problem");
    }
    let grid = problem.grid();
    let knots = grid.knots();
    let space = problem.space();
    let spec = problem.spec();
    let pieces = split_horizon(family, grid, epsilon, space, seed)?;
    let at_knots: Vec<DMatrix<f64>> =
        knots.iter().map(|t| family(*t).map(|a| a.matrix().clone())).collect::<Result<_>>()?;
    let mut u0 = initial_values(problem, w.samples())?;
    let mut paths: Vec<Vec<DVector<f64>>> = u0.iter().map(|x| vec![x.clone()]).collect();
    let mut reports = Vec::with_capacity(pieces.len());
    for piece in &pieces {
        let i0 = knots.partition_point(|k| *k < piece.start);
        let i1 = knots.partition_point(|k| *k < piece.end);
        let frozen = family(piece.start)?;
        if frozen.dim() != problem.dim() {
            return invalid("operator family has the wrong dimension");
        }
        let shift = default_shift(&frozen);
        let a_m = if shift == 0.0 { frozen } else { frozen.shifted(shift)? };
        let factor = (spec.l_f + piece.bound) * constants.k_star + spec.l_b * constants.k_diamond;
        if opts.enforce_smallness && factor >= 1.0 {
            return Err(Error::SmallnessViolation { factor });
        }
        let frozen_m = at_knots[i0].clone();
        let at_knots = &at_knots;
        let drift: PieceDrift<'_> = Box::new(move |i, x| {
            let g = i0 + i;
            let mut f = spec.drift_at(knots[g], x);
            if shift != 0.0 {
                f += x * shift;
            }
            f + problem.forcing_at(g) - (&at_knots[g] - &frozen_m) * x
        });
        let diffusion: Option<PieceDiffusion<'_>> = if problem.is_deterministic() {
            None
        } else {
            Some(Box::new(move |i, x| {
                let g = i0 + i;
                spec.diffusion_at(knots[g], x) + problem.noise_forcing_at(g)
            }))
        };
        let engine = Piece::new(&a_m, &knots[i0..=i1], i0, drift, diffusion, space)?;
        let (local, mut report) = engine.solve(&u0, Some(w), opts)?;
        report.factor = factor;
        reports.push(report);
        for (p, l) in paths.iter_mut().zip(&local) {
            p.extend(l[1..].iter().cloned());
        }
        u0 = local.iter().map(|l| l[l.len() - 1].clone()).collect();
    }
    let ensemble = PathEnsemble::new(grid.clone(), paths, Some(w.seed()))?;
    Ok(NonautonomousSolution { ensemble, pieces, reports })
}
