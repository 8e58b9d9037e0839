use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::brownian::{ou_normals, CylindricalBM};
use super::process::{AdaptedProcess, PathEnsemble};
use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky_semidefinite, phi1};
use crate::sectorial::SectorialOp;

fn check(a: &SectorialOp, g: &AdaptedProcess, w: &CylindricalBM) -> Result<()> {
    g.check_against(w)?;
    if g.dim() != a.dim() {
        return invalid("process and operator dimensions differ");
    }
    Ok(())
}

/// `U(t_k) = Σ_{i<k} S(t_k − t_i) G_i ΔW_i`, i.e. the exponential
/// Euler-Maruyama recursion `U_{k+1} = S(Δ_k)(U_k + G_k ΔW_k)`.
pub fn stoch_convolve(a: &SectorialOp, g: &AdaptedProcess, w: &CylindricalBM) -> Result<PathEnsemble> {
    check(a, g, w)?;
    let mut cache: HashMap<u64, DMatrix<f64>> = HashMap::new();
    let steps: Vec<u64> = (0..w.grid().len()).map(|i| w.grid().measure(i).to_bits()).collect();
    for dt in &steps {
        if !cache.contains_key(dt) {
            cache.insert(*dt, a.semigroup(f64::from_bits(*dt))?);
        }
    }
    let n = a.dim();
    let paths = (0..w.samples())
        .into_par_iter()
        .map(|s| {
            let inc = w.increments(s);
            let mut u = DVector::zeros(n);
            let mut p = Vec::with_capacity(steps.len() + 1);
            p.push(u.clone());
            for (i, dt) in steps.iter().enumerate() {
                u = &cache[dt] * (u + g.value(s, i) * inc.column(i));
                p.push(u.clone());
            }
            p
        })
        .collect();
    PathEnsemble::new(w.grid().clone(), paths, Some(w.seed()))
}

pub fn is_diagonal(a: &SectorialOp) -> bool {
    let m = a.matrix();
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0))
}

struct OuStep {
    decay: DVector<f64>,
    /// `Cov(ξ_i, ΔW) / Δ`.
    gain: DVector<f64>,
    /// Factor of the conditional covariance of ξ given ΔW.
    factor: DMatrix<f64>,
}

fn ou_step(lam: &[f64], dt: f64) -> OuStep {
    let n = lam.len();
    let decay = DVector::from_fn(n, |i, _| (-lam[i] * dt).exp());
    let c = DVector::from_fn(n, |i, _| dt * phi1(-lam[i] * dt));
    let v = DMatrix::from_fn(n, n, |i, j| dt * phi1(-(lam[i] + lam[j]) * dt));
    let k = v - &c * c.transpose() / dt;
    OuStep { decay, gain: c / dt, factor: cholesky_semidefinite(&((&k + k.transpose()) * 0.5)) }
}

/// Exact-in-distribution update for diagonal A: per mode
/// `U_{k+1} = e^{-λΔ}U_k + Σ_j G_{·j} ξ_{·j}` with
/// `ξ_{ij} = ∫ e^{-λ_i(t_{k+1}−s)} dW_j(s)` drawn jointly with `ΔW_j`.
pub fn stoch_convolve_exact(a: &SectorialOp, g: &AdaptedProcess, w: &CylindricalBM) -> Result<PathEnsemble> {
    check(a, g, w)?;
    if !is_diagonal(a) {
        return Err(Error::Unsupported("the exact integrator needs a diagonal operator".into()));
    }
    let n = a.dim();
    let m = w.noise_dim();
    let lam: Vec<f64> = (0..n).map(|i| a.matrix()[(i, i)]).collect();
    let mut cache: HashMap<u64, OuStep> = HashMap::new();
    let steps: Vec<u64> = (0..w.grid().len()).map(|i| w.grid().measure(i).to_bits()).collect();
    for dt in &steps {
        cache.entry(*dt).or_insert_with(|| ou_step(&lam, f64::from_bits(*dt)));
    }
    let seed = w.seed();
    let paths = (0..w.samples())
        .into_par_iter()
        .map(|s| {
            let inc = w.increments(s);
            let mut u = DVector::zeros(n);
            let mut z = vec![0.0; n * m];
            let mut p = Vec::with_capacity(steps.len() + 1);
            p.push(u.clone());
            for (i, dt) in steps.iter().enumerate() {
                let st = &cache[dt];
                ou_normals(seed, s, i, &mut z);
                let zm = DMatrix::from_column_slice(n, m, &z);
                // Column j: ξ_{·j} = gain ΔW_j + factor z_j.
                let mut xi = &st.factor * zm;
                for j in 0..m {
                    let dw = inc[(j, i)];
                    for r in 0..n {
                        xi[(r, j)] += st.gain[r] * dw;
                    }
                }
                let gv = g.value(s, i);
                u.component_mul_assign(&st.decay);
                for r in 0..n {
                    u[r] += gv.row(r).dot(&xi.row(r));
                }
                p.push(u.clone());
            }
            p
        })
        .collect();
    PathEnsemble::new(w.grid().clone(), paths, Some(seed))
}

/// Exact integrator for diagonal A, exponential Euler otherwise.
pub fn stoch_convolve_auto(a: &SectorialOp, g: &AdaptedProcess, w: &CylindricalBM) -> Result<PathEnsemble> {
    if is_diagonal(a) {
        stoch_convolve_exact(a, g, w)
    } else {
        stoch_convolve(a, g, w)
    }
}

/// Per-sample residual of the weak formulation at the last knot,
/// `⟨U(T),x⟩ + ∫_0^T ⟨U, Aᵀx⟩ − Σ⟨G_i ΔW_i, x⟩`, with the time integral
/// by the trapezoid rule.
pub fn weak_residual(
    a: &SectorialOp,
    u: &PathEnsemble,
    g: &AdaptedProcess,
    w: &CylindricalBM,
    x: &DVector<f64>,
) -> Result<Vec<f64>> {
    check(a, g, w)?;
    if u.grid() != w.grid() || u.samples() != w.samples() || x.len() != a.dim() {
        return invalid("ensemble, noise and test vector do not match");
    }
    let ax = a.matrix().transpose() * x;
    let grid = w.grid();
    Ok((0..u.samples())
        .map(|s| {
            let p = u.path(s);
            let inc = w.increments(s);
            let mut r = p[p.len() - 1].dot(x);
            for i in 0..grid.len() {
                r += 0.5 * grid.measure(i) * (p[i].dot(&ax) + p[i + 1].dot(&ax));
                r -= (g.value(s, i) * inc.column(i)).dot(x);
            }
            r
        })
        .collect())
}
