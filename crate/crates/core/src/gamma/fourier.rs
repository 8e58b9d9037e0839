//! Unnormalized Fourier transform `f̂(ξ) = ∫ f(t) e^{-iξt} dt` of step
//! functions, evaluated exactly per interval, and frequency-weighted norms.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::grid::{TimeGrid, Weight};
use super::norm::{norm_from_cov, GammaEstimate, NormChoice};
use super::step::StepFunction;
use crate::error::{invalid, Result};
use crate::linalg::{gauss_legendre, CMat, C64};
use crate::space::SpaceModel;

pub const PANEL_ORDER: usize = 12;
pub const GRADING_LEVELS: usize = 40;

/// Quadrature nodes on [-Ξ, Ξ], symmetric about 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    xi_max: f64,
}

/// Gauss-Legendre panels on [0, Ξ]: the first panel [0, w] is split
/// geometrically towards 0, the rest have width at most w.
pub fn half_line_panels(xi_max: f64, width: f64, order: usize, grading: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let w0 = width.min(xi_max);
    let mut edges = vec![0.0];
    for k in (0..grading).rev() {
        edges.push(w0 * 0.5f64.powi(k as i32 + 1));
    }
    edges.push(w0);
    let rest = ((xi_max - w0) / width).ceil().max(0.0) as usize;
    for j in 1..=rest {
        edges.push((w0 + j as f64 * width).min(xi_max));
    }
    edges.dedup();
    for e in edges.windows(2) {
        if e[1] <= e[0] {
            continue;
        }
        for (t, wt) in crate::linalg::gl_interval(e[0], e[1], &x, &w) {
            nodes.push(t);
            weights.push(wt);
        }
    }
    (nodes, weights)
}

impl FreqGrid {
    pub fn symmetric(xi_max: f64, width: f64) -> Result<Self> {
        if !(xi_max > 0.0 && width > 0.0) {
            return invalid("frequency grid needs positive cutoff and panel width");
        }
        let (h, hw) = half_line_panels(xi_max, width, PANEL_ORDER, GRADING_LEVELS);
        let mut nodes: Vec<f64> = h.iter().rev().map(|x| -x).collect();
        let mut weights: Vec<f64> = hw.iter().rev().cloned().collect();
        nodes.extend_from_slice(&h);
        weights.extend_from_slice(&hw);
        Ok(FreqGrid { nodes, weights, xi_max })
    }

    /// Cutoff `2000 / h_min` and panels of width `2π / t_end`.
    pub fn for_function(f: &StepFunction) -> Result<Self> {
        let g = f.grid();
        FreqGrid::symmetric(2000.0 / g.min_step(), 2.0 * PI / g.end())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }
}

/// `∫_a^b e^{-iξt} dt`, stable as ξ → 0.
pub fn ft_interval(xi: f64, a: f64, b: f64) -> C64 {
    let d = b - a;
    let x = 0.5 * xi * d;
    let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    C64::from_polar(d * sinc, -xi * 0.5 * (a + b))
}

/// `(1/Δ) ∫_a^b e^{iξt} dt`, the bin-average kernel of the inverse transform.
pub fn bin_kernel(xi: f64, a: f64, b: f64) -> C64 {
    ft_interval(-xi, a, b) / (b - a)
}

/// Sampled transform with the jump structure of the source, when known,
/// for the analytic high-frequency tail.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub grid: FreqGrid,
    pub values: Vec<CMat>,
    pub jumps: Vec<(f64, DMatrix<f64>)>,
}

pub fn transform_at(f: &StepFunction, xi: f64) -> CMat {
    let mut acc = CMat::zeros(f.dim(), f.width());
    let k = f.grid().knots();
    let mut prev = C64::from_polar(1.0, -xi * k[0]);
    for (i, w) in k.windows(2).enumerate() {
        let next = C64::from_polar(1.0, -xi * w[1]);
        // Knot differences are accurate once |ξΔ| is not small.
        let kern = if (xi * (w[1] - w[0])).abs() > 1e-2 {
            (prev - next) / C64::new(0.0, xi)
        } else {
            ft_interval(xi, w[0], w[1])
        };
        for (a, v) in acc.iter_mut().zip(f.value(i).iter()) {
            *a += kern * *v;
        }
        prev = next;
    }
    acc
}

pub fn fourier(f: &StepFunction, grid: &FreqGrid) -> Result<Spectrum> {
    if f.grid().weight() != Weight::Lebesgue {
        return invalid("the Fourier transform is defined for Lebesgue grids");
    }
    let values = grid.nodes().iter().map(|xi| transform_at(f, *xi)).collect();
    Ok(Spectrum { grid: grid.clone(), values, jumps: f.jumps() })
}

impl Spectrum {
    /// `‖f̂‖_{L²(ℝ)}` (Hilbert case), including the `2Σ‖J‖²/Ξ` tail of
    /// step functions.
    pub fn l2_norm(&self) -> f64 {
        let mut s = 0.0;
        for (v, w) in self.values.iter().zip(self.grid.weights()) {
            s += w * v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let tail: f64 = self.jumps.iter().map(|(_, j)| j.norm_squared()).sum::<f64>() * 2.0 / self.grid.xi_max();
        (s + tail).sqrt()
    }

    /// Bin averages of the inverse transform on `out`.
    pub fn inverse(&self, out: &TimeGrid, space: &SpaceModel) -> Result<StepFunction> {
        if out.weight() != Weight::Lebesgue {
            return invalid("output grid must carry Lebesgue measure");
        }
        let (n, m) = (self.values[0].nrows(), self.values[0].ncols());
        let xi_max = self.grid.xi_max();
        let mut vals = Vec::with_capacity(out.len());
        for (a, b) in out.intervals() {
            let mut acc = CMat::zeros(n, m);
            for ((xi, w), v) in self.grid.nodes().iter().zip(self.grid.weights()).zip(&self.values) {
                let k = bin_kernel(*xi, a, b) * *w;
                acc += v.map(|z| z * k);
            }
            let mut re = acc.map(|z| z.re / (2.0 * PI));
            // Non-oscillatory part of the truncated tail.
            for (t, j) in &self.jumps {
                let s = if (*t - a).abs() <= 1e-12 * (1.0 + a.abs()) {
                    1.0
                } else if (*t - b).abs() <= 1e-12 * (1.0 + b.abs()) {
                    -1.0
                } else {
                    continue;
                };
                re += j * (s / (PI * xi_max * (b - a)));
            }
            vals.push(re);
        }
        StepFunction::new(out.clone(), vals, space.clone())
    }
}

fn sobolev_weight(xi: f64, s: f64) -> f64 {
    (1.0 + xi * xi).powf(s) - 1.0
}

/// Covariance of `ξ ↦ (1+ξ²)^{s/2} f̂(ξ) / √(2π)`, band-limited at the grid
/// Nyquist frequency `π / h_min`. For s = 0 it is exactly `f.covariance()`.
pub fn sobolev_covariance(f: &StepFunction, s: f64) -> Result<DMatrix<f64>> {
    if !(-2.0..=2.0).contains(&s) {
        return invalid(format!("smoothness s must lie in [-2, 2], got {s}"));
    }
    if f.grid().weight() != Weight::Lebesgue {
        return invalid("Sobolev γ-norms are defined for Lebesgue grids");
    }
    let base = f.covariance();
    if s == 0.0 || f.is_zero() {
        return Ok(base);
    }
    Ok(base + quadrature_correction(f, s))
}

fn quadrature_correction(f: &StepFunction, s: f64) -> DMatrix<f64> {
    let g = f.grid();
    let xi_max = PI / g.min_step();
    let (nodes, weights) = half_line_panels(xi_max, 2.0 * PI / g.end(), PANEL_ORDER, GRADING_LEVELS);
    let n = f.dim();
    let mut out = DMatrix::zeros(n, n);
    for (xi, w) in nodes.iter().zip(&weights) {
        let v = transform_at(f, *xi);
        let re = (&v * v.adjoint()).map(|z| z.re);
        out += re * (w * sobolev_weight(*xi, s) / PI);
    }
    out
}

/// `‖ξ ↦ (1+ξ²)^{s/2} f̂(ξ)‖_γ / √(2π)`.
pub fn gamma_s_norm(f: &StepFunction, s: f64) -> Result<GammaEstimate> {
    let c = sobolev_covariance(f, s)?;
    norm_from_cov(&c, f.space(), NormChoice::Auto)
}
