use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::gamma::{bin_kernel, ft_interval, FreqGrid, StepFunction, TimeGrid, Weight};
use crate::linalg::{to_complex, to_complex_vec, CVec, C64};
use crate::sectorial::SectorialOp;

const CHUNKS: usize = 64;
/// Below this `|ξΔ|` the interval kernels use the sinc form.
const SMALL: f64 = 1e-2;

/// Principal branch of `(iξ)^θ`, `arg(iξ) = ±π/2`.
pub fn i_xi_pow(xi: f64, theta: f64) -> C64 {
    if theta == 0.0 {
        return C64::new(1.0, 0.0);
    }
    C64::from_polar(xi.abs().powf(theta), xi.signum() * theta * PI / 2.0)
}

/// `D^θ A^{1-θ} u` for `u = S * f`: the symbol `(iξ)^θ A^{1-θ}(iξ+A)^{-1}`
/// applied to `f̂` and inverted as bin averages on `out`.
pub fn dtheta_a1mtheta(a: &SectorialOp, f: &StepFunction, theta: f64, out: &TimeGrid) -> Result<StepFunction> {
    if !(0.0..=1.0).contains(&theta) {
        return invalid(format!("θ must lie in [0, 1], got {theta}"));
    }
    if theta < 1.0 && !a.invertible() {
        return Err(Error::Precondition("A must be invertible for θ < 1".into()));
    }
    if f.width() != 1 || f.dim() != a.dim() {
        return invalid("forcing must be X-valued with the operator dimension");
    }
    if f.grid().weight() != Weight::Lebesgue || out.weight() != Weight::Lebesgue {
        return invalid("multiplier route uses Lebesgue grids");
    }
    let n = a.dim();
    let power = if theta == 1.0 { DMatrix::identity(n, n) } else { a.frac_power(1.0 - theta)? };
    let (q, t) = to_complex(a.matrix()).schur().unpack();
    let pq = to_complex(&power) * &q;
    let qh = q.adjoint();
    // Forcing values rotated into the Schur basis.
    let fq: Vec<CVec> = f.values().iter().map(|v| &qh * to_complex_vec(&v.column(0).clone_owned())).collect();
    let f_knots = f.grid().knots().to_vec();
    let out_knots = out.knots().to_vec();
    let h_min = f.grid().min_step().min(out.min_step());
    let t_end = f.grid().end().max(out.end());
    let xi_max = 2000.0 / h_min;
    let grid = FreqGrid::symmetric(xi_max, 2.0 * PI / t_end)?;
    let nodes = grid.nodes();
    let weights = grid.weights();
    let bins = out.len();
    let chunk = nodes.len().div_ceil(CHUNKS);
    // Fixed chunks summed in order keep the result independent of threads.
    let partial: Vec<Vec<CVec>> = nodes
        .par_chunks(chunk)
        .zip(weights.par_chunks(chunk))
        .map(|(xs, ws)| {
            let mut acc = vec![CVec::zeros(n); bins];
            let mut rhs = CVec::zeros(n);
            let mut y = CVec::zeros(n);
            let mut fwd = vec![C64::new(0.0, 0.0); f_knots.len()];
            let mut back = vec![C64::new(0.0, 0.0); out_knots.len()];
            for (xi, w) in xs.iter().zip(ws) {
                let xi = *xi;
                for (e, s) in fwd.iter_mut().zip(&f_knots) {
                    *e = C64::from_polar(1.0, -xi * s);
                }
                rhs.fill(C64::new(0.0, 0.0));
                for (i, v) in fq.iter().enumerate() {
                    let (lo, hi) = (f_knots[i], f_knots[i + 1]);
                    let k = if (xi * (hi - lo)).abs() > SMALL {
                        (fwd[i] - fwd[i + 1]) / C64::new(0.0, xi)
                    } else {
                        ft_interval(xi, lo, hi)
                    };
                    rhs.axpy(k, v, C64::new(1.0, 0.0));
                }
                // Back substitution for (iξ + T) y = rhs.
                for i in (0..n).rev() {
                    let mut s = rhs[i];
                    for j in i + 1..n {
                        s -= t[(i, j)] * y[j];
                    }
                    y[i] = s / (t[(i, i)] + C64::new(0.0, xi));
                }
                let v = &pq * &y * (i_xi_pow(xi, theta) * *w);
                for (e, s) in back.iter_mut().zip(&out_knots) {
                    *e = C64::from_polar(1.0, xi * s);
                }
                for (b, slot) in acc.iter_mut().enumerate() {
                    let (lo, hi) = (out_knots[b], out_knots[b + 1]);
                    let k = if (xi * (hi - lo)).abs() > SMALL {
                        (back[b + 1] - back[b]) / C64::new(0.0, xi * (hi - lo))
                    } else {
                        bin_kernel(xi, lo, hi)
                    };
                    slot.axpy(k, &v, C64::new(1.0, 0.0));
                }
            }
            acc
        })
        .collect();
    let mut sum = vec![CVec::zeros(n); bins];
    for p in partial {
        for (s, v) in sum.iter_mut().zip(p) {
            *s += v;
        }
    }
    let bins: Vec<(f64, f64)> = out.intervals().collect();
    let jumps = f.jumps();
    let tail = 2.0 * ((theta - 3.0) * PI / 2.0).cos() * xi_max.powf(theta - 2.0) / (2.0 - theta);
    let jump_at = |t: f64| {
        jumps
            .iter()
            .find(|(s, _)| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
            .map(|(_, j)| j.column(0).clone_owned())
    };
    let mut vals = Vec::with_capacity(bins.len());
    for (s, (lo, hi)) in sum.iter().zip(&bins) {
        let mut v = s.map(|z| z.re / (2.0 * PI));
        let mut d = nalgebra::DVector::zeros(n);
        if let Some(j) = jump_at(*hi) {
            d += j;
        }
        if let Some(j) = jump_at(*lo) {
            d -= j;
        }
        v += &power * d * (tail / (2.0 * PI * (hi - lo)));
        vals.push(v);
    }
    StepFunction::from_vectors(out.clone(), vals, f.space().clone())
}
