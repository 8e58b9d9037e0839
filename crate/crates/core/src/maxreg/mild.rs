use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::gamma::{StepFunction, TimeGrid, Weight};
use crate::linalg::lyapunov;
use crate::sectorial::{Propagator, SectorialOp};

/// Caches one-step propagators keyed by the exact step length.
#[derive(Debug, Default)]
pub struct PropagatorCache {
    map: HashMap<u64, Propagator>,
}

impl PropagatorCache {
    pub fn get(&mut self, a: &SectorialOp, dt: f64) -> Result<&Propagator> {
        let key = dt.to_bits();
        if !self.map.contains_key(&key) {
            self.map.insert(key, a.propagator(dt)?);
        }
        Ok(&self.map[&key])
    }
}

/// `u = S * f` on the union of the forcing and output grids, stored at
/// every knot together with the forcing value on each piece.
#[derive(Debug, Clone)]
pub struct MildSolution {
    op: Arc<SectorialOp>,
    f: StepFunction,
    knots: Vec<f64>,
    states: Vec<DVector<f64>>,
    forcing: Vec<DVector<f64>>,
    out: TimeGrid,
    out_idx: Vec<usize>,
}

fn merge(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut k: Vec<f64> = std::iter::once(0.0).chain(a.iter().copied()).chain(b.iter().copied()).collect();
    k.sort_by(|x, y| x.partial_cmp(y).expect("finite knots"));
    k.dedup();
    k
}

pub fn convolve(a: &SectorialOp, f: &StepFunction, grid_out: &TimeGrid) -> Result<MildSolution> {
    convolve_arc(Arc::new(a.clone()), f, grid_out)
}

pub fn convolve_arc(a: Arc<SectorialOp>, f: &StepFunction, grid_out: &TimeGrid) -> Result<MildSolution> {
    if a.angle() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::NotAnalytic(format!("angle {:.6} is not below π/2", a.angle())));
    }
    if f.width() != 1 {
        return invalid("convolution expects an X-valued forcing");
    }
    if f.dim() != a.dim() {
        return invalid("forcing and operator dimensions differ");
    }
    if f.grid().weight() != Weight::Lebesgue || grid_out.weight() != Weight::Lebesgue {
        return invalid("convolution uses Lebesgue grids");
    }
    if f.grid().start() < 0.0 || grid_out.start() < 0.0 {
        return invalid("grids must start at a nonnegative time");
    }
    let knots = merge(f.grid().knots(), grid_out.knots());
    let n = a.dim();
    let mut cache = PropagatorCache::default();
    let mut states = Vec::with_capacity(knots.len());
    let mut forcing = Vec::with_capacity(knots.len() - 1);
    let mut u = DVector::zeros(n);
    states.push(u.clone());
    for w in knots.windows(2) {
        let y = f.eval(0.5 * (w[0] + w[1])).column(0).clone_owned();
        let p = cache.get(&a, w[1] - w[0])?;
        u = &p.s * &u + &p.phi * &y;
        states.push(u.clone());
        forcing.push(y);
    }
    let out_idx = grid_out
        .knots()
        .iter()
        .map(|t| knots.binary_search_by(|k| k.partial_cmp(t).expect("finite")).expect("output knot is merged"))
        .collect();
    Ok(MildSolution { op: a, f: f.clone(), knots, states, forcing, out: grid_out.clone(), out_idx })
}

impl MildSolution {
    pub fn operator(&self) -> &SectorialOp {
        &self.op
    }

    pub fn forcing(&self) -> &StepFunction {
        &self.f
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.out
    }

    /// u at the output knots.
    pub fn values(&self) -> Vec<DVector<f64>> {
        self.out_idx.iter().map(|i| self.states[*i].clone()).collect()
    }

    pub fn value(&self, j: usize) -> &DVector<f64> {
        &self.states[self.out_idx[j]]
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn horizon(&self) -> f64 {
        *self.knots.last().expect("non-empty")
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("non-empty")
    }

    /// u(t) for any t ≥ 0; beyond the last knot the forcing is zero.
    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        if !(t >= 0.0) {
            return invalid("evaluation time must be nonnegative");
        }
        let k = match self.knots.partition_point(|x| *x <= t) {
            0 => 0,
            i => i - 1,
        };
        let tau = t - self.knots[k];
        if tau == 0.0 {
            return Ok(self.states[k].clone());
        }
        if k + 1 >= self.knots.len() {
            return Ok(self.op.semigroup(tau)? * &self.states[k]);
        }
        let p = self.op.propagator(tau)?;
        Ok(&p.s * &self.states[k] + &p.phi * &self.forcing[k])
    }

    /// Max over knots of `‖u(t) + A∫_0^t u − ∫_0^t f‖` relative to
    /// `max ‖∫_0^t f‖`, with `∫u` from the second-order propagator.
    pub fn balance_residual(&self) -> Result<f64> {
        let n = self.op.dim();
        let mut cache = PropagatorCache::default();
        let mut int_u = DVector::zeros(n);
        let mut int_f = DVector::zeros(n);
        let (mut worst, mut scale) = (0.0f64, 0.0f64);
        for (k, w) in self.knots.windows(2).enumerate() {
            let dt = w[1] - w[0];
            let p = cache.get(&self.op, dt)?;
            int_u += &p.phi * &self.states[k] + &p.psi * &self.forcing[k];
            int_f += &self.forcing[k] * dt;
            let r = &self.states[k + 1] + self.op.matrix() * &int_u - &int_f;
            worst = worst.max(r.norm());
            scale = scale.max(int_f.norm());
        }
        Ok(if scale > 0.0 { worst / scale } else { worst })
    }

    /// Exact `∫_0^∞ g gᵀ` for `g = Au` (`du = false`) or `g = u'`.
    /// On a piece, `Au(τ) = S(τ)w + y` and `u'(τ) = -S(τ)w` with
    /// `w = Au(t_k) - y`; the `S w wᵀ Sᵀ` integrals are Lyapunov solves
    /// grouped by step length.
    fn covariance(&self, du: bool) -> Result<DMatrix<f64>> {
        let a = self.op.matrix();
        let n = self.op.dim();
        let mut cache = PropagatorCache::default();
        let mut groups: HashMap<u64, DMatrix<f64>> = HashMap::new();
        let mut cov = DMatrix::zeros(n, n);
        for (k, w) in self.knots.windows(2).enumerate() {
            let dt = w[1] - w[0];
            let y = &self.forcing[k];
            let wv = a * &self.states[k] - y;
            let g = groups.entry(dt.to_bits()).or_insert_with(|| DMatrix::zeros(n, n));
            *g += &wv * wv.transpose();
            if !du {
                let p = cache.get(&self.op, dt)?;
                let pw = &p.phi * &wv;
                cov += &pw * y.transpose() + y * pw.transpose() + y * y.transpose() * dt;
            }
        }
        for (bits, wsum) in groups {
            let p = cache.get(&self.op, f64::from_bits(bits))?;
            let sol = lyapunov(a, &wsum)?;
            cov += &sol - &p.s * &sol * p.s.transpose();
        }
        let u_t = self.final_state();
        let tail = lyapunov(a, &(u_t * u_t.transpose()))?;
        cov += a * tail * a.transpose();
        Ok((&cov + cov.transpose()) * 0.5)
    }

    pub fn au_covariance(&self) -> Result<DMatrix<f64>> {
        self.covariance(false)
    }

    pub fn du_covariance(&self) -> Result<DMatrix<f64>> {
        self.covariance(true)
    }

    /// Exact bin averages of Au on `grid`, which must be a sub-grid of the
    /// merged knots.
    pub fn au_bin_averages(&self, grid: &TimeGrid) -> Result<StepFunction> {
        let a = self.op.matrix();
        let mut vals = Vec::with_capacity(grid.len());
        for (lo, hi) in grid.intervals() {
            let i0 = self.knot_index(lo)?;
            let i1 = self.knot_index(hi)?;
            let mut acc = DVector::zeros(self.op.dim());
            for k in i0..i1 {
                let dt = self.knots[k + 1] - self.knots[k];
                let y = &self.forcing[k];
                // ∫Au over the piece = (I - S)u_k + dt y - Φ y.
                acc += &self.states[k] - &self.states[k + 1] + y * dt;
            }
            let _ = a;
            vals.push(acc / (hi - lo));
        }
        StepFunction::from_vectors(grid.clone(), vals, self.f.space().clone())
    }

    fn knot_index(&self, t: f64) -> Result<usize> {
        self.knots
            .binary_search_by(|k| k.partial_cmp(&t).expect("finite"))
            .map_err(|_| Error::InvalidInput(format!("time {t} is not a solution knot")))
    }
}
