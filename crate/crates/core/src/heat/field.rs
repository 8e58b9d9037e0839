use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::space::Exponent;

/// Forward and inverse FFTs on the `n^d` collocation grid of the torus
/// `[0, 2π)^d`, stored row-major.
#[derive(Clone)]
pub struct Transform {
    d: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Transform {{ d: {}, n: {} }}", self.d, self.n)
    }
}

impl Transform {
    pub fn new(d: usize, n: usize) -> Self {
        let mut p = FftPlanner::new();
        Transform { d, n, fwd: p.plan_fft_forward(n), inv: p.plan_fft_inverse(n) }
    }

    pub fn points(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    fn run(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        plan.process(data);
        if self.d == 2 {
            let mut col = vec![C64::new(0.0, 0.0); n];
            for j in 0..n {
                for i in 0..n {
                    col[i] = data[i * n + j];
                }
                plan.process(&mut col);
                for i in 0..n {
                    data[i * n + j] = col[i];
                }
            }
        }
    }

    /// Values to coefficients, `û_k = n^{-d} Σ_j u(x_j) e^{−ik·x_j}`.
    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.fwd);
        let s = 1.0 / self.points() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    /// Coefficients to values.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inv);
    }
}

/// Real field on the torus `[0, 2π)^d`, `d ∈ {1, 2}`, with Fourier modes
/// `|k_i| ≤ K` per axis. Norms use the normalized measure `dx/(2π)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    d: usize,
    k_max: usize,
    n: usize,
    q: Exponent,
    s: f64,
    /// `(2K+1)^d` coefficients, index `Σ_i (k_i + K)(2K+1)^{d−1−i}`.
    modes: Vec<C64>,
}

/// Smallest collocation size that keeps quadratic products of modes
/// `|k| ≤ K` alias free.
pub fn dealiased_points(k_max: usize) -> usize {
    3 * k_max + 1
}

impl SpectralField {
    pub fn zeros(d: usize, k_max: usize, q: f64, s: f64) -> Result<Self> {
        Self::with_points(d, k_max, dealiased_points(k_max).next_power_of_two(), q, s)
    }

    /// Explicit collocation size `n`; `n < 3K + 1` violates the 2/3 rule.
    pub fn with_points(d: usize, k_max: usize, n: usize, q: f64, s: f64) -> Result<Self> {
        if !(d == 1 || d == 2) {
            return Err(Error::InvalidConfig(format!("dimension {d} is not 1 or 2")));
        }
        if k_max == 0 {
            return Err(Error::InvalidConfig("mode cutoff must be at least 1".into()));
        }
        if n < dealiased_points(k_max) {
            return Err(Error::InvalidConfig(format!(
                "{n} collocation points alias modes up to {k_max}; need at least {}",
                dealiased_points(k_max)
            )));
        }
        if !s.is_finite() {
            return Err(Error::InvalidConfig("smoothness index must be finite".into()));
        }
        let q = Exponent::from_f64(q)?;
        let m = (2 * k_max + 1).pow(d as u32);
        Ok(SpectralField { d, k_max, n, q, s, modes: vec![C64::new(0.0, 0.0); m] })
    }

    /// Zero field with the same layout.
    pub fn like(&self) -> Self {
        SpectralField { modes: vec![C64::new(0.0, 0.0); self.modes.len()], ..self.clone() }
    }

    /// Samples `f` on the collocation grid and keeps the modes `|k_i| ≤ K`.
    pub fn from_fn(d: usize, k_max: usize, q: f64, s: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut u = Self::zeros(d, k_max, q, s)?;
        let t = u.transform();
        let h = 2.0 * PI / u.n as f64;
        let vals: Vec<f64> = (0..t.points())
            .map(|j| {
                let x: Vec<f64> = u.point_index(j).iter().map(|i| *i as f64 * h).collect();
                f(&x)
            })
            .collect();
        u.set_collocation(&t, &vals);
        Ok(u)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> Exponent {
        self.q
    }

    pub fn smoothness(&self) -> f64 {
        self.s
    }

    pub fn with_exponents(mut self, q: f64, s: f64) -> Result<Self> {
        self.q = Exponent::from_f64(q)?;
        self.s = s;
        Ok(self)
    }

    pub fn transform(&self) -> Transform {
        Transform::new(self.d, self.n)
    }

    pub fn modes(&self) -> &[C64] {
        &self.modes
    }

    pub fn modes_mut(&mut self) -> &mut [C64] {
        &mut self.modes
    }

    /// Wave vector of compact index `idx`.
    pub fn wavevector(&self, idx: usize) -> [i64; 2] {
        let w = 2 * self.k_max + 1;
        let k = self.k_max as i64;
        if self.d == 1 {
            [idx as i64 - k, 0]
        } else {
            [(idx / w) as i64 - k, (idx % w) as i64 - k]
        }
    }

    /// `|k|²` of compact index `idx`.
    pub fn k2(&self, idx: usize) -> f64 {
        let [a, b] = self.wavevector(idx);
        (a * a + b * b) as f64
    }

    fn index(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.d || k.iter().any(|v| v.unsigned_abs() as usize > self.k_max) {
            return None;
        }
        let w = 2 * self.k_max + 1;
        Some(k.iter().fold(0, |acc, v| acc * w + (v + self.k_max as i64) as usize))
    }

    pub fn mode(&self, k: &[i64]) -> C64 {
        self.index(k).map_or(C64::new(0.0, 0.0), |i| self.modes[i])
    }

    /// Sets `û_k = c` and `û_{−k} = conj(c)`.
    pub fn set_mode(&mut self, k: &[i64], c: C64) -> Result<()> {
        let i = self.index(k).ok_or_else(|| Error::InvalidInput(format!("mode {k:?} is outside the cutoff")))?;
        let neg: Vec<i64> = k.iter().map(|v| -v).collect();
        let j = self.index(&neg).expect("cutoff is symmetric");
        if i == j && c.im != 0.0 {
            return Err(Error::InvalidInput("the zero mode of a real field is real".into()));
        }
        self.modes[i] = c;
        self.modes[j] = c.conj();
        Ok(())
    }

    fn point_index(&self, j: usize) -> Vec<usize> {
        if self.d == 1 {
            vec![j]
        } else {
            vec![j / self.n, j % self.n]
        }
    }

    /// Position of compact index `idx` on the full FFT grid.
    fn full_index(&self, idx: usize) -> usize {
        let wrap = |k: i64| if k < 0 { (k + self.n as i64) as usize } else { k as usize };
        let [a, b] = self.wavevector(idx);
        if self.d == 1 {
            wrap(a)
        } else {
            wrap(a) * self.n + wrap(b)
        }
    }

    /// Values of `Σ_k m(k) û_k e^{ik·x}` on the collocation grid.
    pub fn collocation_with(&self, t: &Transform, m: impl Fn([i64; 2]) -> C64) -> Vec<f64> {
        let mut buf = vec![C64::new(0.0, 0.0); t.points()];
        for (i, c) in self.modes.iter().enumerate() {
            buf[self.full_index(i)] = m(self.wavevector(i)) * c;
        }
        t.inverse(&mut buf);
        buf.iter().map(|v| v.re).collect()
    }

    pub fn collocation(&self, t: &Transform) -> Vec<f64> {
        self.collocation_with(t, |_| C64::new(1.0, 0.0))
    }

    /// Coefficients of collocation values, projected onto `|k_i| ≤ K`.
    pub fn project(&self, t: &Transform, vals: &[f64]) -> Vec<C64> {
        let mut buf: Vec<C64> = vals.iter().map(|v| C64::new(*v, 0.0)).collect();
        t.forward(&mut buf);
        (0..self.modes.len()).map(|i| buf[self.full_index(i)]).collect()
    }

    pub fn set_collocation(&mut self, t: &Transform, vals: &[f64]) {
        self.modes = self.project(t, vals);
        self.enforce_reality();
    }

    /// Replaces `û_k, û_{−k}` by their Hermitian average.
    pub fn enforce_reality(&mut self) {
        let m = self.modes.len();
        for i in 0..m / 2 + 1 {
            let j = m - 1 - i;
            let c = 0.5 * (self.modes[i] + self.modes[j].conj());
            self.modes[i] = c;
            self.modes[j] = c.conj();
        }
    }

    /// `∂_axis u` on the collocation grid.
    pub fn derivative(&self, t: &Transform, axis: usize) -> Vec<f64> {
        self.collocation_with(t, |k| C64::new(0.0, k[axis] as f64))
    }

    /// `∂_a ∂_b u` on the collocation grid.
    pub fn second_derivative(&self, t: &Transform, a: usize, b: usize) -> Vec<f64> {
        self.collocation_with(t, |k| C64::new(-(k[a] * k[b]) as f64, 0.0))
    }

    /// `|D^r u|²` pointwise: `u²`, `|∇u|²` or `Σ_{ab} (∂_a∂_b u)²`.
    pub fn derivative_energy(&self, t: &Transform, r: usize) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; t.points()];
        let mut add = |v: Vec<f64>| acc.iter_mut().zip(v).for_each(|(a, x)| *a += x * x);
        match r {
            0 => add(self.collocation(t)),
            1 => (0..self.d).for_each(|a| add(self.derivative(t, a))),
            2 => {
                for a in 0..self.d {
                    for b in 0..self.d {
                        add(self.second_derivative(t, a, b));
                    }
                }
            }
            _ => return Err(Error::InvalidInput(format!("derivative order {r} is not 0, 1 or 2"))),
        }
        Ok(acc)
    }

    /// `‖(1 − Δ)^{s/2} u‖_{L^q}` through the collocation grid.
    pub fn hsq_norm(&self, t: &Transform) -> f64 {
        let s = self.s;
        let v = self.collocation_with(t, |k| C64::new((1.0 + (k[0] * k[0] + k[1] * k[1]) as f64).powf(0.5 * s), 0.0));
        mean_lq(&v, self.q)
    }

    /// `‖u‖_{L²}` by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.modes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.modes.iter().zip(&other.modes).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// `(mean |v|^q)^{1/q}` on a uniform grid.
pub fn mean_lq(v: &[f64], q: Exponent) -> f64 {
    match q {
        Exponent::Infinity => v.iter().map(|x| x.abs()).fold(0.0, f64::max),
        Exponent::Finite(q) => (v.iter().map(|x| x.abs().powf(q)).sum::<f64>() / v.len() as f64).powf(1.0 / q),
    }
}
