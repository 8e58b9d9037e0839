use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::linalg::C64;

type Eval = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

/// Holomorphic function on the sector |arg z| < angle with the decay
/// certificate `|f(z)| ≤ C |z|^ε / (1 + |z|)^{2ε}`.
#[derive(Clone)]
pub struct HoloFn {
    pub name: String,
    pub angle: f64,
    pub eps: f64,
    pub c: f64,
    eval: Eval,
}

impl fmt::Debug for HoloFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HoloFn")
            .field("name", &self.name)
            .field("angle", &self.angle)
            .field("eps", &self.eps)
            .field("c", &self.c)
            .finish()
    }
}

impl HoloFn {
    pub fn new(
        name: impl Into<String>,
        angle: f64,
        eps: f64,
        c: f64,
        eval: impl Fn(C64) -> C64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(angle > 0.0 && angle <= PI) {
            return invalid(format!("analyticity angle must lie in (0, π], got {angle}"));
        }
        if !(eps > 0.0 && c > 0.0) {
            return invalid("decay certificate needs ε > 0 and C > 0");
        }
        Ok(HoloFn { name: name.into(), angle, eps, c, eval: Arc::new(eval) })
    }

    pub fn eval(&self, z: C64) -> C64 {
        (self.eval)(z)
    }

    pub fn bound(&self, r: f64) -> f64 {
        self.c * r.powf(self.eps) / (1.0 + r).powf(2.0 * self.eps)
    }

    pub fn certificate_holds(&self, z: C64) -> bool {
        let r = z.norm();
        self.eval(z).norm() <= self.bound(r) * (1.0 + 1e-9) + 1e-300
    }

    /// `z^{1/2} e^{-z}`.
    pub fn sqrt_exp() -> Self {
        HoloFn::new("sqrt_exp", 3.0 * PI / 8.0, 0.5, 1.5, |z| z.sqrt() * (-z).exp()).expect("valid preset")
    }

    /// `z / (1 + z)²`.
    pub fn rational() -> Self {
        HoloFn::new("rational", 3.0 * PI / 4.0, 1.0, 7.0, |z| z / ((1.0 + z) * (1.0 + z))).expect("valid preset")
    }

    /// `z e^{-z}`.
    pub fn z_exp() -> Self {
        HoloFn::new("z_exp", 3.0 * PI / 8.0, 1.0, 5.5, |z| z * (-z).exp()).expect("valid preset")
    }

    pub fn product(&self, other: &HoloFn) -> Self {
        let (f, g) = (self.eval.clone(), other.eval.clone());
        HoloFn {
            name: format!("{}*{}", self.name, other.name),
            angle: self.angle.min(other.angle),
            eps: self.eps + other.eps,
            c: self.c * other.c,
            eval: Arc::new(move |z| f(z) * g(z)),
        }
    }

    /// `z ↦ f(tz)`; same certificate up to the constant `max(t, 1/t)^ε`.
    pub fn dilate(&self, t: f64) -> Self {
        let f = self.eval.clone();
        let k = t.max(1.0 / t).powf(self.eps);
        HoloFn {
            name: format!("{}(t·)", self.name),
            angle: self.angle,
            eps: self.eps,
            c: self.c * k,
            eval: Arc::new(move |z| f(z * t)),
        }
    }

    /// Sampled `sup |f|` on the rays `arg z = ±σ`.
    pub fn sup_on_rays(&self, sigma: f64) -> f64 {
        let mut best = 0.0f64;
        for k in 0..=2400 {
            let r = 10f64.powf(-12.0 + k as f64 * 0.01);
            for s in [sigma, -sigma] {
                best = best.max(self.eval(C64::from_polar(r, s)).norm());
            }
        }
        best
    }
}
