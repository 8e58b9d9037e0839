use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::holo::HoloFn;
use super::op::SectorialOp;
use crate::error::{invalid, Error, Result};
use crate::gamma::{norm_from_cov, GammaEstimate, NormChoice};
use crate::linalg::{march, real_part, CMat, C64};
use crate::space::SpaceModel;

fn center(a: &SectorialOp) -> f64 {
    let hi = a.max_modulus();
    if hi == 0.0 {
        return 0.0;
    }
    if a.invertible() {
        0.5 * (a.min_modulus().ln() + hi.ln())
    } else {
        hi.ln()
    }
}

/// `f(A) = (1/2πi) ∫_{∂Σ_σ} f(z) (z - A)^{-1} dz`, complex result.
pub fn hinf_calculus_c(a: &SectorialOp, f: &HoloFn, sigma: f64) -> Result<CMat> {
    if !(sigma > a.angle() && sigma < f.angle) {
        return invalid(format!(
            "contour angle {sigma:.6} must lie strictly between the operator angle {:.6} and the function angle {:.6}",
            a.angle(),
            f.angle
        ));
    }
    let d = (sigma - a.angle()).min(f.angle - sigma);
    let h = 2.0 * PI * d / 36.0;
    let n = a.dim();
    let mut acc = CMat::zeros(n, n);
    let lower = C64::from_polar(1.0, -sigma);
    let upper = C64::from_polar(1.0, sigma);
    march(
        center(a),
        h,
        1e-16,
        |x| {
            let r = x.exp();
            let mut term = CMat::zeros(n, n);
            // Lower ray outward, upper ray inward; dz = z d(ln r).
            for (w, sign) in [(lower, 1.0), (upper, -1.0)] {
                let z = w * r;
                if !f.certificate_holds(z) {
                    return Err(Error::Certificate(format!("|f(z)| exceeds the declared decay bound at z = {z}")));
                }
                let k = a.dunford_kernel(z)?;
                term += k * (f.eval(z) * z * sign);
            }
            Ok(term)
        },
        |t| t.norm(),
        |t| acc += t,
    )?;
    Ok(acc * (C64::new(h, 0.0) / C64::new(0.0, 2.0 * PI)))
}

pub fn hinf_calculus(a: &SectorialOp, f: &HoloFn, sigma: f64) -> Result<DMatrix<f64>> {
    Ok(real_part(&hinf_calculus_c(a, f, sigma)?))
}

/// `f(A)` by the spectral theorem when A is normal, by the contour
/// midway between the two angles otherwise.
pub fn apply_holo(a: &SectorialOp, f: &HoloFn) -> Result<CMat> {
    if let Some(m) = a.spectral(|z| f.eval(z)) {
        return Ok(m);
    }
    hinf_calculus_c(a, f, 0.5 * (a.angle() + f.angle))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub sigma: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleReport {
    /// max |arg λ|.
    pub eigen_angle: f64,
    /// sampled sup of `‖z (z + A)^{-1}‖` on `arg z = ±σ'`.
    pub profile: Vec<ProfileRow>,
}

pub const PROFILE_ROWS: usize = 16;

pub fn measure_angle(a: &SectorialOp) -> Result<AngleReport> {
    if !a.invertible() {
        return Err(Error::NotSectorial("operator is not injective".into()));
    }
    let lo = a.min_modulus() * 1e-6;
    let hi = a.max_modulus() * 1e6;
    let span = PI - a.angle();
    let mut profile = Vec::with_capacity(PROFILE_ROWS);
    for k in 0..PROFILE_ROWS {
        let sigma = span * k as f64 / PROFILE_ROWS as f64;
        let mut sup = 0.0f64;
        for j in 0..=480 {
            let r = lo * (hi / lo).powf(j as f64 / 480.0);
            for s in [sigma, -sigma] {
                let z = C64::from_polar(r, s);
                let m = a.resolvent(z)? * z;
                sup = sup.max(crate::linalg::op_norm_c(&m));
            }
        }
        profile.push(ProfileRow { sigma, sup });
    }
    Ok(AngleReport { eigen_angle: a.angle(), profile })
}

/// `‖t ↦ φ(tA)x‖_{γ(ℝ₊, dt/t; X)}`, trapezoid in ln t.
pub fn sqfn_norm(a: &SectorialOp, phi: &HoloFn, x: &DVector<f64>, space: &SpaceModel) -> Result<GammaEstimate> {
    if x.len() != a.dim() || space.dim != a.dim() {
        return invalid("vector, operator and space dimensions differ");
    }
    if !a.invertible() {
        return Err(Error::Precondition("square function norms need an invertible operator".into()));
    }
    if phi.angle <= a.angle() {
        return invalid("φ must be analytic on a sector larger than the operator angle");
    }
    let n = a.dim();
    if x.iter().all(|v| *v == 0.0) {
        return norm_from_cov(&DMatrix::zeros(n, n), space, NormChoice::Auto);
    }
    let h = 2.0 * PI * (phi.angle - a.angle()) / 40.0;
    let xc = crate::linalg::to_complex_vec(x);
    let mut cov = DMatrix::<f64>::zeros(n, n);
    march(
        -center(a),
        h,
        1e-16,
        |s| {
            let t = s.exp();
            let m = apply_holo(a, &phi.dilate(t))?;
            let v = m * &xc;
            let re = v.map(|z| z.re);
            let im = v.map(|z| z.im);
            Ok(&re * re.transpose() + &im * im.transpose())
        },
        |c| c.trace(),
        |c| cov += c,
    )?;
    norm_from_cov(&(cov * h), space, NormChoice::Auto)
}
