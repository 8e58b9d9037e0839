use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::linalg::{cphi1, cphi2, real_part, to_complex, CMat, C64};

/// Eigenvalues with |arg λ| this close to π count as lying on the
/// negative real axis.
const AXIS_TOL: f64 = 1e-12;

/// `exp(-tA)`, `Φ = ∫_0^t S(r) dr` and `Ψ = ∫_0^t Φ(r) dr` for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub dt: f64,
    pub s: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub psi: DMatrix<f64>,
}

/// Real square matrix with cached spectral data.
#[derive(Debug, Clone)]
pub struct SectorialOp {
    matrix: DMatrix<f64>,
    eigenvalues: Vec<C64>,
    /// Unitary Q with A = Q diag(λ) Q*, present for normal matrices.
    basis: Option<CMat>,
    angle: f64,
    invertible: bool,
}

impl SectorialOp {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return invalid("operator must be a non-empty square matrix");
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return invalid("operator has non-finite entries");
        }
        let (q, t) = to_complex(&matrix).schur().unpack();
        let eigenvalues: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
        let scale = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max).max(matrix.norm());
        let mut angle = 0.0f64;
        let mut invertible = true;
        for z in &eigenvalues {
            if z.norm() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                invertible = false;
                continue;
            }
            let a = z.arg().abs();
            if a >= PI - AXIS_TOL {
                return Err(Error::NotSectorial(format!("eigenvalue {z} lies on the negative real axis")));
            }
            angle = angle.max(a);
        }
        let comm = &matrix * matrix.transpose() - matrix.transpose() * &matrix;
        let nrm = matrix.norm();
        let basis = if comm.norm() <= 1e-12 * nrm * nrm { Some(q) } else { None };
        Ok(SectorialOp { matrix, eigenvalues, basis, angle, invertible })
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        SectorialOp::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn is_normal(&self) -> bool {
        self.basis.is_some()
    }

    /// max |arg λ| over the non-zero spectrum.
    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn invertible(&self) -> bool {
        self.invertible
    }

    pub fn spectrum_in_open_right_half_plane(&self) -> bool {
        self.invertible && self.eigenvalues.iter().all(|z| z.re > 0.0)
    }

    pub fn min_modulus(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_modulus(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn op_norm(&self) -> f64 {
        crate::linalg::op_norm(&self.matrix)
    }

    /// `Q f(Λ) Q*` for normal operators.
    pub fn spectral(&self, f: impl Fn(C64) -> C64) -> Option<CMat> {
        let q = self.basis.as_ref()?;
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.eigenvalues.iter().map(|z| f(*z)),
        ));
        Some(q * d * q.adjoint())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        SectorialOp::new(&self.matrix * c)
    }

    pub fn shifted(&self, w: f64) -> Result<Self> {
        SectorialOp::new(&self.matrix + DMatrix::identity(self.dim(), self.dim()) * w)
    }

    fn require_analytic(&self) -> Result<()> {
        if self.angle >= PI / 2.0 {
            return Err(Error::NotAnalytic(format!("angle {:.6} is not below π/2", self.angle)));
        }
        Ok(())
    }

    /// `exp(-tA)`.
    pub fn semigroup(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(t >= 0.0 && t.is_finite()) {
            return invalid(format!("semigroup time must be finite and nonnegative, got {t}"));
        }
        self.require_analytic()?;
        let n = self.dim();
        if t == 0.0 {
            return Ok(DMatrix::identity(n, n));
        }
        if let Some(m) = self.spectral(|z| (-z * t).exp()) {
            return Ok(real_part(&m));
        }
        Ok((&self.matrix * (-t)).exp())
    }

    pub fn propagator(&self, dt: f64) -> Result<Propagator> {
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("time step must be positive, got {dt}"));
        }
        self.require_analytic()?;
        let n = self.dim();
        if let Some(q) = &self.basis {
            let map = |f: &dyn Fn(C64) -> C64| {
                let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(n, self.eigenvalues.iter().map(|z| f(*z))));
                real_part(&(q * d * q.adjoint()))
            };
            let s = map(&|z| (-z * dt).exp());
            let phi = map(&|z| cphi1(-z * dt) * dt);
            let psi = map(&|z| cphi2(-z * dt) * (dt * dt));
            return Ok(Propagator { dt, s, phi, psi });
        }
        let mut big = DMatrix::zeros(3 * n, 3 * n);
        big.view_mut((0, 0), (n, n)).copy_from(&(-&self.matrix * dt));
        big.view_mut((0, n), (n, n)).fill_with_identity();
        big.view_mut((n, 2 * n), (n, n)).fill_with_identity();
        big.view_mut((0, n), (n, n)).scale_mut(dt);
        big.view_mut((n, 2 * n), (n, n)).scale_mut(dt);
        let e = big.exp();
        Ok(Propagator {
            dt,
            s: e.view((0, 0), (n, n)).into_owned(),
            phi: e.view((0, n), (n, n)).into_owned(),
            psi: e.view((0, 2 * n), (n, n)).into_owned(),
        })
    }

    /// `(z + A)^{-1}`.
    pub fn resolvent(&self, z: C64) -> Result<CMat> {
        let n = self.dim();
        let dist = self.eigenvalues.iter().map(|l| (z + l).norm()).fold(f64::INFINITY, f64::min);
        if dist <= 1e-14 * (z.norm() + self.max_modulus()).max(f64::MIN_POSITIVE) {
            return Err(Error::Singular(format!("-{z} is in the spectrum")));
        }
        if let Some(m) = self.spectral(|l| (z + l).inv()) {
            return Ok(m);
        }
        let m = to_complex(&self.matrix) + CMat::identity(n, n) * z;
        m.try_inverse().ok_or_else(|| Error::Singular(format!("z + A is singular at z = {z}")))
    }

    /// `(zI - A)^{-1}`, the Dunford kernel.
    pub fn dunford_kernel(&self, z: C64) -> Result<CMat> {
        Ok(-self.resolvent(-z)?)
    }

    /// `A^α`; for non-normal A the fractional part uses the Balakrishnan
    /// integral.
    pub fn frac_power(&self, alpha: f64) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if !alpha.is_finite() {
            return invalid("fractional power must be finite");
        }
        if alpha == 0.0 {
            return Ok(DMatrix::identity(n, n));
        }
        if alpha == 1.0 {
            return Ok(self.matrix.clone());
        }
        if alpha < 0.0 && !self.invertible {
            return Err(Error::Singular("negative powers need an invertible operator".into()));
        }
        if self.is_normal() {
            let m = self
                .spectral(|z| if z.norm() == 0.0 { C64::new(0.0, 0.0) } else { z.powf(alpha) })
                .expect("normal operator has a basis");
            return Ok(real_part(&m));
        }
        if !self.invertible {
            return Err(Error::Precondition("fractional powers of singular non-normal operators are not supported".into()));
        }
        let k = alpha.floor();
        let beta = alpha - k;
        let base = if k >= 0.0 {
            self.matrix.pow(k as u32)
        } else {
            let inv = self.matrix.clone().try_inverse().ok_or_else(|| Error::Singular("operator is singular".into()))?;
            inv.pow((-k) as u32)
        };
        if beta == 0.0 {
            return Ok(base);
        }
        Ok(base * self.balakrishnan(beta)?)
    }

    /// `A^β = (sin πβ / π) ∫_0^∞ t^{β-1} A (t + A)^{-1} dt`, 0 < β < 1,
    /// trapezoid in ln t.
    fn balakrishnan(&self, beta: f64) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let d = PI - self.angle;
        let h = 2.0 * PI * d / 40.0;
        let lo = self.min_modulus().ln() - 39.0 / beta;
        let hi = self.max_modulus().ln() + 39.0 / (1.0 - beta);
        let steps = ((hi - lo) / h).ceil() as usize;
        let mut acc = DMatrix::<f64>::zeros(n, n);
        let id = DMatrix::<f64>::identity(n, n);
        for j in 0..=steps {
            let x = lo + j as f64 * h;
            // For large t use A (1 + A/t)^{-1} t^{β-1} to avoid overflow.
            let (m, w) = if x <= 0.0 {
                (&self.matrix + &id * x.exp(), (beta * x).exp())
            } else {
                (&id + &self.matrix * (-x).exp(), ((beta - 1.0) * x).exp())
            };
            let r = m.lu().solve(&self.matrix).ok_or_else(|| Error::Singular("t + A is singular".into()))?;
            acc += r * w;
        }
        Ok(acc * (h * (PI * beta).sin() / PI))
    }
}
