//! Cylindrical Brownian motion, Itô integrals of step processes and the
//! stochastic convolution `S⋄G`.

mod brownian;
mod constants;
mod convolution;
mod process;

pub use brownian::{CylindricalBM, MAX_DEPTH};
pub use constants::{
    lp_norm_estimate, path_covariance, path_norms, random_integrand, spacetime_reg_check, stoch_maxreg_constant,
    stoch_maxreg_ratio, SpacetimeReport, StochRatio, INTEGRAND_PIECES,
};
pub use convolution::{is_diagonal, stoch_convolve, stoch_convolve_auto, stoch_convolve_exact, weak_residual};
pub use process::{ito_integral, ito_isomorphism_check, AdaptedProcess, IsoReport, PathEnsemble};
