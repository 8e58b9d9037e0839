//! Step-function models of γ(0,T;X) and γ(0,T;H,X) with their norms.

mod bound;
mod fourier;
mod grid;
mod hardy;
mod norm;
mod step;

pub use bound::{gamma_bound_estimate, gamma_bound_real, gaussian_ratio, BoundEstimate, RATIO_SAMPLES};
pub use fourier::{
    bin_kernel, fourier, ft_interval, gamma_s_norm, half_line_panels, sobolev_covariance, transform_at, FreqGrid,
    Spectrum, GRADING_LEVELS, PANEL_ORDER,
};
pub use grid::{TimeGrid, Weight};
pub use hardy::{hardy_check, hardy_covariances, HardyPair};
pub use norm::{
    gamma_norm, gamma_norm_hilbert, gamma_norm_mc, gamma_norm_sqfn, hilbert_from_cov, mc_from_columns,
    norm_from_cov, sqfn_from_cov, GammaEstimate, Method, NormChoice, DEFAULT_SAMPLES,
};
pub use step::{apply_multiplier, integrate, restrict, Multiplier, StepFunction};
