//! Spectral stochastic heat equation with gradient or sequence noise on the
//! torus, Nemytskii maps of `(u, Du, D²u)`, square-function norms and
//! measured regularity exponents.
//!
//! The torus stands in for `ℝ^d`: the linear flow is exact mode by mode, so
//! only constants differ from the whole-space setting.

pub mod exponents;
pub mod field;
pub mod nemytskii;
pub mod noise;
pub mod sqfn;
pub mod step;

pub use exponents::{exponent_table, DeterministicExponents, ExponentRow, StochasticExponents, EXPONENT_HEADER, MIN_R2};
pub use field::{dealiased_points, mean_lq, SpectralField, Transform};
pub use nemytskii::{jet, lipschitz_check, Jet, NemytskiiMap, NemytskiiReport};
pub use noise::{check_sequence, NoisePreset, SequenceCheck, MAX_SEQUENCE};
pub use sqfn::{measure_sqfn_norm, quantile, sqfn_values, trace_norms, SqfnStats};
pub use step::{
    continuum_growth_rate, discrete_growth_rate, second_moment_growth, simulate, simulate_with, spectral_heat_step,
    GrowthEstimate, HeatEnsemble, HeatStepper, StepOutcome, PARABOLICITY_LIMIT, STABILITY_BOUND,
};
