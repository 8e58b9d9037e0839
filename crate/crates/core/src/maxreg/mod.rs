//! Maximal regularity of `u' + Au = f` on the half line: mild solutions,
//! the frequency-domain multiplier route, constants and traces.

mod constants;
mod mild;
mod multiplier;
mod trace;

pub use constants::{
    gamma_sectoriality_from_maxreg, maxreg_constant, maxreg_ratio, random_forcing, ConstantReport, SectorialityReport,
    FORCING_SCALES, PROFILE_POINTS, TRIAL_INTERVALS,
};
pub use mild::{convolve, convolve_arc, MildSolution, PropagatorCache};
pub use multiplier::{dtheta_a1mtheta, i_xi_pow};
pub use trace::{
    extension, extension_norm, holder_trace_norms, sup_norm, trace_chain, trace_formula, trace_zero, ExpSum,
    HolderTrace, TraceChain, HOLDER_LEVELS,
};
