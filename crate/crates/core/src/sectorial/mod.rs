//! Matrix sectorial operators and their holomorphic functional calculus.

mod calculus;
mod holo;
mod op;

pub use calculus::{apply_holo, hinf_calculus, hinf_calculus_c, measure_angle, sqfn_norm, AngleReport, ProfileRow, PROFILE_ROWS};
pub use holo::HoloFn;
pub use op::{Propagator, SectorialOp};
