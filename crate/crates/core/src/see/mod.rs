//! Picard solver for the semilinear stochastic evolution equation
//! `dU + AU dt = (F(U) + f) dt + (B(U) + b) dW_H` and its nonautonomous
//! variant with a time-dependent operator.

mod lipschitz;
mod nonauto;
mod picard;
mod problem;

pub use lipschitz::{lipschitz_check, Diffusion, Drift, LipschitzReport, LipschitzSpec, LIPSCHITZ_SLACK};
pub use nonauto::{
    oscillation, solve_nonautonomous, split_horizon, NonautonomousSolution, OperatorFamily, SplitPiece, SPLIT_DEPTH,
    SPLIT_POINTS,
};
pub use picard::{
    mild_strong_check, picard_solve, PicardInit, PicardOptions, PicardReport, ResidualReport, DIVERGENCE_RUN,
};
pub use problem::{
    default_shift, measure_constants, InitialData, RegularityConstants, SEEProblem, DIAMOND_SAMPLES, DIAMOND_STEPS,
};
