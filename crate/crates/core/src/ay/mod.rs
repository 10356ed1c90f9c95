//! Azéma–Yor processes: estimates of `E[g(S_∞) | F_t]` built from the
//! current value and running maximum of a test martingale.

mod pchip;
mod potential;
mod process;

pub use pchip::MonotoneTable;
pub use potential::{Mode, Potential, PotentialEval, PotentialSpec, ScoreSpec};
pub use process::{
    ay_forms, ay_stop_rule, bachelier_residual, bregman, expected_ultimate_max, maxplus_lower,
    mm_decompose, q_logmax_bound_check, stopped_max_dominance_check, AyState, PrecheckStatus,
    StoppedMaxReport,
};
