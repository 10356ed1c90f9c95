//! Batch experiments over many simulated paths.
//!
//! Path `i` of a run is a pure function of `(master_seed, i)`, so results
//! do not depend on the number of worker threads. Parallel results are
//! collected in path order before anything is summarized or written.

mod config;
mod peek;
mod report;
mod sim;
mod suite;

use serde::Serialize;

pub use config::{ExperimentConfig, PeekProcess, PeekStrategy};
pub use peek::{run_peek_experiment, PathSummary, PeekOutcome, PeekRunRecord, PeekSummary, TypeIRow};
pub use report::{build_id, emit_report, Summary, PATHS_FILE, RECORDS_FILE, SCHEMA_VERSION, SUMMARY_FILE};
pub use sim::PathSim;
pub use suite::{
    run_decomposition_roundtrip, run_invariant_suite, run_invariant_suite_with, run_tau_mu,
    simulate_paths, simulate_stopped, summarize_paths, trace_paths, Fault, InvariantReport,
    InvariantResult, RoundtripReport, RoundtripRow, SimulationSummary, StopRule, StoppedSample,
    TauMuReport, TraceRow, VilleRow, AY_TOL, IDENTITY_TOL, LOG_BOUND_TOL, ROUNDTRIP_TOL,
};

/// Flat CSV form of a [`PeekRunRecord`].
#[derive(Debug, Clone, Serialize)]
pub struct RecordRow {
    pub path: usize,
    pub process: String,
    pub strategy: String,
    pub stop_time: Option<u64>,
    pub censored: bool,
    pub reported_p: f64,
    pub excluded: bool,
    pub tau_f: Option<u64>,
    pub rho_f: Option<u64>,
}

impl From<&PeekRunRecord> for RecordRow {
    fn from(r: &PeekRunRecord) -> Self {
        Self {
            path: r.path,
            process: r.process.to_string(),
            strategy: r.strategy.to_string(),
            stop_time: r.stop_time,
            censored: r.stop_time.is_none(),
            reported_p: r.reported_p,
            excluded: r.excluded,
            tau_f: r.tau_f,
            rho_f: r.rho_f,
        }
    }
}
