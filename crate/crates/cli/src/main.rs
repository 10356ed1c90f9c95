//! Command-line driver for peekstat experiments.
//!
//! Every subcommand writes `summary.json`, `records.csv` and `paths.csv`
//! into the output directory. The exit status is 0 when every check of the
//! run passed, 1 when one failed and 2 on errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use peekstat::harness::{
    emit_report, run_decomposition_roundtrip, run_invariant_suite, run_peek_experiment,
    simulate_paths, summarize_paths, trace_paths, ExperimentConfig, RecordRow,
};

#[derive(Parser)]
#[command(name = "peekstat", version = peekstat::harness::build_id(), about = "Peeking-robust sequential statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate martingale paths and summarize their running maxima.
    Simulate(Common),
    /// Run every peeking strategy against every p-value process.
    Peek(Common),
    /// Check all pathwise identities and distributional bounds.
    Verify(Common),
    /// Rebuild martingale paths from their Bachelier processes.
    Roundtrip(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; unset fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; path `i` draws from a stream derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of simulated paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Steps per path.
    #[arg(long)]
    horizon: Option<u64>,
    /// Output directory (default: the config's `out_dir`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(n) = self.paths {
            cfg.n_paths = n;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = Some(out.clone());
        }
        cfg.validate().context("invalid configuration")?;
        let out = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
        Ok((cfg, out))
    }
}

fn run(cli: Cli) -> Result<bool> {
    let (name, common) = match &cli.command {
        Command::Simulate(c) => ("simulate", c),
        Command::Peek(c) => ("peek", c),
        Command::Verify(c) => ("verify", c),
        Command::Roundtrip(c) => ("roundtrip", c),
    };
    let (cfg, out) = common.resolve()?;
    let traces = trace_paths(&cfg)?;
    let passed = match cli.command {
        Command::Simulate(_) => {
            let paths = simulate_paths(&cfg)?;
            let summary = summarize_paths(&paths, cfg.horizon, cfg.delta)?;
            let ok = summary.running_max_dominance.holds();
            emit_report(&out, name, &cfg, ok, &summary, &paths, &traces)?;
            ok
        }
        Command::Peek(_) => {
            let outcome = run_peek_experiment(&cfg)?;
            let rows: Vec<RecordRow> = outcome.records.iter().map(RecordRow::from).collect();
            let ok = outcome.summary.accounting_ok;
            emit_report(&out, name, &cfg, ok, &outcome.summary, &rows, &traces)?;
            ok
        }
        Command::Verify(_) => {
            let report = run_invariant_suite(&cfg)?;
            for r in report.invariants.iter().filter(|r| !r.passed) {
                eprintln!(
                    "FAILED {}: deviation {:e} > {:e} (path {:?}, step {:?}, seed {:?})",
                    r.name, r.worst_deviation, r.tolerance, r.path, r.step, r.seed
                );
            }
            if report.all_vacuous {
                eprintln!("note: every invariant was vacuous for this configuration");
            }
            emit_report(&out, name, &cfg, report.all_passed, &report, &report.invariants, &traces)?;
            report.all_passed
        }
        Command::Roundtrip(_) => {
            let report = run_decomposition_roundtrip(&cfg)?;
            emit_report(&out, name, &cfg, report.passed, &report, &report.rows, &traces)?;
            report.passed
        }
    };
    println!("{name}: {} ({})", if passed { "pass" } else { "FAIL" }, out.display());
    Ok(passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
