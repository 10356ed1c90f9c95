//! `summary.json`, `records.csv` and `paths.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::suite::TraceRow;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Identifier of the build that produced a report.
pub fn build_id() -> &'static str {
    env!("PEEKSTAT_BUILD_ID")
}

#[derive(Debug, Serialize)]
pub struct Summary<'a, T: Serialize> {
    pub schema_version: u32,
    pub build_id: &'a str,
    pub command: &'a str,
    pub all_passed: bool,
    pub config: &'a ExperimentConfig,
    pub results: &'a T,
}

pub const SUMMARY_FILE: &str = "summary.json";
pub const RECORDS_FILE: &str = "records.csv";
pub const PATHS_FILE: &str = "paths.csv";

/// Writes the three report files into `out_dir`, creating it if needed.
///
/// `records` are the command's per-path rows; an empty slice still yields
/// a header-only file when `R` has a header to write.
pub fn emit_report<T: Serialize, R: Serialize>(
    out_dir: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    all_passed: bool,
    results: &T,
    records: &[R],
    traces: &[TraceRow],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let summary_path = out_dir.join(SUMMARY_FILE);
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        build_id: build_id(),
        command,
        all_passed,
        config: cfg,
        results,
    };
    let mut text = serde_json::to_string_pretty(&summary).map_err(|source| Error::Json {
        path: summary_path.clone(),
        source,
    })?;
    text.push('\n');
    fs::write(&summary_path, text).map_err(|source| Error::Io {
        path: summary_path.clone(),
        source,
    })?;
    let records_path = out_dir.join(RECORDS_FILE);
    write_csv(&records_path, records)?;
    let paths_path = out_dir.join(PATHS_FILE);
    write_csv(&paths_path, traces)?;
    Ok(vec![summary_path, records_path, paths_path])
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: Option<f64>,
    }

    #[test]
    fn writes_all_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::default();
        let files = emit_report(dir.path(), "test", &cfg, true, &vec![1, 2], &[Row { a: 1, b: None }], &[]).unwrap();
        assert_eq!(files.len(), 3);
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&files[0]).unwrap()).unwrap();
        assert_eq!(json["schema_version"], 1);
        assert_eq!(json["config"]["n_paths"], 100_000);
        assert!(json["build_id"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
        assert_eq!(fs::read_to_string(&files[1]).unwrap(), "a,b\n1,\n");
        assert_eq!(fs::read_to_string(&files[2]).unwrap(), "");
    }

    #[test]
    fn empty_experiment_gives_valid_json() {
        let dir = tempfile::tempdir().unwrap();
        let rows: [Row; 0] = [];
        let files = emit_report(dir.path(), "empty", &ExperimentConfig::default(), true, &(), &rows, &[]).unwrap();
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&files[0]).unwrap()).unwrap();
        assert!(json["results"].is_null());
    }

    #[test]
    fn unwritable_path_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("blocker");
        fs::write(&blocker, "x").unwrap();
        let err = emit_report(&blocker.join("sub"), "x", &ExperimentConfig::default(), true, &(), &[] as &[Row], &[])
            .unwrap_err();
        assert!(err.to_string().contains("blocker"), "{err}");
    }
}
