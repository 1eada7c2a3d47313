//! Side-by-side comparison of finished runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use genmix::{Error, Result};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub run_id: String,
    pub dir: PathBuf,
    pub baseline: Option<String>,
    pub modes: Option<usize>,
    pub kde_loglik: f64,
    /// Highest log-likelihood among runs with the same mode count.
    pub best: bool,
}

/// Final `kde_loglik` (and run id) from a run's `metrics.csv`.
pub fn read_final_loglik(dir: &Path) -> Result<(String, f64)> {
    let path = dir.join("metrics.csv");
    let mut reader = csv::Reader::from_path(&path).map_err(|e| Error::Parse {
        line: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    let mut found: Option<(usize, String, f64)> = None;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: i as u64 + 2,
            message: e.to_string(),
        })?;
        if rec.len() != 4 {
            return Err(Error::Parse {
                line: i as u64 + 2,
                message: format!("expected 4 fields, found {}", rec.len()),
            });
        }
        if &rec[2] != "kde_loglik" {
            continue;
        }
        let parse_err = |what: &str| Error::Parse {
            line: i as u64 + 2,
            message: format!("invalid {what}"),
        };
        let round: usize = rec[1].parse().map_err(|_| parse_err("round"))?;
        let value: f64 = rec[3].parse().map_err(|_| parse_err("value"))?;
        if found.as_ref().is_none_or(|(r, _, _)| round >= *r) {
            found = Some((round, rec[0].to_string(), value));
        }
    }
    found
        .map(|(_, id, v)| (id, v))
        .ok_or_else(|| Error::Format(format!("{} has no kde_loglik", path.display())))
}

/// One row per readable run, sorted by mode count then log-likelihood
/// (best first). Unreadable runs are reported and skipped.
pub fn compare(dirs: &[PathBuf]) -> Vec<CompareRow> {
    let mut rows = Vec::new();
    for dir in dirs {
        let (run_id, kde_loglik) = match read_final_loglik(dir) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("skipping {}: {e}", dir.display());
                eprintln!("warning: skipping {}: {e}", dir.display());
                continue;
            }
        };
        let config: Option<ExperimentConfig> = fs::read(dir.join("config.json"))
            .ok()
            .and_then(|b| serde_json::from_slice(&b).ok());
        rows.push(CompareRow {
            run_id,
            dir: dir.clone(),
            baseline: config.as_ref().map(|c| c.baseline.as_str().to_string()),
            modes: config.as_ref().and_then(|c| c.n_modes()),
            kde_loglik,
            best: false,
        });
    }
    rows.sort_by(|a, b| a.modes.cmp(&b.modes).then(b.kde_loglik.total_cmp(&a.kde_loglik)));
    let mut i = 0;
    while i < rows.len() {
        // sorted, so the first row of each mode group is its best
        rows[i].best = true;
        let modes = rows[i].modes;
        while i < rows.len() && rows[i].modes == modes {
            i += 1;
        }
    }
    rows
}

pub fn to_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from("run_id,baseline,modes,kde_loglik,best\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:?},{}",
            r.run_id,
            r.baseline.as_deref().unwrap_or(""),
            r.modes.map(|m| m.to_string()).unwrap_or_default(),
            r.kde_loglik,
            r.best
        );
    }
    out
}

pub fn to_table(rows: &[CompareRow]) -> String {
    let width = rows.iter().map(|r| r.run_id.len()).max().unwrap_or(6).max(6);
    let mut out = format!("{:<width$}  {:<12}  {:>5}  {:>12}\n", "run", "baseline", "modes", "kde_loglik");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:<12}  {:>5}  {:>12.4}{}",
            r.run_id,
            r.baseline.as_deref().unwrap_or("-"),
            r.modes.map(|m| m.to_string()).unwrap_or_else(|| "-".into()),
            r.kde_loglik,
            if r.best { "  *" } else { "" }
        );
    }
    out
}
