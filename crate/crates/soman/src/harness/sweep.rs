use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trial::{run_trial_detailed, trial_seed, TrialRecord, TRIAL_CSV_HEADER};
use super::{Cell, ExperimentConfig};
use crate::error::{Error, Result};

pub const TRIALS_CSV: &str = "trials.csv";
pub const SUMMARY_JSON: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub key: String,
    pub axis: String,
    pub value: f64,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    /// Binomial standard error `√(r(1−r)/n)`.
    pub stderr: f64,
    pub failures: usize,
    pub mean_wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSummary {
    pub axis: String,
    pub values: Vec<f64>,
    pub rates: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Indices `k` where `r[k+1] < r[k] − (se[k] + se[k+1])`.
    pub violations: Vec<usize>,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells: Vec<CellSummary>,
    pub axes: Vec<AxisSummary>,
    pub total_trials: usize,
    pub resumed_trials: usize,
}

/// Steps along which the rate drops by more than the combined standard errors.
pub fn monotone_within_stderr(rates: &[f64], stderrs: &[f64]) -> Vec<usize> {
    (0..rates.len().saturating_sub(1)).filter(|&k| rates[k + 1] < rates[k] - (stderrs[k] + stderrs[k + 1])).collect()
}

pub fn load_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header = rd.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != TRIAL_CSV_HEADER {
        return Err(Error::Format(format!("{}: unexpected header {header:?}", path.display())));
    }
    let mut out = Vec::new();
    for row in rd.deserialize() {
        match row {
            Ok(r) => out.push(r),
            // A torn final line from an interrupted run is rerun.
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => continue,
        }
    }
    Ok(out)
}

/// Per-cell rates in configuration order plus per-axis monotonicity.
pub fn summarize(cfg: &ExperimentConfig, records: &[TrialRecord], resumed: usize) -> SweepSummary {
    let mut cells = Vec::new();
    for cell in cfg.cells() {
        let key = cell.key();
        let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.cell_key() == key && r.trial < cfg.trials).collect();
        let n = rows.len();
        let successes = rows.iter().filter(|r| r.success).count();
        let rate = if n == 0 { 0.0 } else { successes as f64 / n as f64 };
        let stderr = if n == 0 { 0.0 } else { (rate * (1.0 - rate) / n as f64).sqrt() };
        cells.push(CellSummary {
            key,
            axis: cell.axis.clone(),
            value: cell.value,
            trials: n,
            successes,
            rate,
            stderr,
            failures: rows.iter().filter(|r| r.status != "ok").count(),
            mean_wall_s: if n == 0 { 0.0 } else { rows.iter().map(|r| r.wall_s).sum::<f64>() / n as f64 },
        });
    }
    let mut axes: Vec<AxisSummary> = Vec::new();
    for c in &cells {
        if c.axis == "base" {
            continue;
        }
        if !axes.iter().any(|a| a.axis == c.axis) {
            axes.push(AxisSummary { axis: c.axis.clone(), values: vec![], rates: vec![], stderrs: vec![], violations: vec![], monotone: true });
        }
    }
    for a in &mut axes {
        let mut pts: Vec<&CellSummary> = cells.iter().filter(|c| c.axis == a.axis).collect();
        pts.sort_by(|x, y| x.value.total_cmp(&y.value));
        a.values = pts.iter().map(|c| c.value).collect();
        a.rates = pts.iter().map(|c| c.rate).collect();
        a.stderrs = pts.iter().map(|c| c.stderr).collect();
        a.violations = monotone_within_stderr(&a.rates, &a.stderrs);
        a.monotone = a.violations.is_empty();
    }
    SweepSummary { total_trials: records.len(), resumed_trials: resumed, cells, axes }
}

/// Runs every `(cell, trial)` pair not already present in
/// `out_dir/trials.csv`, appending one flushed row per trial, then writes
/// `out_dir/summary.json`.
pub fn run_sweep(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<SweepSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join(TRIALS_CSV);
    let existing = if csv_path.exists() { load_records(&csv_path)? } else { vec![] };
    let done: HashSet<(String, usize)> = existing.iter().map(|r| (r.cell_key(), r.trial)).collect();

    let jobs: Vec<(Cell, usize)> = cfg
        .cells()
        .into_iter()
        .flat_map(|c| (0..cfg.trials).map(move |t| (c.clone(), t)))
        .filter(|(c, t)| !done.contains(&(c.key(), *t)))
        .collect();

    let fresh = !csv_path.exists() || fs::metadata(&csv_path)?.len() == 0;
    let mut file = OpenOptions::new().create(true).append(true).open(&csv_path)?;
    if fresh {
        writeln!(file, "{TRIAL_CSV_HEADER}")?;
    } else {
        // Start on a clean line if the previous run was cut mid-row.
        let bytes = fs::read(&csv_path)?;
        if bytes.last().is_some_and(|&b| b != b'\n') {
            writeln!(file)?;
        }
    }
    let writer = Mutex::new(csv::WriterBuilder::new().has_headers(false).from_writer(file));
    let new_rows = Mutex::new(Vec::with_capacity(jobs.len()));

    let run = || -> Result<()> {
        jobs.par_iter().try_for_each(|(cell, t)| -> Result<()> {
            let seed = trial_seed(cfg.seed, &cell.key(), *t);
            let rec = run_trial_detailed(cfg, cell, *t, seed).record;
            {
                let mut w = writer.lock().expect("writer poisoned");
                w.serialize(&rec)?;
                w.flush()?;
            }
            new_rows.lock().expect("rows poisoned").push(rec);
            Ok(())
        })
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Param(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    }

    let resumed = existing.len();
    let mut all = existing;
    all.extend(new_rows.into_inner().expect("rows poisoned"));
    let summary = summarize(cfg, &all, resumed);
    crate::io::write_json(&cfg.out_dir.join(SUMMARY_JSON), &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotonicity_allows_one_stderr_each() {
        assert!(monotone_within_stderr(&[0.2, 0.5, 0.9], &[0.05, 0.05, 0.05]).is_empty());
        assert!(monotone_within_stderr(&[0.5, 0.45], &[0.05, 0.05]).is_empty());
        assert_eq!(monotone_within_stderr(&[0.5, 0.3, 0.9], &[0.05, 0.05, 0.05]), vec![0]);
        assert!(monotone_within_stderr(&[], &[]).is_empty());
    }
}
