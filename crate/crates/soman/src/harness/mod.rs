//! Experiment orchestration: configuration, single trials, Monte Carlo
//! sweeps with resumable CSV output, plot emission and unit conversion.

mod physical;
mod plots;
mod sweep;
mod trial;

pub use physical::{to_normalized, to_physical, PhysicalParams, PhysicalScene};
pub use plots::{emit_field_slices, emit_plots};
pub use sweep::{load_records, monotone_within_stderr, run_sweep, summarize, AxisSummary, CellSummary, SweepSummary};
pub use trial::{match_atoms, run_trial, run_trial_detailed, scene_for, trial_seed, TrialOutput, TrialRecord, TRIAL_CSV_HEADER};

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Atom, ProblemDims};
use crate::solver::SolverConfig;

/// Convergence settings handed to the conic solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
    pub time_limit_s: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self { tol_abs: d.tol_abs, tol_rel: d.tol_rel, max_iter: d.max_iter, time_limit_s: None }
    }
}

impl SolverSettings {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            tol_abs: self.tol_abs,
            tol_rel: self.tol_rel,
            max_iter: self.max_iter,
            time_limit: self.time_limit_s.map(Duration::from_secs_f64),
            ..SolverConfig::default()
        }
    }
}

/// Additive noise and per-antenna gain/phase errors. With `snr_db` unset
/// the noiseless program is solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct NoiseSpec {
    pub snr_db: Option<f64>,
    pub sigma_gainphase: f64,
    /// Bound on `‖e‖₂`; defaults to `σ(√(2N_r) + 3)`.
    pub epsilon_e: Option<f64>,
}

impl NoiseSpec {
    pub fn is_noisy(&self) -> bool {
        self.snr_db.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizeSettings {
    /// Grid points per sample on every axis.
    pub oversample: usize,
    /// Noiseless peak threshold on `‖f‖₂²`.
    pub peak_threshold: f64,
    /// Fraction of the regularized peak level used as threshold.
    pub slack: f64,
    /// Multiple of the regularizer bounds (at least one).
    pub rho: f64,
}

impl Default for LocalizeSettings {
    fn default() -> Self {
        Self { oversample: 8, peak_threshold: 1.0 - 1e-2, slack: 0.95, rho: 1.0 }
    }
}

/// Atoms fixed by the configuration instead of drawn at random.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FixedScene {
    pub radar: Vec<Atom>,
    pub comms: Vec<Atom>,
}

/// Values swept one axis at a time around the base cell. Empty lists are
/// not swept; `lq` sets `L = Q` together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SweepAxes {
    pub m: Vec<usize>,
    pub p: Vec<usize>,
    pub nr: Vec<usize>,
    pub lq: Vec<usize>,
    pub j: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl SweepAxes {
    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
            && self.p.is_empty()
            && self.nr.is_empty()
            && self.lq.is_empty()
            && self.j.is_empty()
            && self.snr_db.is_empty()
            && self.sigma.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dims: ProblemDims,
    /// Minimum wrap-around separation per axis; defaults to `(1/M, 1/P, 1/N_r)`.
    pub separation: Option<[f64; 3]>,
    pub noise: NoiseSpec,
    pub solver: SolverSettings,
    pub localize: LocalizeSettings,
    pub sweep: SweepAxes,
    pub trials: usize,
    pub seed: u64,
    pub success_threshold: f64,
    pub out_dir: PathBuf,
    pub scene: Option<FixedScene>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dims: ci_dims(),
            separation: None,
            noise: NoiseSpec::default(),
            solver: SolverSettings::default(),
            localize: LocalizeSettings::default(),
            sweep: SweepAxes::default(),
            trials: 1,
            seed: 0,
            success_threshold: 1e-3,
            out_dir: PathBuf::from("out"),
            scene: None,
        }
    }
}

/// `M = 7, P = 3, N_r = 3, L = Q = 1, J = 2`.
pub fn ci_dims() -> ProblemDims {
    ProblemDims { m: 7, p: 3, nr: 3, j: 2, l: 1, q: 1 }
}

/// `M = 13, P = 9, N_r = 5, L = 4, Q = 2, J = 3`.
pub fn large_dims() -> ProblemDims {
    ProblemDims { m: 13, p: 9, nr: 5, j: 3, l: 4, q: 2 }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.trials == 0 {
            return Err(Error::Param("trials must be >= 1".into()));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::Param("success threshold must be positive".into()));
        }
        if let Some(s) = self.separation {
            if s.iter().any(|x| !(*x >= 0.0 && *x < 1.0)) {
                return Err(Error::Param(format!("separations {s:?} outside [0, 1)")));
            }
        }
        if self.localize.oversample < 1 || !(self.localize.peak_threshold > 0.0) || !(self.localize.slack > 0.0 && self.localize.slack <= 1.0) {
            return Err(Error::Param(format!("bad localization settings {:?}", self.localize)));
        }
        if let Some(snr) = self.noise.snr_db {
            if !snr.is_finite() {
                return Err(Error::Param("SNR must be finite".into()));
            }
        }
        if !(self.noise.sigma_gainphase >= 0.0) {
            return Err(Error::Param("gain/phase sigma must be >= 0".into()));
        }
        Ok(())
    }

    pub fn separation_for(&self, dims: &ProblemDims) -> [f64; 3] {
        self.separation.unwrap_or([1.0 / dims.m as f64, 1.0 / dims.p as f64, 1.0 / dims.nr as f64])
    }

    /// Swaps in the large base cell and, for swept runs, the wide M/P/N_r axes.
    pub fn large_scale(mut self) -> Self {
        self.dims = large_dims();
        if !self.sweep.is_empty() {
            self.sweep = SweepAxes { m: vec![5, 7, 9, 11, 13], p: vec![3, 5, 7, 9], nr: vec![1, 3, 5], ..SweepAxes::default() };
        }
        self
    }

    /// The base cell followed by one cell per swept value.
    pub fn cells(&self) -> Vec<Cell> {
        let base = Cell { axis: "base".into(), value: 0.0, dims: self.dims, noise: self.noise };
        if self.sweep.is_empty() {
            return vec![base];
        }
        let mut out = Vec::new();
        let mut push = |axis: &str, value: f64, f: &dyn Fn(&mut Cell)| {
            let mut c = Cell { axis: axis.into(), value, ..base.clone() };
            f(&mut c);
            out.push(c);
        };
        for &v in &self.sweep.m {
            push("m", v as f64, &|c| c.dims.m = v);
        }
        for &v in &self.sweep.p {
            push("p", v as f64, &|c| c.dims.p = v);
        }
        for &v in &self.sweep.nr {
            push("nr", v as f64, &|c| c.dims.nr = v);
        }
        for &v in &self.sweep.lq {
            push("lq", v as f64, &|c| {
                c.dims.l = v;
                c.dims.q = v;
            });
        }
        for &v in &self.sweep.j {
            push("j", v as f64, &|c| c.dims.j = v);
        }
        for &v in &self.sweep.snr_db {
            push("snr_db", v, &|c| c.noise.snr_db = Some(v));
        }
        for &v in &self.sweep.sigma {
            push("sigma", v, &|c| c.noise.sigma_gainphase = v);
        }
        out
    }
}

/// One point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub axis: String,
    pub value: f64,
    pub dims: ProblemDims,
    pub noise: NoiseSpec,
}

impl Cell {
    pub fn key(&self) -> String {
        format!("{}={}", self.axis, self.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_round_trip_through_json() {
        let c = ExperimentConfig::default();
        let s = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(c, back);
        // every field is optional
        let partial: ExperimentConfig = serde_json::from_str(r#"{"trials": 3}"#).unwrap();
        assert_eq!(partial.trials, 3);
        assert_eq!(partial.dims, ci_dims());
    }

    #[test]
    fn cells_sweep_one_axis_at_a_time() {
        let mut c = ExperimentConfig::default();
        c.sweep.m = vec![5, 9];
        c.sweep.lq = vec![2];
        let cells = c.cells();
        assert_eq!(cells.len(), 3);
        assert_eq!((cells[0].dims.m, cells[0].dims.p), (5, 3));
        assert_eq!((cells[2].dims.l, cells[2].dims.q, cells[2].dims.m), (2, 2, 7));
    }

    #[test]
    fn zero_trials_rejected() {
        let c = ExperimentConfig { trials: 0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
