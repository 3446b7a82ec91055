use std::time::Instant;

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Cell, ExperimentConfig};
use crate::error::{Error, Result};
use crate::localize::{localize, noisy_thresholds, LocalizationResult};
use crate::model::{
    apply_bc, apply_error_model, norm, noise_variance_for_snr, random_bases, random_coefficients, wrap_dist, Channel3D, ErrorModel,
    Scene, Which,
};
use crate::sdp::{build_noiseless_dual, build_noisy_dual, compute_regularizers, BuildOptions, DualSolution};
use crate::waveforms::{build_w, lifted_estimate, recover_alternating, recover_ls, AlternatingOptions, RecoveredSignals};

/// Column order of the per-trial CSV. Changing it breaks resumption of
/// existing sweeps, so it is pinned by a test.
pub const TRIAL_CSV_HEADER: &str = "axis,value,m,p,nr,j,l,q,snr_db,sigma,trial,seed,status,iterations,\
radar_rel_err,comms_rel_err,comms_obs_rel_err,\
tau_err_r,nu_err_r,beta_err_r,tau_err_c,nu_err_c,beta_err_c,found_r,found_c,\
peak_norm2_min,peak_norm2_max,a_r,a_c,dual_value,success,wall_s,note";

/// One row of a sweep. Errors that could not be measured are `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub axis: String,
    pub value: f64,
    pub m: usize,
    pub p: usize,
    pub nr: usize,
    pub j: usize,
    pub l: usize,
    pub q: usize,
    pub snr_db: Option<f64>,
    pub sigma: f64,
    pub trial: usize,
    pub seed: u64,
    /// `ok`, or the stage that failed.
    pub status: String,
    pub iterations: usize,
    pub radar_rel_err: f64,
    pub comms_rel_err: f64,
    /// `‖B_c(X̂_c − X_c)‖ / ‖B_c(X_c)‖`: the comms error on what the
    /// observation actually determines. Diagnostic only.
    pub comms_obs_rel_err: f64,
    pub tau_err_r: f64,
    pub nu_err_r: f64,
    pub beta_err_r: f64,
    pub tau_err_c: f64,
    pub nu_err_c: f64,
    pub beta_err_c: f64,
    pub found_r: usize,
    pub found_c: usize,
    pub peak_norm2_min: f64,
    pub peak_norm2_max: f64,
    /// Expected peak levels of `‖f‖²` (1 without noise).
    pub a_r: f64,
    pub a_c: f64,
    pub dual_value: f64,
    pub success: bool,
    pub wall_s: f64,
    pub note: String,
}

impl TrialRecord {
    fn blank(cell: &Cell, trial: usize, seed: u64) -> Self {
        let d = cell.dims;
        let inf = f64::INFINITY;
        Self {
            axis: cell.axis.clone(),
            value: cell.value,
            m: d.m,
            p: d.p,
            nr: d.nr,
            j: d.j,
            l: d.l,
            q: d.q,
            snr_db: cell.noise.snr_db,
            sigma: cell.noise.sigma_gainphase,
            trial,
            seed,
            status: "pending".into(),
            iterations: 0,
            radar_rel_err: inf,
            comms_rel_err: inf,
            comms_obs_rel_err: inf,
            tau_err_r: inf,
            nu_err_r: inf,
            beta_err_r: inf,
            tau_err_c: inf,
            nu_err_c: inf,
            beta_err_c: inf,
            found_r: 0,
            found_c: 0,
            peak_norm2_min: 0.0,
            peak_norm2_max: 0.0,
            a_r: 1.0,
            a_c: 1.0,
            dual_value: f64::NAN,
            success: false,
            wall_s: 0.0,
            note: String::new(),
        }
    }

    pub fn cell_key(&self) -> String {
        format!("{}={}", self.axis, self.value)
    }

    /// Largest per-axis localization error over both emitters.
    pub fn max_param_err(&self) -> f64 {
        [self.tau_err_r, self.nu_err_r, self.beta_err_r, self.tau_err_c, self.nu_err_c, self.beta_err_c]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Everything a trial produced, for callers that need more than the row.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub record: TrialRecord,
    pub scene: Option<Scene>,
    pub y: Vec<C64>,
    pub solution: Option<DualSolution>,
    pub radar: Option<LocalizationResult>,
    pub comms: Option<LocalizationResult>,
    pub signals: Option<RecoveredSignals>,
    pub x_r_hat: Option<Mat<C64>>,
    pub x_c_hat: Option<Mat<C64>>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed of one trial: a pure function of the master seed, the cell and the
/// trial index, so execution order never matters.
pub fn trial_seed(master: u64, cell_key: &str, trial: usize) -> u64 {
    splitmix64(splitmix64(master ^ fnv1a(cell_key)) ^ trial as u64)
}

/// The scene of one trial: configured atoms when their counts match the
/// cell, random separated atoms otherwise.
pub fn scene_for(cfg: &ExperimentConfig, cell: &Cell, seed: u64) -> Result<Scene> {
    let dims = cell.dims;
    if let Some(fixed) = &cfg.scene {
        if fixed.radar.len() == dims.l && fixed.comms.len() == dims.q {
            dims.validate()?;
            let radar = Channel3D::new(fixed.radar.clone());
            let comms = Channel3D::new(fixed.comms.clone());
            radar.validate()?;
            comms.validate()?;
            let bases = random_bases(&dims, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            let u = random_coefficients(dims.j, &mut rng);
            let v = random_coefficients(dims.p * dims.j, &mut rng);
            return Ok(Scene { dims, radar, comms, bases, u, v });
        }
    }
    Scene::random(&dims, cfg.separation_for(&dims), seed)
}

/// Greedy matching of estimates to true atoms by the largest wrap-around
/// error over the `resolved` axes. Returns, per true atom, the index of its
/// estimate.
pub fn match_atoms(est: &[[f64; 3]], truth: &[[f64; 3]], resolved: [bool; 3]) -> Vec<Option<usize>> {
    let dist = |a: &[f64; 3], b: &[f64; 3]| (0..3).filter(|&k| resolved[k]).map(|k| wrap_dist(a[k], b[k])).fold(0.0, f64::max);
    let mut pairs: Vec<(f64, usize, usize)> =
        truth.iter().enumerate().flat_map(|(t, tr)| est.iter().enumerate().map(move |(e, es)| (dist(es, tr), t, e))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![None; truth.len()];
    let mut used = vec![false; est.len()];
    for (_, t, e) in pairs {
        if out[t].is_none() && !used[e] {
            out[t] = Some(e);
            used[e] = true;
        }
    }
    out
}

/// Per-axis worst error over the true atoms; unmatched atoms count as `+inf`.
fn axis_errors(est: &[[f64; 3]], truth: &[[f64; 3]], matched: &[Option<usize>]) -> [f64; 3] {
    let mut worst = [0.0f64; 3];
    for (t, m) in matched.iter().enumerate() {
        for k in 0..3 {
            let e = m.map_or(f64::INFINITY, |e| wrap_dist(est[e][k], truth[t][k]));
            worst[k] = worst[k].max(e);
        }
    }
    worst
}

/// Relative Frobenius error; entries missing from `est` (no atoms found)
/// count as zero.
fn rel_err(est: &Mat<C64>, truth: &Mat<C64>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let zero = C64::new(0.0, 0.0);
    for j in 0..truth.ncols() {
        for i in 0..truth.nrows() {
            let e = if i < est.nrows() && j < est.ncols() { est[(i, j)] } else { zero };
            num += (e - truth[(i, j)]).norm_sqr();
            den += truth[(i, j)].norm_sqr();
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Runs the base cell of `cfg` with an explicit seed.
pub fn run_trial(cfg: &ExperimentConfig, seed: u64) -> TrialRecord {
    let cell = Cell { axis: "base".into(), value: 0.0, dims: cfg.dims, noise: cfg.noise };
    run_trial_detailed(cfg, &cell, 0, seed).record
}

/// The full pipeline for one trial. Failures at any stage are recorded in
/// the returned record's `status`/`note`; nothing is propagated.
pub fn run_trial_detailed(cfg: &ExperimentConfig, cell: &Cell, trial: usize, seed: u64) -> TrialOutput {
    let start = Instant::now();
    let mut out = TrialOutput {
        record: TrialRecord::blank(cell, trial, seed),
        scene: None,
        y: vec![],
        solution: None,
        radar: None,
        comms: None,
        signals: None,
        x_r_hat: None,
        x_c_hat: None,
    };
    if let Err((stage, e)) = pipeline(cfg, cell, seed, &mut out) {
        out.record.status = stage.into();
        out.record.note = e.to_string();
    }
    out.record.wall_s = start.elapsed().as_secs_f64();
    out
}

fn stage<T>(name: &'static str, r: Result<T>) -> std::result::Result<T, (&'static str, Error)> {
    r.map_err(|e| (name, e))
}

fn pipeline(cfg: &ExperimentConfig, cell: &Cell, seed: u64, out: &mut TrialOutput) -> std::result::Result<(), (&'static str, Error)> {
    let dims = cell.dims;
    let scene = stage("scene", scene_for(cfg, cell, seed))?;
    let clean = stage("synth", scene.observation())?;
    let rec = &mut out.record;
    if let Some(w) = dims.sparsity_warning() {
        rec.note = w;
    }

    // errors
    let noise = cell.noise;
    let perturbed = noise.snr_db.is_some() || noise.sigma_gainphase > 0.0;
    let eps_e = noise.epsilon_e.unwrap_or_else(|| ErrorModel::default_epsilon(noise.sigma_gainphase, dims.nr));
    let sigma_noise = noise.snr_db.map_or(0.0, |snr| noise_variance_for_snr(&clean, snr).sqrt());
    let y = if perturbed {
        let em = ErrorModel { sigma_noise, sigma_gainphase: noise.sigma_gainphase, epsilon_e: eps_e };
        stage("errors", apply_error_model(&clean, &dims, &em, splitmix64(seed ^ 0xe77)))?.y
    } else {
        clean
    };

    // program
    let opts = BuildOptions::default();
    let (prog, regs) = if noise.snr_db.is_some() {
        let (mu_r, mu_c) = stage("regularizers", compute_regularizers(sigma_noise, eps_e, &scene.bases, &dims, cfg.localize.rho))?;
        (stage("build", build_noisy_dual(&y, &scene.bases, &dims, mu_r, mu_c, eps_e, &opts))?, Some((mu_r, mu_c)))
    } else {
        (stage("build", build_noiseless_dual(&y, &scene.bases, &dims, &opts))?, None)
    };
    let sol = stage("solve", crate::solver::solve(&prog, &cfg.solver.to_config()))?;
    rec.iterations = sol.iterations;
    rec.dual_value = sol.dual_value(&y);
    if sol.status != crate::solver::Status::Optimal {
        rec.note = format!("solver stopped: {:?}", sol.status);
    }

    // localization
    let (thr_r, thr_c) = match regs {
        Some((mu_r, mu_c)) => {
            let lv = stage("levels", noisy_thresholds(mu_r, mu_c, eps_e, &dims, sol.gram_spectral_norm(), cfg.localize.slack))?;
            rec.a_r = lv.a_r;
            rec.a_c = lv.a_c;
            (lv.threshold_r, lv.threshold_c)
        }
        None => (cfg.localize.peak_threshold, cfg.localize.peak_threshold),
    };
    let os = cfg.localize.oversample;
    let grid = [os * dims.m, os * dims.p, os * dims.nr];
    let loc_r = stage("localize", localize(&sol.q, &scene.bases, &dims, Which::Radar, grid, thr_r))?;
    let loc_c = stage("localize", localize(&sol.q, &scene.bases, &dims, Which::Comms, grid, thr_c))?;
    rec.found_r = loc_r.atoms.len();
    rec.found_c = loc_c.atoms.len();
    let peaks: Vec<f64> = loc_r.atoms.iter().chain(&loc_c.atoms).map(|a| a.peak_norm2).collect();
    if !peaks.is_empty() {
        rec.peak_norm2_min = peaks.iter().copied().fold(f64::INFINITY, f64::min);
        rec.peak_norm2_max = peaks.iter().copied().fold(0.0, f64::max);
    }
    let (r_hats, c_hats) = (loc_r.params(), loc_c.params());
    let truth_r: Vec<[f64; 3]> = scene.radar.atoms.iter().map(|a| a.params()).collect();
    let truth_c: Vec<[f64; 3]> = scene.comms.atoms.iter().map(|a| a.params()).collect();
    let all = [true; 3];
    [rec.tau_err_r, rec.nu_err_r, rec.beta_err_r] = axis_errors(&r_hats, &truth_r, &match_atoms(&r_hats, &truth_r, all));
    // Unresolved axes are excluded from the matching but still scored.
    let resolved_c = loc_c.atoms.first().map_or(all, |a| a.unresolved.map(|u| !u));
    [rec.tau_err_c, rec.nu_err_c, rec.beta_err_c] = axis_errors(&c_hats, &truth_c, &match_atoms(&c_hats, &truth_c, resolved_c));

    out.solution = Some(sol);
    out.radar = Some(loc_r);
    out.comms = Some(loc_c);

    // waveforms and lifted estimates
    let design = stage("design", build_w(&r_hats, &c_hats, &scene.bases, &dims))?;
    let signals = if noise.sigma_gainphase > 0.0 && eps_e > 0.0 {
        stage("recover", recover_alternating(&design, &y, &scene.bases, eps_e, &AlternatingOptions::default()))?.signals
    } else {
        stage("recover", recover_ls(&design, &y, &scene.bases))?
    };
    let x_r_hat = lifted_estimate(&r_hats, &signals.alphas_r, &signals.u_hat, &dims);
    let x_c_hat = lifted_estimate(&c_hats, &signals.alphas_c, &signals.v_hat, &dims);
    let truth = scene.truth();
    let rec = &mut out.record;
    rec.radar_rel_err = rel_err(&x_r_hat, &truth.x_r);
    rec.comms_rel_err = rel_err(&x_c_hat, &truth.x_c);
    let obs_true = stage("observe", apply_bc(&truth.x_c, &scene.bases, &dims))?;
    let padded = Mat::from_fn(truth.x_c.nrows(), truth.x_c.ncols(), |i, j| {
        if i < x_c_hat.nrows() { x_c_hat[(i, j)] } else { C64::new(0.0, 0.0) }
    });
    let obs_hat = stage("observe", apply_bc(&padded, &scene.bases, &dims))?;
    let diff: Vec<C64> = obs_hat.iter().zip(&obs_true).map(|(a, b)| a - b).collect();
    rec.comms_obs_rel_err = norm(&diff) / norm(&obs_true).max(f64::MIN_POSITIVE);
    rec.success = rec.radar_rel_err < cfg.success_threshold && rec.comms_rel_err < cfg.success_threshold;
    rec.status = "ok".into();

    out.signals = Some(signals);
    out.x_r_hat = Some(x_r_hat);
    out.x_c_hat = Some(x_c_hat);
    out.y = y;
    out.scene = Some(scene);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_serialized_record() {
        let cell = Cell { axis: "m".into(), value: 5.0, dims: super::super::ci_dims(), noise: Default::default() };
        let mut w = csv::Writer::from_writer(vec![]);
        w.serialize(TrialRecord::blank(&cell, 0, 1)).unwrap();
        let s = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(s.lines().next().unwrap(), TRIAL_CSV_HEADER);
    }

    #[test]
    fn trial_seed_depends_on_every_input() {
        let s = trial_seed(7, "m=5", 3);
        assert_eq!(s, trial_seed(7, "m=5", 3));
        assert_ne!(s, trial_seed(8, "m=5", 3));
        assert_ne!(s, trial_seed(7, "m=7", 3));
        assert_ne!(s, trial_seed(7, "m=5", 4));
    }

    #[test]
    fn matching_is_greedy_on_resolved_axes() {
        let truth = [[0.1, 0.2, 0.3], [0.6, 0.7, 0.8]];
        let est = [[0.61, 0.0, 0.79], [0.11, 0.5, 0.3]];
        assert_eq!(match_atoms(&est, &truth, [true, false, true]), vec![Some(1), Some(0)]);
        let errs = axis_errors(&est, &truth, &[Some(1), Some(0)]);
        assert!((errs[0] - 0.01).abs() < 1e-12);
        assert!((errs[1] - 0.3).abs() < 1e-12);
        assert_eq!(axis_errors(&est[..1], &truth, &[Some(0), None])[2], f64::INFINITY);
    }

    #[test]
    fn degenerate_cell_records_failure() {
        let mut cfg = ExperimentConfig::default();
        cfg.dims.m = 1;
        cfg.solver.max_iter = 200;
        let rec = run_trial(&cfg, 3);
        assert!(!rec.success);
        assert!(rec.radar_rel_err >= 0.0 && rec.comms_rel_err >= 0.0);
    }
}
