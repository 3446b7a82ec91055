use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use soman::certificate::{construct_certificate, validate_certificate, ValidationConfig};
use soman::harness::{self, emit_field_slices, emit_plots, ExperimentConfig, SweepSummary};
use soman::io::{read_cf64, read_json, write_cf64, write_json};
use soman::localize::{eval_dual_field, localize, noisy_thresholds, LocalizationResult};
use soman::model::{apply_error_model, noise_variance_for_snr, random_bases, random_coefficients, Atom, Channel3D, ErrorModel, ProblemDims, Scene, Which};
use soman::sdp::{build_noiseless_dual, build_noisy_dual, compute_regularizers, BuildOptions, DualSolution};
use soman::solver::Status;
use soman::waveforms::{build_w, recover_alternating, recover_ls, AlternatingOptions};
use soman::Error;

#[derive(Parser)]
#[command(name = "soman", version, about = "Multi-antenna dual-blind deconvolution")]
struct Cli {
    /// Experiment configuration (JSON); every field is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and field evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Use the large base cell instead of the quick one.
    #[arg(long, global = true)]
    paper_scale: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct SceneArgs {
    /// Scene file written by `synth`.
    #[arg(long, default_value = "scene.json")]
    scene: PathBuf,
    /// Observation; defaults to `y.cf64` next to the scene.
    #[arg(long)]
    y: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a random scene and its observation.
    Synth,
    /// Solve the dual program of a scene.
    Solve {
        #[command(flatten)]
        s: SceneArgs,
    },
    /// Extract atoms from a solved dual vector.
    Localize {
        #[command(flatten)]
        s: SceneArgs,
        #[arg(long, default_value = "dual.json")]
        dual: PathBuf,
        /// Also export the sampled dual-polynomial fields.
        #[arg(long)]
        fields: bool,
    },
    /// Recover waveforms and amplitudes from localized atoms.
    Recover {
        #[command(flatten)]
        s: SceneArgs,
        #[arg(long, default_value = "localization.json")]
        localization: PathBuf,
    },
    /// Build and validate the interpolating dual certificate of a scene.
    Certify {
        #[arg(long, default_value = "scene.json")]
        scene: PathBuf,
    },
    /// Run one full trial of the base cell.
    Trial,
    /// Monte Carlo sweep; resumes from an existing `trials.csv`.
    Sweep,
    /// Success-rate curves from a sweep summary, and optional field slices.
    Plot {
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Write fixed-β delay–Doppler slices of this dual solution.
        #[arg(long)]
        dual: Option<PathBuf>,
        #[arg(long, default_value = "scene.json")]
        scene: PathBuf,
    },
}

/// Persisted scene. Bases are regenerated from `seed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneFile {
    dims: ProblemDims,
    radar_atoms: Vec<Atom>,
    comms_atoms: Vec<Atom>,
    seed: u64,
    error_model: Option<ErrorModel>,
    #[serde(default)]
    u: Option<Vec<C64>>,
    #[serde(default)]
    v: Option<Vec<C64>>,
    /// `(μ_r, μ_c)` when the regularized program applies.
    #[serde(default)]
    regularizers: Option<(f64, f64)>,
}

impl SceneFile {
    fn scene(&self) -> soman::Result<Scene> {
        self.dims.validate()?;
        // coefficients missing from hand-written files come from their own stream
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0xc0ef);
        let scene = Scene {
            dims: self.dims,
            radar: Channel3D::new(self.radar_atoms.clone()),
            comms: Channel3D::new(self.comms_atoms.clone()),
            bases: random_bases(&self.dims, self.seed),
            u: self.u.clone().unwrap_or_else(|| random_coefficients(self.dims.j, &mut rng)),
            v: self.v.clone().unwrap_or_else(|| random_coefficients(self.dims.p * self.dims.j, &mut rng)),
        };
        if scene.radar.len() != self.dims.l || scene.comms.len() != self.dims.q {
            return Err(Error::Param(format!(
                "scene lists {} radar / {} comms atoms but dims declare L={} Q={}",
                scene.radar.len(),
                scene.comms.len(),
                self.dims.l,
                self.dims.q
            )));
        }
        Ok(scene)
    }
}

enum Failure {
    Config(String),
    Solver(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Solver(_) => Failure::Solver(e.to_string()),
            Error::Dims(_) | Error::Param(_) | Error::Json(_) | Error::Format(_) | Error::Shape(_) => Failure::Config(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("solver failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> std::result::Result<ExperimentConfig, Failure> {
    let mut cfg: ExperimentConfig = match &cli.config {
        Some(p) => read_json(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        None => ExperimentConfig::default(),
    };
    if cli.paper_scale {
        cfg = cfg.large_scale();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve(out: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() || p.exists() {
        p.to_path_buf()
    } else {
        out.join(p)
    }
}

fn run(cli: Cli) -> CliResult {
    let cfg = load_config(&cli)?;
    if let Some(n) = cli.threads {
        // ignore a second initialization; sweeps build their own pool anyway
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = cfg.out_dir.clone();
    fs::create_dir_all(&out).map_err(Error::from)?;

    match &cli.cmd {
        Cmd::Synth => synth(&cfg, &out),
        Cmd::Solve { s } => solve(&cfg, &out, s),
        Cmd::Localize { s, dual, fields } => localize_cmd(&cfg, &out, s, dual, *fields),
        Cmd::Recover { s, localization } => recover(&out, s, localization),
        Cmd::Certify { scene } => certify(&out, scene),
        Cmd::Trial => {
            let seed = harness::trial_seed(cfg.seed, "base=0", 0);
            let rec = harness::run_trial(&cfg, seed);
            write_json(&out.join("trial.json"), &rec)?;
            println!("{}", serde_json::to_string_pretty(&rec).map_err(Error::from)?);
            if rec.status == "solve" {
                return Err(Failure::Solver(rec.note));
            }
            Ok(())
        }
        Cmd::Sweep => {
            let summary = harness::run_sweep(&cfg, cli.threads)?;
            for c in &summary.cells {
                println!("{:<14} rate {:.3} ± {:.3} ({} trials, {} failed)", c.key, c.rate, c.stderr, c.trials, c.failures);
            }
            for a in &summary.axes {
                println!("axis {:<8} monotone within 1 s.e.: {}", a.axis, a.monotone);
            }
            Ok(())
        }
        Cmd::Plot { summary, dual, scene } => {
            let path = resolve(&out, summary.as_deref().unwrap_or(Path::new("summary.json")));
            if path.exists() {
                let s: SweepSummary = read_json(&path)?;
                for f in emit_plots(&s, &out)? {
                    println!("wrote {}", f.display());
                }
            } else if dual.is_none() {
                eprintln!("warning: {} not found; nothing to plot", path.display());
            }
            if let Some(d) = dual {
                let sf: SceneFile = read_json(&resolve(&out, scene))?;
                let sc = sf.scene()?;
                let sol: DualSolution = read_json(&resolve(&out, d))?;
                let os = cfg.localize.oversample;
                let grid = [os * sc.dims.m, os * sc.dims.p, os * sc.dims.nr];
                for (which, name) in [(Which::Radar, "radar"), (Which::Comms, "comms")] {
                    let field = eval_dual_field(&sol.q, &sc.bases, &sc.dims, grid, which)?;
                    let loc = localize(&sol.q, &sc.bases, &sc.dims, which, grid, threshold_for(&cfg, &sf, &sol, which)?)?;
                    let mut betas: Vec<f64> = loc.atoms.iter().map(|a| a.beta).collect();
                    betas.sort_by(f64::total_cmp);
                    betas.dedup_by(|a, b| (*a - *b).abs() < 0.5 / sc.dims.nr as f64);
                    for f in emit_field_slices(&field, &betas, &out, name)? {
                        println!("wrote {}", f.display());
                    }
                }
            }
            Ok(())
        }
    }
}

fn synth(cfg: &ExperimentConfig, out: &Path) -> CliResult {
    let cell = cfg.cells().into_iter().next().expect("base cell");
    let seed = cfg.seed;
    let scene = harness::scene_for(cfg, &cell, seed)?;
    let clean = scene.observation()?;
    let noise = cfg.noise;
    let mut error_model = None;
    let mut regularizers = None;
    let y = if noise.snr_db.is_some() || noise.sigma_gainphase > 0.0 {
        let eps = noise.epsilon_e.unwrap_or_else(|| ErrorModel::default_epsilon(noise.sigma_gainphase, scene.dims.nr));
        let sigma = noise.snr_db.map_or(0.0, |s| noise_variance_for_snr(&clean, s).sqrt());
        let em = ErrorModel { sigma_noise: sigma, sigma_gainphase: noise.sigma_gainphase, epsilon_e: eps };
        if noise.snr_db.is_some() {
            regularizers = Some(compute_regularizers(sigma, eps, &scene.bases, &scene.dims, cfg.localize.rho)?);
        }
        let r = apply_error_model(&clean, &scene.dims, &em, seed ^ 0xe77)?;
        if r.exceeds_bound {
            eprintln!("warning: realized ‖e‖ = {:.3e} exceeds the bound {eps:.3e}", r.e_norm);
        }
        error_model = Some(em);
        r.y
    } else {
        clean.clone()
    };
    let sf = SceneFile {
        dims: scene.dims,
        radar_atoms: scene.radar.atoms.clone(),
        comms_atoms: scene.comms.atoms.clone(),
        seed,
        error_model,
        u: Some(scene.u.clone()),
        v: Some(scene.v.clone()),
        regularizers,
    };
    write_json(&out.join("scene.json"), &sf)?;
    write_cf64(&out.join("y.cf64"), &y)?;
    write_cf64(&out.join("y_clean.cf64"), &clean)?;
    write_json(&out.join("truth.json"), &scene.truth())?;
    println!("wrote scene.json, y.cf64, y_clean.cf64, truth.json to {}", out.display());
    Ok(())
}

fn load_scene(out: &Path, s: &SceneArgs) -> std::result::Result<(SceneFile, Scene, Vec<C64>), Failure> {
    let scene_path = resolve(out, &s.scene);
    let sf: SceneFile = read_json(&scene_path)?;
    let scene = sf.scene()?;
    let y_path = s.y.clone().unwrap_or_else(|| scene_path.with_file_name("y.cf64"));
    let y = read_cf64(&y_path)?;
    if y.len() != scene.dims.len() {
        return Err(Failure::Config(format!("{} holds {} samples, expected {}", y_path.display(), y.len(), scene.dims.len())));
    }
    Ok((sf, scene, y))
}

fn solve(cfg: &ExperimentConfig, out: &Path, s: &SceneArgs) -> CliResult {
    let (sf, scene, y) = load_scene(out, s)?;
    let opts = BuildOptions::default();
    let prog = match (sf.regularizers, sf.error_model) {
        (Some((mu_r, mu_c)), Some(em)) => build_noisy_dual(&y, &scene.bases, &scene.dims, mu_r, mu_c, em.epsilon_e, &opts)?,
        _ => build_noiseless_dual(&y, &scene.bases, &scene.dims, &opts)?,
    };
    let sol = soman::solver::solve(&prog, &cfg.solver.to_config())?;
    write_json(&out.join("dual.json"), &sol)?;
    write_cf64(&out.join("q.cf64"), &sol.q)?;
    println!(
        "status {:?} after {} iterations ({:.1} s); Re<q,y> = {:.6}",
        sol.status,
        sol.iterations,
        sol.elapsed_s,
        sol.dual_value(&y)
    );
    if sol.status == Status::Infeasible {
        return Err(Failure::Solver("program reported infeasible".into()));
    }
    Ok(())
}

fn threshold_for(cfg: &ExperimentConfig, sf: &SceneFile, sol: &DualSolution, which: Which) -> soman::Result<f64> {
    match (sf.regularizers, sf.error_model) {
        (Some((mu_r, mu_c)), Some(em)) => {
            let lv = noisy_thresholds(mu_r, mu_c, em.epsilon_e, &sf.dims, sol.gram_spectral_norm(), cfg.localize.slack)?;
            Ok(if which == Which::Radar { lv.threshold_r } else { lv.threshold_c })
        }
        _ => Ok(cfg.localize.peak_threshold),
    }
}

#[derive(Serialize, Deserialize)]
struct LocalizationFile {
    radar: LocalizationResult,
    comms: LocalizationResult,
}

fn localize_cmd(cfg: &ExperimentConfig, out: &Path, s: &SceneArgs, dual: &Path, fields: bool) -> CliResult {
    let (sf, scene, _) = load_scene(out, s)?;
    let sol: DualSolution = read_json(&resolve(out, dual))?;
    let os = cfg.localize.oversample;
    let d = scene.dims;
    let grid = [os * d.m, os * d.p, os * d.nr];
    let radar = localize(&sol.q, &scene.bases, &d, Which::Radar, grid, threshold_for(cfg, &sf, &sol, Which::Radar)?)?;
    let comms = localize(&sol.q, &scene.bases, &d, Which::Comms, grid, threshold_for(cfg, &sf, &sol, Which::Comms)?)?;
    if fields {
        eval_dual_field(&sol.q, &scene.bases, &d, grid, Which::Radar)?.export(&out.join("field_radar"))?;
        eval_dual_field(&sol.q, &scene.bases, &d, grid, Which::Comms)?.export(&out.join("field_comms"))?;
    }
    for (name, r) in [("radar", &radar), ("comms", &comms)] {
        for a in &r.atoms {
            let flag = if a.unresolved.iter().any(|&u| u) { format!(" unresolved axes {:?}", a.unresolved) } else { String::new() };
            println!("{name}: tau {:.6} nu {:.6} beta {:.6} |f|^2 {:.6}{flag}", a.tau, a.nu, a.beta, a.peak_norm2);
        }
    }
    write_json(&out.join("localization.json"), &LocalizationFile { radar, comms })?;
    Ok(())
}

fn recover(out: &Path, s: &SceneArgs, localization: &Path) -> CliResult {
    let (sf, scene, y) = load_scene(out, s)?;
    let loc: LocalizationFile = read_json(&resolve(out, localization))?;
    let design = build_w(&loc.radar.params(), &loc.comms.params(), &scene.bases, &scene.dims)?;
    let signals = match sf.error_model {
        Some(em) if em.sigma_gainphase > 0.0 && em.epsilon_e > 0.0 => {
            let o = recover_alternating(&design, &y, &scene.bases, em.epsilon_e, &AlternatingOptions::default())?;
            println!("alternating recovery: {} iterations, objective {:.6e}", o.iterations, o.objective.last().copied().unwrap_or(f64::NAN));
            o.signals
        }
        _ => recover_ls(&design, &y, &scene.bases)?,
    };
    println!("residual {:.3e}; {}", signals.residual, signals.scale_note);
    write_json(&out.join("recovered.json"), &signals)?;
    write_cf64(&out.join("s_hat.cf64"), &signals.s_hat)?;
    Ok(())
}

fn certify(out: &Path, scene: &Path) -> CliResult {
    let sf: SceneFile = read_json(&resolve(out, scene))?;
    let sc = sf.scene()?;
    let cert = construct_certificate(&sc)?;
    let report = validate_certificate(&cert.q0, &sc, &ValidationConfig::default())?;
    println!(
        "interp {:.3e} deriv {:.3e} off-grid max {:.4} passed {}",
        report.interp_residual, report.deriv_residual, report.offgrid_max, report.passed
    );
    write_json(&out.join("certificate.json"), &report)?;
    write_cf64(&out.join("q0.cf64"), &cert.q0)?;
    Ok(())
}
