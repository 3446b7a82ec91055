//! Alternating-direction augmented Lagrangian iteration.
//!
//! With `K` the product of the PSD blocks and the zero cone of the equalities,
//! the internal problem is `min c^T x  s.t.  s = A x + C ∈ K`. One sweep:
//!
//! ```text
//! x  = (A^*A)^{-1} [A^*(S - C + μZ) - μc]
//! V  = A x + C - μZ
//! S  = Π_K(V),   Z = (S - V)/μ = Π_K(-V)/μ
//! ```
//!
//! `A^*A` does not depend on μ, so it is factored once and μ adapts freely.

use std::time::{Duration, Instant};

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cone::frob_sq;
use crate::error::Result;
use crate::linsys::NormalSolver;
use crate::operator::{Operator, Scaling};
use crate::problem::{SdpProblem, Sense};
use crate::projector::Projector;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
    /// Initial penalty; `None` picks one from problem norms.
    pub mu_init: Option<f64>,
    pub adapt_mu: bool,
    pub adapt_every: usize,
    pub scaling: bool,
    /// Residuals are evaluated in the original space every `check_every` sweeps.
    pub check_every: usize,
    /// Record an [`IterLog`] row at every check.
    pub log: bool,
    pub time_limit: Option<Duration>,
    /// Blocks at least this large use the warm-started partial eigensolver.
    pub partial_eig_min_size: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_abs: 1e-7,
            tol_rel: 1e-6,
            max_iter: 50_000,
            mu_init: None,
            adapt_mu: true,
            adapt_every: 20,
            scaling: true,
            check_every: 10,
            log: false,
            time_limit: None,
            partial_eig_min_size: 96,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    MaxIter,
    Infeasible,
}

/// Relative residuals: primal `‖Ax + C - S‖`, dual `‖A^*Z - c‖`, and
/// duality gap `|c^T x + ⟨C, Z⟩|`, each divided by `1 + ` its natural scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub primal_abs: f64,
    pub dual_abs: f64,
    pub gap_abs: f64,
}

impl Residuals {
    pub fn max_rel(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }

    pub fn converged(&self, tol_abs: f64, tol_rel: f64) -> bool {
        let ok = |rel: f64, abs: f64| rel <= tol_rel || abs <= tol_abs;
        ok(self.primal, self.primal_abs) && ok(self.dual, self.dual_abs) && ok(self.gap, self.gap_abs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterLog {
    pub iter: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    pub gap: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    /// Block values `S_k = C_k + A_k x` projected onto the cone.
    pub slacks: Vec<Mat<C64>>,
    /// Block multipliers `Z_k ⪰ 0`.
    pub duals: Vec<Mat<C64>>,
    pub eq_duals: Vec<f64>,
    /// `c^T x` in the problem's own sense.
    pub objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub log: Vec<IterLog>,
    pub elapsed: Duration,
}

/// Optional starting point.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    pub x: Option<Vec<f64>>,
    pub duals: Option<Vec<Mat<C64>>>,
    pub eq_duals: Option<Vec<f64>>,
}

/// Residuals of a candidate solution, recomputed from the problem data.
pub fn residuals(p: &SdpProblem, x: &[f64], slacks: &[Mat<C64>], duals: &[Mat<C64>], eq_duals: &[f64]) -> Residuals {
    let op = Operator::compile(p, &Scaling::identity(p));
    let c = internal_objective(p);
    let mut pr = 0.0;
    let mut c_norm = 0.0;
    let mut s_norm = 0.0;
    let mut cz = 0.0;
    let mut dual = vec![0.0; p.n_vars];
    for k in 0..op.blocks.len() {
        let n = op.blocks[k].size;
        let mut m = Mat::<C64>::zeros(n, n);
        op.apply_block(k, x, &mut m);
        op.add_constant(k, 1.0, &mut m);
        pr += frob_sq((&m - &slacks[k]).as_ref());
        c_norm += op.constant_norm_sq(k);
        s_norm += frob_sq(slacks[k].as_ref());
        cz += op.constant_inner(k, &duals[k]);
        op.adjoint_block(k, &duals[k], 1.0, &mut dual);
    }
    let ex = op.apply_eq(x);
    for (i, e) in ex.iter().enumerate() {
        pr += (e - op.eq_rhs[i]).powi(2);
        c_norm += op.eq_rhs[i].powi(2);
        cz -= op.eq_rhs[i] * eq_duals[i];
    }
    op.adjoint_eq(eq_duals, 1.0, &mut dual);
    let dr: f64 = dual.iter().zip(&c).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
    let c_n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cx: f64 = c.iter().zip(x).map(|(c, x)| c * x).sum();
    let pr = pr.sqrt();
    let gap = (cx + cz).abs();
    Residuals {
        primal: pr / (1.0 + c_norm.sqrt() + s_norm.sqrt()),
        dual: dr / (1.0 + c_n),
        gap: gap / (1.0 + cx.abs() + cz.abs()),
        primal_abs: pr,
        dual_abs: dr,
        gap_abs: gap,
    }
}

fn internal_objective(p: &SdpProblem) -> Vec<f64> {
    match p.sense {
        Sense::Minimize => p.objective.clone(),
        Sense::Maximize => p.objective.iter().map(|c| -c).collect(),
    }
}

pub fn solve(p: &SdpProblem, cfg: &SolverConfig) -> Result<Solution> {
    solve_warm(p, cfg, &WarmStart::default())
}

pub fn solve_warm(p: &SdpProblem, cfg: &SolverConfig, warm: &WarmStart) -> Result<Solution> {
    p.validate()?;
    let start = Instant::now();
    let sc = if cfg.scaling { Scaling::equilibrate(p, 12) } else { Scaling::identity(p) };
    let op = Operator::compile(p, &sc);
    let mut lin = NormalSolver::new(&op)?;
    let nb = op.blocks.len();
    let m = op.n_eqs();
    let c_int = internal_objective(p);
    let c: Vec<f64> = c_int.iter().zip(&sc.var).map(|(c, d)| c * d * sc.obj).collect();

    let mut x: Vec<f64> = match &warm.x {
        Some(x0) => x0.iter().zip(&sc.var).map(|(x, d)| x / d).collect(),
        None => vec![0.0; p.n_vars],
    };
    let mut z: Vec<Mat<C64>> = match &warm.duals {
        Some(z0) => z0.iter().enumerate().map(|(k, zk)| zk * faer::Scale(C64::from(sc.obj / sc.block[k]))).collect(),
        None => op.blocks.iter().map(|b| Mat::zeros(b.size, b.size)).collect(),
    };
    let mut lam: Vec<f64> = match &warm.eq_duals {
        Some(l0) => l0.iter().zip(&sc.eq).map(|(l, e)| l * sc.obj / e).collect(),
        None => vec![0.0; m],
    };
    let mut s: Vec<Mat<C64>> = op.blocks.iter().map(|b| Mat::zeros(b.size, b.size)).collect();
    if warm.x.is_some() {
        for k in 0..nb {
            op.apply_block(k, &x, &mut s[k]);
            op.add_constant(k, 1.0, &mut s[k]);
            s[k] = crate::cone::psd_project(s[k].as_ref())?;
        }
    }

    // A^*(C) is constant.
    let mut adj_c = vec![0.0; p.n_vars];
    for k in 0..nb {
        let n = op.blocks[k].size;
        let mut cm = Mat::<C64>::zeros(n, n);
        op.add_constant(k, 1.0, &mut cm);
        op.adjoint_block(k, &cm, 1.0, &mut adj_c);
    }
    op.adjoint_eq(&op.eq_rhs, -1.0, &mut adj_c);

    let c_scale = (0..nb).map(|k| op.constant_norm_sq(k)).sum::<f64>() + op.eq_rhs.iter().map(|v| v * v).sum::<f64>();
    let c_norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut mu = cfg.mu_init.unwrap_or((1.0 + c_scale.sqrt()) / (1.0 + c_norm));

    let mut projectors: Vec<Projector> =
        op.blocks.iter().map(|b| Projector::new(b.size, b.size >= cfg.partial_eig_min_size)).collect();

    let mut log = Vec::new();
    let mut status = Status::MaxIter;
    let mut iterations = 0;
    let mut ratio_log = 0.0;
    let mut ratio_n = 0;
    let mut rhs = vec![0.0; p.n_vars];

    for it in 1..=cfg.max_iter {
        iterations = it;
        // x-update
        rhs.iter_mut().zip(&adj_c).zip(&c).for_each(|((r, a), c)| *r = -a - mu * c);
        for k in 0..nb {
            let mut w = s[k].clone();
            w += &z[k] * faer::Scale(C64::from(mu));
            op.adjoint_block(k, &w, 1.0, &mut rhs);
        }
        let lam_mu: Vec<f64> = lam.iter().map(|l| mu * l).collect();
        op.adjoint_eq(&lam_mu, 1.0, &mut rhs);
        x = lin.solve(&op, &rhs);

        // cone projection
        let mut pr_sq = 0.0;
        let mut ds = vec![0.0; p.n_vars];
        let mut s_sq = 0.0;
        for k in 0..nb {
            let mut v = &z[k] * faer::Scale(C64::from(-mu));
            op.apply_block(k, &x, &mut v);
            op.add_constant(k, 1.0, &mut v);
            let (s_new, z_new) = projectors[k].split(v, mu)?;
            pr_sq += mu * mu * frob_sq((&z[k] - &z_new).as_ref());
            op.adjoint_block(k, &(&s_new - &s[k]), 1.0 / mu, &mut ds);
            s_sq += frob_sq(s_new.as_ref());
            s[k] = s_new;
            z[k] = z_new;
        }
        let ex = op.apply_eq(&x);
        for i in 0..m {
            let r = ex[i] - op.eq_rhs[i];
            pr_sq += r * r;
            lam[i] -= r / mu;
        }
        let pr_rel = pr_sq.sqrt() / (1.0 + c_scale.sqrt() + s_sq.sqrt());
        let dr_rel = ds.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + c_norm);

        if cfg.adapt_mu && pr_rel > 0.0 && dr_rel > 0.0 {
            ratio_log += (pr_rel / dr_rel).ln();
            ratio_n += 1;
            if ratio_n == cfg.adapt_every {
                let avg = ratio_log / ratio_n as f64;
                if avg.abs() > 1.0_f64.ln() + 0.7 {
                    // large primal residual -> smaller μ (stronger penalty)
                    mu *= (-0.5 * avg).exp().clamp(0.2, 5.0);
                }
                ratio_log = 0.0;
                ratio_n = 0;
            }
        }

        let check = it % cfg.check_every == 0 || it == cfg.max_iter;
        if check {
            let r = scaled_residuals(&op, &sc, &c, &x, &s, &z, &lam);
            let obj = p.objective_value(&unscale_x(&x, &sc));
            if cfg.log {
                log.push(IterLog { iter: it, primal_res: r.primal, dual_res: r.dual, gap: r.gap, objective: obj });
            }
            if r.converged(cfg.tol_abs, cfg.tol_rel) {
                status = Status::Optimal;
                break;
            }
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let zn = z.iter().map(|zk| frob_sq(zk.as_ref())).sum::<f64>().sqrt();
            if !(xn.is_finite() && zn.is_finite()) || xn > 1e14 || zn > 1e14 {
                status = Status::Infeasible;
                break;
            }
            if let Some(limit) = cfg.time_limit {
                if start.elapsed() > limit {
                    break;
                }
            }
        }
    }

    let x_out = unscale_x(&x, &sc);
    let slacks: Vec<Mat<C64>> = s.iter().enumerate().map(|(k, sk)| sk * faer::Scale(C64::from(1.0 / sc.block[k]))).collect();
    let duals: Vec<Mat<C64>> = z.iter().enumerate().map(|(k, zk)| zk * faer::Scale(C64::from(sc.block[k] / sc.obj))).collect();
    let eq_duals: Vec<f64> = lam.iter().zip(&sc.eq).map(|(l, e)| l * e / sc.obj).collect();
    let res = residuals(p, &x_out, &slacks, &duals, &eq_duals);
    if status == Status::Optimal && !res.converged(cfg.tol_abs, cfg.tol_rel) {
        status = Status::MaxIter;
    }
    Ok(Solution {
        status,
        objective: p.objective_value(&x_out),
        x: x_out,
        slacks,
        duals,
        eq_duals,
        residuals: res,
        iterations,
        log,
        elapsed: start.elapsed(),
    })
}

fn unscale_x(x: &[f64], sc: &Scaling) -> Vec<f64> {
    x.iter().zip(&sc.var).map(|(x, d)| x * d).collect()
}

/// Original-space residuals evaluated from scaled iterates (same formulas as
/// [`residuals`], without materializing unscaled copies).
fn scaled_residuals(
    op: &Operator,
    sc: &Scaling,
    c: &[f64],
    x: &[f64],
    s: &[Mat<C64>],
    z: &[Mat<C64>],
    lam: &[f64],
) -> Residuals {
    let mut pr = 0.0;
    let mut c_norm = 0.0;
    let mut s_norm = 0.0;
    let mut cz = 0.0;
    let mut dual = vec![0.0; x.len()];
    for k in 0..op.blocks.len() {
        let b = sc.block[k];
        let mut m = &s[k] * faer::Scale(C64::from(-1.0));
        op.apply_block(k, x, &mut m);
        op.add_constant(k, 1.0, &mut m);
        pr += frob_sq(m.as_ref()) / (b * b);
        c_norm += op.constant_norm_sq(k) / (b * b);
        s_norm += frob_sq(s[k].as_ref()) / (b * b);
        cz += op.constant_inner(k, &z[k]) / sc.obj;
        op.adjoint_block(k, &z[k], 1.0, &mut dual);
    }
    let ex = op.apply_eq(x);
    for i in 0..ex.len() {
        let e = sc.eq[i];
        pr += ((ex[i] - op.eq_rhs[i]) / e).powi(2);
        c_norm += (op.eq_rhs[i] / e).powi(2);
        cz -= op.eq_rhs[i] * lam[i] / sc.obj;
    }
    op.adjoint_eq(lam, 1.0, &mut dual);
    let mut dr = 0.0;
    let mut cn = 0.0;
    let mut cx = 0.0;
    for v in 0..x.len() {
        let f = sc.obj * sc.var[v];
        dr += ((dual[v] - c[v]) / f).powi(2);
        cn += (c[v] / f).powi(2);
        cx += c[v] * x[v] / sc.obj;
    }
    let (pr, dr) = (pr.sqrt(), dr.sqrt());
    let gap = (cx + cz).abs();
    Residuals {
        primal: pr / (1.0 + c_norm.sqrt() + s_norm.sqrt()),
        dual: dr / (1.0 + cn.sqrt()),
        gap: gap / (1.0 + cx.abs() + cz.abs()),
        primal_abs: pr,
        dual_abs: dr,
        gap_abs: gap,
    }
}
