//! Waveform recovery once the channel parameters are known.
//!
//! With estimated atoms the observation is linear in the stacked unknowns
//! `p = [α_r,1 u; …; α_r,L u; α_c,1 v; …; α_c,Q v]`, so a least-squares solve
//! recovers every product and a rank-one factorization splits amplitudes
//! from the shared coefficient vector. Under gain/phase errors the solve
//! alternates between the per-antenna error vector and `p`.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{norm, steering_vector, ProblemDims, SubspaceBases};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Columns above this condition number are treated as collinear.
pub const MAX_CONDITION: f64 = 1e10;

/// The design matrix `W = [W_r, W_c]` together with the atoms it was built from.
#[derive(Debug, Clone)]
pub struct Design {
    pub w: Mat<C64>,
    pub r_hats: Vec<[f64; 3]>,
    pub c_hats: Vec<[f64; 3]>,
    pub dims: ProblemDims,
}

impl Design {
    pub fn radar_cols(&self) -> usize {
        self.r_hats.len() * self.dims.j
    }

    /// Column block of atom `k` (radar atoms first).
    fn block(&self, k: usize) -> std::ops::Range<usize> {
        let j = self.dims.j;
        let pj = self.dims.p * j;
        let l = self.r_hats.len();
        if k < l {
            k * j..(k + 1) * j
        } else {
            let s = l * j + (k - l) * pj;
            s..s + pj
        }
    }

    fn atom_name(&self, k: usize) -> String {
        let l = self.r_hats.len();
        if k < l {
            format!("radar atom {k} at {:?}", self.r_hats[k])
        } else {
            format!("comms atom {} at {:?}", k - l, self.c_hats[k - l])
        }
    }
}

/// Row `m̃` of radar block `ℓ` is `conj(w(r̂_ℓ)[m̃]) · t_n^H`; row `m̃` of comms
/// block `q` is `conj(w(ĉ_q)[m̃]) · d_{n,p}^H`, nonzero only in the `J`
/// columns of message `p`.
pub fn build_w(r_hats: &[[f64; 3]], c_hats: &[[f64; 3]], bases: &SubspaceBases, dims: &ProblemDims) -> Result<Design> {
    if r_hats.is_empty() && c_hats.is_empty() {
        return Err(Error::Param("no estimated atoms to build W from".into()));
    }
    bases.check(dims)?;
    let (j, pj) = (dims.j, dims.p * dims.j);
    let cols = r_hats.len() * j + c_hats.len() * pj;
    let mut w = Mat::<C64>::zeros(dims.len(), cols);
    for (l, r) in r_hats.iter().enumerate() {
        let sv = steering_vector(*r, dims);
        for (i, s) in sv.iter().enumerate() {
            let n = i % dims.m;
            for k in 0..j {
                w[(i, l * j + k)] = s.conj() * bases.t[(n, k)];
            }
        }
    }
    let off = r_hats.len() * j;
    for (q, c) in c_hats.iter().enumerate() {
        let sv = steering_vector(*c, dims);
        for (i, s) in sv.iter().enumerate() {
            let (n, p) = (i % dims.m, (i / dims.m) % dims.p);
            for k in 0..j {
                w[(i, off + q * pj + p * j + k)] = s.conj() * bases.d_blocks[p][(n, k)];
            }
        }
    }
    Ok(Design { w, r_hats: r_hats.to_vec(), c_hats: c_hats.to_vec(), dims: *dims })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredSignals {
    /// Unit-norm, first nonzero entry real-positive. Empty without radar atoms.
    pub u_hat: Vec<C64>,
    pub v_hat: Vec<C64>,
    pub alphas_r: Vec<C64>,
    pub alphas_c: Vec<C64>,
    /// `T û`.
    pub s_hat: Vec<C64>,
    /// `D_p v̂_p` for each message `p`.
    pub g_hat: Vec<Vec<C64>>,
    /// The raw least-squares stack `p`.
    pub stack: Vec<C64>,
    pub residual: f64,
    pub scale_note: String,
}

impl RecoveredSignals {
    /// Atom-wise products `α̂ û` (radar) rebuilt from the factorization.
    pub fn radar_block(&self, l: usize) -> Vec<C64> {
        self.u_hat.iter().map(|&u| self.alphas_r[l] * u).collect()
    }

    pub fn comms_block(&self, q: usize) -> Vec<C64> {
        self.v_hat.iter().map(|&v| self.alphas_c[q] * v).collect()
    }
}

/// `X̂ = Σ α̂ coef ŵ^H` for one emitter.
pub fn lifted_estimate(params: &[[f64; 3]], alphas: &[C64], coef: &[C64], dims: &ProblemDims) -> Mat<C64> {
    let mut x = Mat::<C64>::zeros(coef.len(), dims.len());
    for (r, &a) in params.iter().zip(alphas) {
        let sv = steering_vector(*r, dims);
        for (col, s) in sv.iter().enumerate() {
            for (row, &c) in coef.iter().enumerate() {
                x[(row, col)] += a * c * s.conj();
            }
        }
    }
    x
}

/// `argmin ‖A x − b‖₂` through the thin SVD, rejecting matrices whose
/// condition number exceeds [`MAX_CONDITION`]. On rejection returns the
/// right singular vector of the smallest singular value.
fn lstsq(a: &Mat<C64>, b: &[C64]) -> std::result::Result<Vec<C64>, (f64, Vec<C64>)> {
    let svd = a.thin_svd().map_err(|_| (f64::INFINITY, vec![]))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let k = s.nrows();
    let smax = (0..k).map(|i| s[i].re).fold(0.0, f64::max);
    let smin = (0..k).map(|i| s[i].re).fold(f64::INFINITY, f64::min);
    if k < a.ncols() || smin <= 0.0 || smax / smin > MAX_CONDITION {
        let worst = (0..k).min_by(|&x, &y| s[x].re.total_cmp(&s[y].re)).unwrap_or(0);
        return Err((smax / smin, (0..v.nrows()).map(|i| v[(i, worst)]).collect()));
    }
    let mut x = vec![ZERO; a.ncols()];
    for c in 0..k {
        let coef: C64 = (0..a.nrows()).map(|i| u[(i, c)].conj() * b[i]).sum::<C64>() / s[c].re;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += v[(i, c)] * coef;
        }
    }
    Ok(x)
}

fn matvec(a: &Mat<C64>, x: &[C64]) -> Vec<C64> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum()).collect()
}

/// Best rank-one fit `blocks[k] ≈ α_k c` with `‖c‖ = 1` and the first
/// nonzero entry of `c` real-positive.
pub fn rank_one_split(blocks: &[Vec<C64>]) -> (Vec<C64>, Vec<C64>) {
    let Some(first) = blocks.first() else {
        return (vec![], vec![]);
    };
    let rows = first.len();
    let m = Mat::<C64>::from_fn(rows, blocks.len(), |i, k| blocks[k][i]);
    let mut c: Vec<C64> = match m.thin_svd() {
        Ok(svd) => {
            let s = svd.S().column_vector();
            let top = (0..s.nrows()).max_by(|&x, &y| s[x].re.total_cmp(&s[y].re)).unwrap_or(0);
            (0..rows).map(|i| svd.U()[(i, top)]).collect()
        }
        Err(_) => first.clone(),
    };
    let nc = norm(&c);
    if nc > 0.0 {
        c.iter_mut().for_each(|x| *x /= nc);
    }
    fix_phase(&mut c);
    let alphas = blocks.iter().map(|b| c.iter().zip(b).map(|(ci, bi)| ci.conj() * bi).sum()).collect();
    (c, alphas)
}

/// Rotates `c` so its first entry of non-negligible magnitude is real-positive.
pub fn fix_phase(c: &mut [C64]) {
    let scale = c.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if let Some(z) = c.iter().find(|z| z.norm() > 1e-12 * scale).copied() {
        let rot = z.conj() / z.norm();
        c.iter_mut().for_each(|x| *x *= rot);
    }
}

fn assemble(design: &Design, stack: Vec<C64>, residual: f64, bases: &SubspaceBases) -> RecoveredSignals {
    let d = &design.dims;
    let l = design.r_hats.len();
    let radar: Vec<Vec<C64>> = (0..l).map(|k| stack[design.block(k)].to_vec()).collect();
    let comms: Vec<Vec<C64>> = (0..design.c_hats.len()).map(|k| stack[design.block(l + k)].to_vec()).collect();
    let (u_hat, alphas_r) = rank_one_split(&radar);
    let (v_hat, alphas_c) = rank_one_split(&comms);
    let s_hat = if u_hat.is_empty() {
        vec![]
    } else {
        (0..d.m).map(|n| (0..d.j).map(|k| bases.t[(n, k)] * u_hat[k]).sum()).collect()
    };
    let g_hat = if v_hat.is_empty() {
        vec![]
    } else {
        (0..d.p).map(|p| (0..d.m).map(|n| (0..d.j).map(|k| bases.d_blocks[p][(n, k)] * v_hat[p * d.j + k]).sum()).collect()).collect()
    };
    RecoveredSignals {
        u_hat,
        v_hat,
        alphas_r,
        alphas_c,
        s_hat,
        g_hat,
        stack,
        residual,
        scale_note: "coefficients are unit-norm with the first entry real-positive; amplitudes carry the remaining scale and phase".into(),
    }
}

/// Plain least-squares recovery.
pub fn recover_ls(design: &Design, y: &[C64], bases: &SubspaceBases) -> Result<RecoveredSignals> {
    if y.len() != design.w.nrows() {
        return Err(Error::Shape(format!("y has {} entries, W has {} rows", y.len(), design.w.nrows())));
    }
    let stack = lstsq(&design.w, y).map_err(|(cond, null)| rank_error(design, cond, &null))?;
    let fit = matvec(&design.w, &stack);
    let residual = norm(&y.iter().zip(&fit).map(|(a, b)| a - b).collect::<Vec<_>>());
    Ok(assemble(design, stack, residual, bases))
}

fn rank_error(design: &Design, cond: f64, null: &[C64]) -> Error {
    let n_atoms = design.r_hats.len() + design.c_hats.len();
    let mut energy: Vec<(usize, f64)> =
        (0..n_atoms).map(|k| (k, null.get(design.block(k)).map_or(0.0, |b| norm(b)))).collect();
    energy.sort_by(|a, b| b.1.total_cmp(&a.1));
    let names: Vec<String> = energy.iter().take(2).map(|&(k, _)| design.atom_name(k)).collect();
    Error::RankDeficient(format!("W condition {cond:.3e}; colliding: {}", names.join(" / ")))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AlternatingOptions {
    pub max_iter: usize,
    /// Stop once the relative objective decrease falls below this.
    pub rel_tol: f64,
}

impl Default for AlternatingOptions {
    fn default() -> Self {
        Self { max_iter: 200, rel_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlternatingOutcome {
    pub signals: RecoveredSignals,
    /// Per-antenna error estimate, `‖ê‖₂ = ε_e`.
    pub e_hat: Vec<C64>,
    /// `Σ_m ‖y_m − (1 + ê_m) z_m‖²` after every half-step, starting after the
    /// first error update.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

/// `Σ_m ‖y_m − (1 + e_m) z_m‖²` with `z = W p`, `m` the antenna of each slab.
pub fn alternating_objective(y: &[C64], z: &[C64], e: &[C64], dims: &ProblemDims) -> f64 {
    let slab = dims.m * dims.p;
    y.iter().zip(z).enumerate().map(|(i, (yi, zi))| (yi - (C64::new(1.0, 0.0) + e[i / slab]) * zi).norm_sqr()).sum()
}

/// Exact minimizer of `Σ_m ‖r_m − e_m z_m‖²` over the sphere `‖e‖₂ = ε`.
///
/// Stationarity gives `e_m = z_m^H r_m / (‖z_m‖² − λ)`; the global minimum
/// has `λ < min ‖z_m‖²`, where `‖e(λ)‖` increases monotonically, so `λ` is
/// found by bisection.
pub fn sphere_error_update(r: &[Vec<C64>], z: &[Vec<C64>], eps: f64) -> Vec<C64> {
    let a: Vec<f64> = z.iter().map(|zm| zm.iter().map(|x| x.norm_sqr()).sum()).collect();
    let b: Vec<C64> = z.iter().zip(r).map(|(zm, rm)| zm.iter().zip(rm).map(|(x, y)| x.conj() * y).sum()).collect();
    let nm = a.len();
    if eps == 0.0 || nm == 0 {
        return vec![ZERO; nm];
    }
    let e_of = |lam: f64| -> Vec<C64> { (0..nm).map(|m| b[m] / (a[m] - lam)).collect() };
    let amin = a.iter().copied().fold(f64::INFINITY, f64::min);
    let bmax = b.iter().fold(0.0f64, |s, x| s.max(x.norm()));
    // at λ = amin - Σ|b|/ε every term is at most |b_m| ε / Σ|b| so ‖e‖ ≤ ε
    let bsum: f64 = b.iter().map(|x| x.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut lo = amin - bsum / eps - 1.0;
    let mut hi = amin;
    // hard case: the components attaining amin carry no signal and ‖e‖ stays below ε
    let tiny = 1e-14 * bmax.max(1e-300);
    let degenerate: Vec<usize> = (0..nm).filter(|&m| (a[m] - amin).abs() <= 1e-14 * amin.max(1.0) && b[m].norm() <= tiny).collect();
    if !degenerate.is_empty() {
        let mut e: Vec<C64> = (0..nm).map(|m| if degenerate.contains(&m) { ZERO } else { b[m] / (a[m] - amin) }).collect();
        let ne = norm(&e);
        if ne <= eps {
            let fill = ((eps * eps - ne * ne).max(0.0) / degenerate.len() as f64).sqrt();
            for &m in &degenerate {
                e[m] = C64::new(fill, 0.0);
            }
            return e;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm(&e_of(mid)) > eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut e = e_of(lo);
    // land exactly on the sphere
    let ne = norm(&e);
    if ne > 0.0 {
        e.iter_mut().for_each(|x| *x *= eps / ne);
    }
    e
}

/// Alternating recovery under per-antenna gain/phase errors with
/// `‖ê‖₂ = eps_e`. The p-step is least squares on `diag(1 + ê) W`.
pub fn recover_alternating(
    design: &Design,
    y: &[C64],
    bases: &SubspaceBases,
    eps_e: f64,
    opts: &AlternatingOptions,
) -> Result<AlternatingOutcome> {
    if !(eps_e > 0.0) {
        return Err(Error::Param(format!("alternating recovery needs eps_e > 0, got {eps_e}")));
    }
    let d = &design.dims;
    let slab = d.m * d.p;
    let split = |v: &[C64]| -> Vec<Vec<C64>> { v.chunks(slab).map(<[C64]>::to_vec).collect() };
    let ys = split(y);

    let init = recover_ls(design, y, bases)?;
    let mut stack = init.stack;
    let mut z = matvec(&design.w, &stack);
    let mut e = vec![ZERO; d.nr];
    let mut history = Vec::new();
    let floor = rounding_floor(y);
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        // e-step on residual y - z
        let r: Vec<Vec<C64>> = ys.iter().zip(split(&z)).map(|(ym, zm)| ym.iter().zip(&zm).map(|(a, b)| a - b).collect()).collect();
        e = sphere_error_update(&r, &split(&z), eps_e);
        let f_e = alternating_objective(y, &z, &e, d);
        push_checked(&mut history, f_e, floor, "error update")?;

        // p-step
        let we = Mat::<C64>::from_fn(design.w.nrows(), design.w.ncols(), |i, j| (C64::new(1.0, 0.0) + e[i / slab]) * design.w[(i, j)]);
        stack = lstsq(&we, y).map_err(|(cond, null)| rank_error(design, cond, &null))?;
        z = matvec(&design.w, &stack);
        let f_p = alternating_objective(y, &z, &e, d);
        push_checked(&mut history, f_p, floor, "coefficient update")?;

        if (f_e - f_p).abs() <= opts.rel_tol * f_e.max(f64::MIN_POSITIVE) || f_p <= floor {
            break;
        }
    }
    let fit: Vec<C64> = z.iter().enumerate().map(|(i, zi)| (C64::new(1.0, 0.0) + e[i / slab]) * zi).collect();
    let residual = norm(&y.iter().zip(&fit).map(|(a, b)| a - b).collect::<Vec<_>>());
    Ok(AlternatingOutcome { signals: assemble(design, stack, residual, bases), e_hat: e, objective: history, iterations })
}

/// Size of rounding error in the objective: residual entries carry about
/// `ε‖y‖` of noise each, so sums of their squares are blurred at this level.
fn rounding_floor(y: &[C64]) -> f64 {
    let eps = 64.0 * f64::EPSILON;
    eps * eps * y.len() as f64 * y.iter().map(|v| v.norm_sqr()).sum::<f64>()
}

fn push_checked(history: &mut Vec<f64>, f: f64, floor: f64, step: &str) -> Result<()> {
    if let Some(&prev) = history.last() {
        // exact subproblem solves can only lose to rounding
        if f > prev + 1e-10 * prev + floor {
            return Err(Error::Param(format!("alternating objective rose at {step}: {prev:.16e} -> {f:.16e}")));
        }
    }
    history.push(f);
    Ok(())
}

/// `|⟨a, b⟩| / (‖a‖ ‖b‖)`.
pub fn correlation(a: &[C64], b: &[C64]) -> f64 {
    let ip: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let den = norm(a) * norm(b);
    if den == 0.0 {
        0.0
    } else {
        ip.norm() / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_bases, Atom, Channel3D};

    fn scene(l: usize, q: usize) -> (ProblemDims, SubspaceBases, Channel3D, Channel3D, Vec<C64>, Vec<C64>) {
        let d = ProblemDims::new(7, 3, 3, 2, l, q).unwrap();
        let b = random_bases(&d, 11);
        let radar = Channel3D::new((0..l).map(|k| Atom::new(0.1 + 0.3 * k as f64, 0.2 + 0.25 * k as f64, 0.6, C64::cis(0.3 + k as f64))).collect());
        let comms = Channel3D::new((0..q).map(|k| Atom::new(0.55 + 0.2 * k as f64, 0.7, 0.15 + 0.4 * k as f64, C64::cis(-1.0 - k as f64))).collect());
        let u = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let v: Vec<C64> = (0..6).map(|k| C64::new(1.0, k as f64 * 0.1) / 6f64.sqrt()).collect();
        (d, b, radar, comms, u, v)
    }

    fn params(ch: &Channel3D) -> Vec<[f64; 3]> {
        ch.atoms.iter().map(Atom::params).collect()
    }

    #[test]
    fn w_shape_single_radar_atom() {
        let (d, b, radar, _, _, _) = scene(1, 0);
        let des = build_w(&params(&radar), &[], &b, &d).unwrap();
        assert_eq!((des.w.nrows(), des.w.ncols()), (d.len(), d.j));
    }

    #[test]
    fn empty_estimates_rejected() {
        let (d, b, ..) = scene(1, 0);
        assert!(build_w(&[], &[], &b, &d).is_err());
    }

    #[test]
    fn exact_atoms_fit_clean_observation() {
        let (d, b, radar, comms, u, v) = scene(2, 1);
        let y = crate::model::synth_observation(&radar, &comms, &b, &u, &v, &d).unwrap();
        let des = build_w(&params(&radar), &params(&comms), &b, &d).unwrap();
        let rec = recover_ls(&des, &y, &b).unwrap();
        assert!(rec.residual <= 1e-8 * norm(&y));
        assert!(correlation(&rec.u_hat, &u) >= 1.0 - 1e-10);
        assert!((norm(&rec.u_hat) - 1.0).abs() < 1e-12);
        assert!(rec.u_hat[0].im.abs() < 1e-12 && rec.u_hat[0].re > 0.0);
    }

    #[test]
    fn duplicated_atom_is_rank_deficient() {
        let (d, b, radar, ..) = scene(1, 0);
        let p = params(&radar);
        let des = build_w(&[p[0], p[0]], &[], &b, &d).unwrap();
        let y = vec![C64::new(1.0, 0.0); d.len()];
        match recover_ls(&des, &y, &b) {
            Err(Error::RankDeficient(msg)) => assert!(msg.contains("radar atom 0") && msg.contains("radar atom 1")),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn sphere_update_hits_the_sphere() {
        let z = vec![vec![C64::new(1.0, 0.5), C64::new(-0.2, 0.0)], vec![C64::new(0.3, 0.3)], vec![C64::new(2.0, 0.0)]];
        let r = vec![vec![C64::new(0.1, 0.0), C64::new(0.0, 0.2)], vec![C64::new(-0.05, 0.1)], vec![C64::new(0.0, -0.3)]];
        for eps in [1e-3, 0.1, 1.0, 10.0] {
            let e = sphere_error_update(&r, &z, eps);
            assert!((norm(&e) - eps).abs() < 1e-9 * eps);
        }
    }
}
