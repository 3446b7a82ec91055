//! Builders for the dual semidefinite programs.
//!
//! Decision vector layout (all real): `q` as `(Re, Im)` pairs, then the Gram
//! matrix `Q` as its real diagonal followed by `(Re, Im)` pairs of the strict
//! upper triangle in row-major order, then any scalar auxiliaries.
//!
//! The bounded-real-lemma certificate for `‖f(r)‖₂² ≤ c` is
//! `[[Q, Q̂^H], [Q̂, c I]] ⪰ 0` with `Q̂ = B^*(q)` and every non-zero
//! multilevel lag of `Q` summing to zero, so that `w(r)^H Q w(r) = Tr Q`.

use faer::Mat;
use num_complex::Complex64 as C64;
use sdpsolve::{EqConstraint, PsdBlock, SdpProblem, Sense};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{norm, ProblemDims, Sensing, SubspaceBases};

const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Emit the stand-alone `Q ⪰ 0` block. It is implied by either LMI
    /// (Schur complement), so it is off by default.
    pub explicit_gram_block: bool,
    /// Largest admissible PSD block.
    pub max_block: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { explicit_gram_block: false, max_block: 4096 }
    }
}

/// Where each unknown lives in the decision vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    /// `M·P·N_r`.
    pub n: usize,
    pub q_start: usize,
    pub diag_start: usize,
    pub off_start: usize,
    /// Epigraph variable of `‖q - y‖₂` (noisy program).
    pub s_var: Option<usize>,
    /// Spectral bound `t ≥ ‖Q‖₂` (noisy program).
    pub t_var: Option<usize>,
}

impl Layout {
    fn new(p: &mut SdpProblem, n: usize) -> Self {
        let q_start = p.add_vars("q", 2 * n);
        let diag_start = p.add_vars("Q.diag", n);
        let off_start = p.add_vars("Q.off", n * (n - 1));
        Self { n, q_start, diag_start, off_start, s_var: None, t_var: None }
    }

    /// `(Re, Im)` indices of `q_i`.
    pub fn q(&self, i: usize) -> (usize, usize) {
        (self.q_start + 2 * i, self.q_start + 2 * i + 1)
    }

    /// `(Re, Im)` indices of `Q_ik` for `i < k`.
    pub fn off(&self, i: usize, k: usize) -> (usize, usize) {
        debug_assert!(i < k);
        let pair = i * self.n - i * (i + 1) / 2 + (k - i - 1);
        (self.off_start + 2 * pair, self.off_start + 2 * pair + 1)
    }

    pub fn extract_q(&self, x: &[f64]) -> Vec<C64> {
        (0..self.n).map(|i| C64::new(x[self.q(i).0], x[self.q(i).1])).collect()
    }

    pub fn extract_gram(&self, x: &[f64]) -> Mat<C64> {
        let n = self.n;
        let mut m = Mat::<C64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(x[self.diag_start + i], 0.0);
            for k in i + 1..n {
                let (a, b) = self.off(i, k);
                m[(i, k)] = C64::new(x[a], x[b]);
                m[(k, i)] = C64::new(x[a], -x[b]);
            }
        }
        m
    }

    /// Writes `Q` into a decision vector (used to build warm starts and tests).
    pub fn store_gram(&self, g: &Mat<C64>, x: &mut [f64]) {
        for i in 0..self.n {
            x[self.diag_start + i] = g[(i, i)].re;
            for k in i + 1..self.n {
                let (a, b) = self.off(i, k);
                x[a] = g[(i, k)].re;
                x[b] = g[(i, k)].im;
            }
        }
    }

    pub fn store_q(&self, q: &[C64], x: &mut [f64]) {
        for (i, v) in q.iter().enumerate() {
            let (a, b) = self.q(i);
            x[a] = v.re;
            x[b] = v.im;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualProgram {
    pub problem: SdpProblem,
    pub layout: Layout,
    pub dims: ProblemDims,
}

/// Multilevel lags `(n₁, n₂, n₃)` of the canonical half-space, zero lag first.
///
/// `n₁ ∈ [0, M)`, `n₂ ∈ (-P, P)`, `n₃ ∈ (-N_r, N_r)`; when `n₁ = 0` only
/// `n₂ > 0`, or `n₂ = 0` with `n₃ ≥ 0`, is kept. Together with Hermitian
/// symmetry this names every lag exactly once.
pub fn half_space_lags(dims: &ProblemDims) -> Vec<[i64; 3]> {
    let (m, p, r) = (dims.m as i64, dims.p as i64, dims.nr as i64);
    let mut out = vec![[0, 0, 0]];
    for n1 in 0..m {
        for n2 in -(p - 1)..p {
            for n3 in -(r - 1)..r {
                if n1 == 0 && (n2 < 0 || (n2 == 0 && n3 <= 0)) {
                    continue;
                }
                out.push([n1, n2, n3]);
            }
        }
    }
    out
}

pub fn in_half_space(d: [i64; 3]) -> bool {
    d[0] > 0 || (d[0] == 0 && (d[1] > 0 || (d[1] == 0 && d[2] >= 0)))
}

fn lag_of(dims: &ProblemDims, i: usize, k: usize) -> [i64; 3] {
    let (ni, pi, ri) = dims.split(i);
    let (nk, pk, rk) = dims.split(k);
    [nk - ni, pk as i64 - pi as i64, rk as i64 - ri as i64]
}

/// Position of a half-space lag in [`half_space_lags`] order.
fn lag_slot(dims: &ProblemDims, d: [i64; 3]) -> usize {
    let (p, r) = (dims.p as i64, dims.nr as i64);
    let (w2, w3) = (2 * p - 1, 2 * r - 1);
    if d[0] == 0 {
        if d[1] == 0 {
            d[2] as usize
        } else {
            (r + (d[1] - 1) * w3 + (d[2] + r - 1)) as usize
        }
    } else {
        let base = r + (p - 1) * w3;
        (base + (d[0] - 1) * w2 * w3 + (d[1] + p - 1) * w3 + (d[2] + r - 1)) as usize
    }
}

/// Adds `Tr(Θ_n Q) = δ_n` (zero lag: `Tr Q = trace_rhs`, or no equality when
/// `trace_rhs` is `None`) as real equalities.
fn add_lag_constraints(p: &mut SdpProblem, lay: &Layout, dims: &ProblemDims, trace_rhs: Option<f64>) {
    let lags = half_space_lags(dims);
    let mut re: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lags.len()];
    let mut im: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lags.len()];
    let n = lay.n;
    for i in 0..n {
        for k in 0..n {
            let d = lag_of(dims, i, k);
            if !in_half_space(d) {
                continue;
            }
            let slot = lag_slot(dims, d);
            debug_assert_eq!(lags[slot], d);
            if i == k {
                re[slot].push((lay.diag_start + i, 1.0));
            } else if i < k {
                let (a, b) = lay.off(i, k);
                re[slot].push((a, 1.0));
                im[slot].push((b, 1.0));
            } else {
                // Q_ik = conj(Q_ki)
                let (a, b) = lay.off(k, i);
                re[slot].push((a, 1.0));
                im[slot].push((b, -1.0));
            }
        }
    }
    for (slot, d) in lags.iter().enumerate() {
        if slot == 0 {
            if let Some(rhs) = trace_rhs {
                p.eqs.push(EqConstraint { label: "trace".into(), terms: std::mem::take(&mut re[0]), rhs });
            }
            continue;
        }
        let tag = format!("lag({},{},{})", d[0], d[1], d[2]);
        p.eqs.push(EqConstraint { label: format!("{tag}.re"), terms: std::mem::take(&mut re[slot]), rhs: 0.0 });
        p.eqs.push(EqConstraint { label: format!("{tag}.im"), terms: std::mem::take(&mut im[slot]), rhs: 0.0 });
    }
}

/// Adds `sign · Q` on the leading `n × n` corner of a block.
fn add_gram(b: &mut PsdBlock, lay: &Layout, sign: f64) {
    for i in 0..lay.n {
        b.add_term(lay.diag_start + i, i, i, ONE * sign);
        for k in i + 1..lay.n {
            let (x, y) = lay.off(i, k);
            b.add_term(x, i, k, ONE * sign);
            b.add_term(y, i, k, I * sign);
        }
    }
}

/// Entry `(row, m̃)` of `B^*(e_m̃)`: the coefficient multiplying `q_m̃` in
/// component `row` of the dual polynomial.
pub fn adjoint_coef(s: Sensing<'_>, dims: &ProblemDims, idx: usize, row: usize) -> C64 {
    let n = idx % dims.m;
    match s {
        Sensing::Radar(t) => t[(n, row)].conj(),
        Sensing::Comms(d) => {
            let p = (idx / dims.m) % dims.p;
            if row / dims.j == p {
                d[p][(n, row % dims.j)].conj()
            } else {
                C64::new(0.0, 0.0)
            }
        }
    }
}

/// `[[Q, Q̂^H], [Q̂, level·I]] ⪰ 0`.
fn lmi_block(label: &str, lay: &Layout, dims: &ProblemDims, s: Sensing<'_>, level: f64) -> PsdBlock {
    let rows = s.rows(dims);
    let n = lay.n;
    let mut b = PsdBlock::new(label, n + rows);
    add_gram(&mut b, lay, 1.0);
    for idx in 0..n {
        let (a, bi) = lay.q(idx);
        // rows touched by q_idx: all J for radar, only slab p for comms
        let (lo, hi) = match s {
            Sensing::Radar(_) => (0, rows),
            Sensing::Comms(_) => {
                let p = (idx / dims.m) % dims.p;
                (p * dims.j, (p + 1) * dims.j)
            }
        };
        for row in lo..hi {
            // (Q̂^H)[idx, row] = conj(q_idx · coef)
            let c = adjoint_coef(s, dims, idx, row).conj();
            b.add_term(a, idx, n + row, c);
            b.add_term(bi, idx, n + row, -I * c);
        }
    }
    for row in 0..rows {
        b.add_constant(n + row, n + row, ONE * level);
    }
    b
}

fn check_inputs(y: &[C64], bases: &SubspaceBases, dims: &ProblemDims, opts: &BuildOptions) -> Result<()> {
    dims.validate()?;
    bases.check(dims)?;
    if y.len() != dims.len() {
        return Err(Error::Shape(format!("y has length {}, expected {}", y.len(), dims.len())));
    }
    let biggest = dims.len() + dims.p * dims.j;
    if biggest > opts.max_block {
        return Err(Error::Dims(format!("PSD block of size {biggest} exceeds the limit {}", opts.max_block)));
    }
    Ok(())
}

fn maybe_gram_block(p: &mut SdpProblem, lay: &Layout, opts: &BuildOptions) {
    if opts.explicit_gram_block {
        let mut b = PsdBlock::new("Q", lay.n);
        add_gram(&mut b, lay, 1.0);
        p.blocks.push(b);
    }
}

/// Noiseless dual: maximize `Re⟨q, y⟩` subject to both bounded-real LMIs and
/// `Tr(Θ_n Q) = δ_n`.
pub fn build_noiseless_dual(y: &[C64], bases: &SubspaceBases, dims: &ProblemDims, opts: &BuildOptions) -> Result<DualProgram> {
    check_inputs(y, bases, dims, opts)?;
    build_multi(y, &[Sensing::Radar(&bases.t)], &[Sensing::Comms(&bases.d_blocks)], dims, opts, "noiseless dual")
}

/// One shared Gram matrix, one LMI per emitter.
pub fn build_ntuple_dual(
    y: &[C64],
    radar: &[&Mat<C64>],
    comms: &[&[Mat<C64>]],
    dims: &ProblemDims,
    opts: &BuildOptions,
) -> Result<DualProgram> {
    if radar.is_empty() || comms.is_empty() {
        return Err(Error::Param("n-tuple program needs at least one radar and one comms emitter".into()));
    }
    for (k, t) in radar.iter().enumerate() {
        let c = comms[k.min(comms.len() - 1)];
        bases_of(t, c)?.check(dims)?;
    }
    check_inputs(y, &bases_of(radar[0], comms[0])?, dims, opts)?;
    let r: Vec<Sensing<'_>> = radar.iter().map(|t| Sensing::Radar(t)).collect();
    let c: Vec<Sensing<'_>> = comms.iter().map(|d| Sensing::Comms(d)).collect();
    build_multi(y, &r, &c, dims, opts, "n-tuple dual")
}

fn bases_of(t: &Mat<C64>, d: &[Mat<C64>]) -> Result<SubspaceBases> {
    SubspaceBases::new(t.clone(), d.to_vec())
}

fn build_multi(
    y: &[C64],
    radar: &[Sensing<'_>],
    comms: &[Sensing<'_>],
    dims: &ProblemDims,
    opts: &BuildOptions,
    desc: &str,
) -> Result<DualProgram> {
    let n = dims.len();
    let mut p = SdpProblem::new(format!("{desc} M={} P={} Nr={} J={}", dims.m, dims.p, dims.nr, dims.j), Sense::Maximize);
    let lay = Layout::new(&mut p, n);
    for (i, v) in y.iter().enumerate() {
        let (a, b) = lay.q(i);
        p.objective[a] = v.re;
        p.objective[b] = v.im;
    }
    maybe_gram_block(&mut p, &lay, opts);
    for (k, s) in radar.iter().enumerate() {
        p.blocks.push(lmi_block(&format!("radar{k}"), &lay, dims, *s, 1.0));
    }
    for (k, s) in comms.iter().enumerate() {
        p.blocks.push(lmi_block(&format!("comms{k}"), &lay, dims, *s, 1.0));
    }
    add_lag_constraints(&mut p, &lay, dims, Some(1.0));
    Ok(DualProgram { problem: p, layout: lay, dims: *dims })
}

/// Noisy dual: minimize `‖q - y‖₂` subject to LMIs at levels `μ_r²`, `μ_c²`,
/// zero non-trivial lags, and `Tr Q + (ε_e + 2√(MPN_r)) ε_e ‖Q‖₂ ≤ 1`.
///
/// `‖q - y‖₂ ≤ s` is the arrow block `[[s I, q - y], [(q - y)^H, s]] ⪰ 0` and
/// `‖Q‖₂ ≤ t` is `t I - Q ⪰ 0`, both exact for `Q ⪰ 0`.
pub fn build_noisy_dual(
    y: &[C64],
    bases: &SubspaceBases,
    dims: &ProblemDims,
    mu_r: f64,
    mu_c: f64,
    eps_e: f64,
    opts: &BuildOptions,
) -> Result<DualProgram> {
    check_inputs(y, bases, dims, opts)?;
    if !(mu_r > 0.0 && mu_c > 0.0) {
        return Err(Error::Param(format!("regularizers must be positive, got mu_r={mu_r}, mu_c={mu_c}")));
    }
    if !(eps_e >= 0.0) {
        return Err(Error::Param(format!("eps_e must be >= 0, got {eps_e}")));
    }
    let n = dims.len();
    let mut p = SdpProblem::new(
        format!("noisy dual M={} P={} Nr={} J={}", dims.m, dims.p, dims.nr, dims.j),
        Sense::Minimize,
    );
    let mut lay = Layout::new(&mut p, n);
    let s = p.add_vars("s", 1);
    let t = p.add_vars("t", 1);
    lay.s_var = Some(s);
    lay.t_var = Some(t);
    p.objective[s] = 1.0;
    maybe_gram_block(&mut p, &lay, opts);
    p.blocks.push(lmi_block("radar0", &lay, dims, Sensing::Radar(&bases.t), mu_r * mu_r));
    p.blocks.push(lmi_block("comms0", &lay, dims, Sensing::Comms(&bases.d_blocks), mu_c * mu_c));

    let coupling = (eps_e + 2.0 * (n as f64).sqrt()) * eps_e;
    let mut tr = PsdBlock::new("trace", 1);
    tr.add_constant(0, 0, ONE);
    for i in 0..n {
        tr.add_term(lay.diag_start + i, 0, 0, -ONE);
    }
    if coupling > 0.0 {
        tr.add_term(t, 0, 0, -ONE * coupling);
    }
    p.blocks.push(tr);

    if coupling > 0.0 {
        let mut spec = PsdBlock::new("spectral", n);
        add_gram(&mut spec, &lay, -1.0);
        for i in 0..n {
            spec.add_term(t, i, i, ONE);
        }
        p.blocks.push(spec);
    }

    let mut arrow = PsdBlock::new("residual", n + 1);
    for i in 0..=n {
        arrow.add_term(s, i, i, ONE);
    }
    for (i, v) in y.iter().enumerate() {
        let (a, b) = lay.q(i);
        arrow.add_constant(i, n, -*v);
        arrow.add_term(a, i, n, ONE);
        arrow.add_term(b, i, n, I);
    }
    p.blocks.push(arrow);

    add_lag_constraints(&mut p, &lay, dims, None);
    Ok(DualProgram { problem: p, layout: lay, dims: *dims })
}

/// `ρ` times the upper bounds on the expected dual weighted atomic norms of
/// the noise:
/// `μ_r = ρσ(ε_e MPN_r + ‖T‖_F √(MPJN_r log(MPN_r)))`,
/// `μ_c = ρσ(ε_e MPN_r + ‖D‖_F √(MP²JN_r log(MPN_r)))`.
pub fn compute_regularizers(sigma: f64, eps_e: f64, bases: &SubspaceBases, dims: &ProblemDims, rho: f64) -> Result<(f64, f64)> {
    if !(rho >= 1.0) {
        return Err(Error::Param(format!("rho must be >= 1, got {rho}")));
    }
    let n = dims.len() as f64;
    let log = n.ln().max(0.0);
    let (p, j) = (dims.p as f64, dims.j as f64);
    let mu_r = sigma * (eps_e * n + bases.t_frobenius() * (n * j * log).sqrt());
    let mu_c = sigma * (eps_e * n + bases.d_frobenius() * (n * p * j * log).sqrt());
    Ok((rho * mu_r, rho * mu_c))
}

/// Solved dual variables of a DBD program.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualSolution {
    pub q: Vec<C64>,
    #[serde(with = "crate::io::mat")]
    pub gram: Mat<C64>,
    pub objective: f64,
    pub status: sdpsolve::Status,
    pub residuals: sdpsolve::Residuals,
    pub iterations: usize,
    pub elapsed_s: f64,
    /// `t` of the noisy program.
    pub spectral_bound: Option<f64>,
}

impl DualSolution {
    pub fn from_solution(prog: &DualProgram, sol: &sdpsolve::Solution) -> Self {
        let lay = &prog.layout;
        Self {
            q: lay.extract_q(&sol.x),
            gram: lay.extract_gram(&sol.x),
            objective: sol.objective,
            status: sol.status,
            residuals: sol.residuals,
            iterations: sol.iterations,
            elapsed_s: sol.elapsed.as_secs_f64(),
            spectral_bound: lay.t_var.map(|t| sol.x[t]),
        }
    }

    /// `Q̂_r = B_r^*(q)^H`, rebuilt from `q`.
    pub fn qhat_r(&self, bases: &SubspaceBases, dims: &ProblemDims) -> Result<Mat<C64>> {
        Ok(crate::model::adjoint_br(&self.q, bases, dims)?.adjoint().to_owned())
    }

    pub fn qhat_c(&self, bases: &SubspaceBases, dims: &ProblemDims) -> Result<Mat<C64>> {
        Ok(crate::model::adjoint_bc(&self.q, bases, dims)?.adjoint().to_owned())
    }

    /// `Re⟨y, q⟩ = Re(q^H y)`.
    pub fn dual_value(&self, y: &[C64]) -> f64 {
        crate::model::inner(y, &self.q).re
    }

    pub fn q_norm(&self) -> f64 {
        norm(&self.q)
    }

    pub fn gram_spectral_norm(&self) -> f64 {
        sdpsolve::cone::hermitian_eigen(self.gram.as_ref())
            .map(|(v, _)| v.iter().fold(0.0f64, |a, &b| a.max(b.abs())))
            .unwrap_or(f64::NAN)
    }
}

/// Solves a built program.
pub fn solve(prog: &DualProgram, cfg: &sdpsolve::SolverConfig) -> Result<DualSolution> {
    let sol = sdpsolve::solve(&prog.problem, cfg)?;
    Ok(DualSolution::from_solution(prog, &sol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_slots_match_enumeration() {
        for (m, p, r) in [(3, 1, 1), (3, 2, 2), (5, 3, 2), (1, 2, 3)] {
            let d = ProblemDims::new(m, p, r, 1, 1, 1).unwrap();
            for (k, lag) in half_space_lags(&d).iter().enumerate() {
                assert_eq!(lag_slot(&d, *lag), k, "{lag:?}");
            }
        }
    }

    #[test]
    fn pair_indices_are_dense() {
        let mut p = SdpProblem::new("t", Sense::Minimize);
        let lay = Layout::new(&mut p, 5);
        let mut seen = vec![];
        for i in 0..5 {
            for k in i + 1..5 {
                seen.push(lay.off(i, k).0 - lay.off_start);
            }
        }
        assert_eq!(seen, (0..10).map(|x| 2 * x).collect::<Vec<_>>());
    }

    #[test]
    fn one_dimensional_toeplitz_constraints() {
        let d = ProblemDims::new(3, 1, 1, 1, 1, 1).unwrap();
        let bases = crate::model::random_bases(&d, 0);
        let y = vec![C64::new(1.0, 0.0); 3];
        let prog = build_noiseless_dual(&y, &bases, &d, &BuildOptions::default()).unwrap();
        let labels: Vec<&str> = prog.problem.eqs.iter().map(|e| e.label.as_str()).collect();
        assert_eq!(labels, ["trace", "lag(1,0,0).re", "lag(1,0,0).im", "lag(2,0,0).re", "lag(2,0,0).im"]);
        assert_eq!(prog.problem.blocks.iter().map(|b| b.size).collect::<Vec<_>>(), [4, 4]);
    }

    #[test]
    fn regularizers_vanish_without_noise() {
        let d = ProblemDims::new(5, 2, 2, 2, 1, 1).unwrap();
        let b = crate::model::random_bases(&d, 0);
        assert_eq!(compute_regularizers(0.0, 0.1, &b, &d, 1.0).unwrap(), (0.0, 0.0));
        assert!(compute_regularizers(1.0, 0.1, &b, &d, 0.5).is_err());
    }
}
