//! Constructive dual certificates for a known scene.
//!
//! The candidate is the weighted least-norm `q₀` that makes both dual
//! polynomials interpolate `sign(α)·coef` with vanishing gradient at every
//! true atom:
//!
//! ```text
//!   minimize ‖W q₀‖²  subject to  F q₀ = p,      q₀ = W⁻² F^H (F W⁻² F^H)⁻¹ p
//! ```
//!
//! `W = diag(ω)` with `ω_m̃ ∝ (g(n) g(p) g(r))^{-1/2}`, so `W⁻²` is the separable
//! kernel weight and `F W⁻² F^H` is a matrix of kernel values, the `H` of the
//! analysis once derivative rows are scaled by `1/κ`.
//!
//! Derivative rows carry `+j2πk` weights with `k` measured from the centre of
//! each axis, i.e. they constrain `e^{-j2π⟨c, r⟩} f(r)`, which has the same
//! norm as `f`. The right-hand side of every derivative row is zero, so the
//! overall sign of a derivative row does not affect `q₀`.

use faer::prelude::Solve;
use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::axis_g;
use crate::localize::{field_of, DualPolynomial};
use crate::model::{norm, random_bases, steering_vector, wrap_dist, ProblemDims, Scene, Sensing, SubspaceBases, Which};
use crate::sdp::adjoint_coef;

use std::f64::consts::PI;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Rows of `F` above this condition number make the interpolation system singular.
pub const MAX_CONDITION: f64 = 1e10;

fn sign(a: C64) -> C64 {
    if a.norm() == 0.0 {
        ZERO
    } else {
        a / a.norm()
    }
}

/// Interpolation functionals for one emitter's atoms: `4 × atoms × rows`
/// rows ordered value block, then `τ`, `ν`, `β` derivative blocks, each
/// atom-major.
fn f_rows(s: Sensing<'_>, atoms: &[[f64; 3]], dims: &ProblemDims, kappa: Option<[f64; 3]>) -> Mat<C64> {
    let comps = s.rows(dims);
    let per = atoms.len() * comps;
    let mut f = Mat::<C64>::zeros(4 * per, dims.len());
    let centre = axis_centres(dims);
    for (a, r) in atoms.iter().enumerate() {
        let w = steering_vector(*r, dims);
        for i in 0..dims.len() {
            let (n, p, rr) = dims.split(i);
            let freq = [n as f64, p as f64 - centre[1], rr as f64 - centre[2]];
            for c in 0..comps {
                let base = adjoint_coef(s, dims, i, c) * w[i];
                if base == ZERO {
                    continue;
                }
                let row = a * comps + c;
                f[(row, i)] = base;
                for k in 0..3 {
                    let scale = kappa.map_or(1.0, |kp| 1.0 / kp[k]);
                    f[((k + 1) * per + row, i)] = base * C64::new(0.0, 2.0 * PI * freq[k] * scale);
                }
            }
        }
    }
    f
}

/// Centre of each frequency axis. The Doppler and array axes run over
/// `0..len`; measuring their derivatives about the centre removes the linear
/// phase that would otherwise make `f' = 0` incompatible with a kernel-shaped
/// certificate. `‖f‖` and its stationary points are unaffected.
fn axis_centres(dims: &ProblemDims) -> [f64; 3] {
    [0.0, ((dims.p.max(1) - 1) / 2) as f64, ((dims.nr.max(1) - 1) / 2) as f64]
}

fn stack_rows(top: Mat<C64>, bottom: Mat<C64>) -> Mat<C64> {
    let cols = top.ncols().max(bottom.ncols());
    Mat::from_fn(top.nrows() + bottom.nrows(), cols, |i, j| if i < top.nrows() { top[(i, j)] } else { bottom[(i - top.nrows(), j)] })
}

fn atom_params(scene: &Scene, which: Which) -> Vec<[f64; 3]> {
    let ch = match which {
        Which::Radar => &scene.radar,
        Which::Comms => &scene.comms,
    };
    ch.atoms.iter().map(|a| a.params()).collect()
}

/// `F` of size `(4LJ + 4QPJ) × MPN_r`.
pub fn build_f(scene: &Scene) -> Result<Mat<C64>> {
    scene.bases.check(&scene.dims)?;
    build_f_with(scene, &scene.bases, None)
}

fn build_f_with(scene: &Scene, bases: &SubspaceBases, kappa: Option<[f64; 3]>) -> Result<Mat<C64>> {
    let d = &scene.dims;
    let fr = f_rows(bases.sensing(Which::Radar), &atom_params(scene, Which::Radar), d, kappa);
    let fc = f_rows(bases.sensing(Which::Comms), &atom_params(scene, Which::Comms), d, kappa);
    Ok(stack_rows(fr, fc))
}

/// Right-hand side: `sign(α_ℓ) u` blocks then zeros, then `sign(α_q) v` blocks then zeros.
pub fn certificate_rhs(scene: &Scene) -> Vec<C64> {
    let mut p = Vec::new();
    for (atoms, coef) in [(&scene.radar.atoms, &scene.u), (&scene.comms.atoms, &scene.v)] {
        for a in atoms.iter() {
            p.extend(coef.iter().map(|&c| sign(a.alpha) * c));
        }
        p.extend(std::iter::repeat(ZERO).take(3 * atoms.len() * coef.len()));
    }
    p
}

/// `ω_m̃ = √(N/g(n)) √(P'/g(p)) √(N_r'/g(r))` with each axis's own weights
/// and half-size (at least one for axes too short to carry a triangle).
pub fn certificate_weights(dims: &ProblemDims) -> Vec<f64> {
    let axes = [dims.m, dims.p, dims.nr];
    let g: Vec<Vec<f64>> = axes.iter().map(|&len| axis_g(len)).collect();
    let half: Vec<f64> = axes.iter().map(|&len| ((len.max(1) - 1) / 2).max(1) as f64).collect();
    (0..dims.len())
        .map(|i| {
            let (n, p, r) = dims.split(i);
            let idx = [(n + dims.half() as i64) as usize, p, r];
            (0..3).map(|k| (half[k] / g[k][idx[k]]).sqrt()).product()
        })
        .collect()
}

/// Both solution routes of the weighted least-norm problem.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub q0: Vec<C64>,
    /// `W⁻¹ (F W⁻¹)⁺ p`, computed through an SVD.
    pub q0_pinv: Vec<C64>,
    /// `‖F q₀ − p‖₂`.
    pub constraint_residual: f64,
    pub f_condition: f64,
}

/// Solves the KKT system `(F W⁻² F^H) λ = p`, `q₀ = W⁻² F^H λ`.
pub fn construct_certificate(scene: &Scene) -> Result<Certificate> {
    construct_with_weights(scene, &certificate_weights(&scene.dims))
}

pub fn construct_with_weights(scene: &Scene, omega: &[f64]) -> Result<Certificate> {
    let full = build_f(scene)?;
    let rhs_full = certificate_rhs(scene);
    // rows that vanish identically (derivatives along single-sample axes)
    // with a zero target are satisfied by every q₀
    let keep: Vec<usize> = (0..full.nrows())
        .filter(|&i| rhs_full[i] != ZERO || (0..full.ncols()).any(|j| full[(i, j)] != ZERO))
        .collect();
    let f = Mat::<C64>::from_fn(keep.len(), full.ncols(), |i, j| full[(keep[i], j)]);
    let p: Vec<C64> = keep.iter().map(|&i| rhs_full[i]).collect();
    let (rows, n) = (f.nrows(), f.ncols());
    if omega.len() != n || omega.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::Param("certificate weights must be positive, one per sample".into()));
    }
    if rows > n {
        return Err(Error::RankDeficient(format!("{rows} interpolation conditions exceed {n} samples")));
    }
    // F W⁻¹
    let fw = Mat::<C64>::from_fn(rows, n, |i, j| f[(i, j)] / omega[j]);
    let svd = fw.thin_svd().map_err(|_| Error::RankDeficient("SVD of F W⁻¹ failed".into()))?;
    let s = svd.S().column_vector();
    let sv: Vec<f64> = (0..s.nrows()).map(|i| s[i].re).collect();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let cond = smax / smin;
    if !(cond <= MAX_CONDITION) {
        return Err(Error::RankDeficient(format!("F W⁻¹ has condition {cond:.3e}; atoms too close or dimensions too small")));
    }

    // route 1: normal equations
    let g = Mat::<C64>::from_fn(rows, rows, |i, k| (0..n).map(|j| fw[(i, j)] * fw[(k, j)].conj()).sum());
    let rhs = Mat::<C64>::from_fn(rows, 1, |i, _| p[i]);
    let lam = g.partial_piv_lu().solve(&rhs);
    let q0: Vec<C64> = (0..n).map(|j| (0..rows).map(|i| f[(i, j)].conj() * lam[(i, 0)]).sum::<C64>() / (omega[j] * omega[j])).collect();

    // route 2: pseudo-inverse
    let (u, v) = (svd.U(), svd.V());
    let mut z = vec![ZERO; n];
    for c in 0..sv.len() {
        let coef: C64 = (0..rows).map(|i| u[(i, c)].conj() * p[i]).sum::<C64>() / sv[c];
        for (j, zj) in z.iter_mut().enumerate() {
            *zj += v[(j, c)] * coef;
        }
    }
    let q0_pinv: Vec<C64> = z.iter().zip(omega).map(|(x, w)| x / w).collect();

    let fq: Vec<C64> = (0..rows).map(|i| (0..n).map(|j| f[(i, j)] * q0[j]).sum::<C64>() - p[i]).collect();
    Ok(Certificate { q0, q0_pinv, constraint_residual: norm(&fq), f_condition: cond })
}

/// `H = F̃ diag(ĝ) F̃^H` with derivative rows of `F̃` divided by the per-axis
/// `κ` and `ĝ` the separable normalized kernel weights, so that every
/// diagonal entry of `H` is one.
pub fn build_h(scene: &Scene) -> Result<Mat<C64>> {
    build_h_with(scene, &scene.bases)
}

fn build_h_with(scene: &Scene, bases: &SubspaceBases) -> Result<Mat<C64>> {
    let d = &scene.dims;
    bases.check(d)?;
    let f = build_f_with(scene, bases, Some(kappas(d)))?;
    let gw = kernel_weights(d);
    let rows = f.nrows();
    Ok(Mat::from_fn(rows, rows, |i, k| (0..d.len()).map(|j| f[(i, j)] * gw[j] * f[(k, j)].conj()).sum()))
}

/// Per-axis weights normalized to sum one, indexed by position on the axis.
fn normalized_axis_g(len: usize) -> Vec<f64> {
    let g = axis_g(len);
    let s: f64 = g.iter().sum();
    g.into_iter().map(|x| x / s).collect()
}

/// `ĝ(n) ĝ(p) ĝ(r)`: the separable kernel weight of every sample.
pub fn kernel_weights(dims: &ProblemDims) -> Vec<f64> {
    let g = [normalized_axis_g(dims.m), normalized_axis_g(dims.p), normalized_axis_g(dims.nr)];
    (0..dims.len())
        .map(|i| {
            let (n, p, r) = dims.split(i);
            g[0][(n + dims.half() as i64) as usize] * g[1][p] * g[2][r]
        })
        .collect()
}

/// `κ_k = (Σ ĝ_k(i) (2π f_i)²)^{1/2}` over the sample frequencies of each axis;
/// one on axes without spread.
pub fn kappas(dims: &ProblemDims) -> [f64; 3] {
    let c = axis_centres(dims);
    let axes = [(dims.m, -(dims.half() as i64)), (dims.p, -(c[1] as i64)), (dims.nr, -(c[2] as i64))];
    axes.map(|(len, first)| {
        let g = normalized_axis_g(len);
        let k2: f64 = g.iter().enumerate().map(|(i, w)| w * (2.0 * PI * (first + i as i64) as f64).powi(2)).sum();
        if k2 > 0.0 {
            k2.sqrt()
        } else {
            1.0
        }
    })
}

/// Monte Carlo estimate of `E[H]` over independent basis redraws.
pub fn expected_h(scene: &Scene, trials: usize, seed: u64) -> Result<Mat<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc: Option<Mat<C64>> = None;
    for _ in 0..trials.max(1) {
        let bases = random_bases(&scene.dims, rng.random());
        let h = build_h_with(scene, &bases)?;
        acc = Some(match acc {
            None => h,
            Some(a) => a + h,
        });
    }
    let n = trials.max(1) as f64;
    Ok(acc.expect("at least one trial") * faer::Scale(C64::new(1.0 / n, 0.0)))
}

fn spectral_norm(m: &Mat<C64>) -> f64 {
    m.singular_values().map(|s| s.into_iter().fold(0.0, f64::max)).unwrap_or(f64::NAN)
}

fn min_singular(m: &Mat<C64>) -> f64 {
    m.singular_values().map(|s| s.into_iter().fold(f64::INFINITY, f64::min)).unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    /// Fine-grid oversampling factor per axis.
    pub oversample: usize,
    pub interp_tol: f64,
    pub deriv_tol: f64,
    /// Finite-difference step for the derivative cross-check.
    pub fd_step: f64,
    /// Basis redraws for the `E[H]` estimate; zero skips it.
    pub h_trials: usize,
    pub h_seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { oversample: 8, interp_tol: 1e-6, deriv_tol: 1e-4, fd_step: 1e-5, h_trials: 32, h_seed: 0x5eed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub interp_residual: f64,
    pub deriv_residual: f64,
    /// Largest relative gap between analytic and central-difference derivatives.
    pub fd_mismatch: f64,
    /// Max of `‖f‖₂` over the fine grid outside the exclusion ellipsoids.
    pub offgrid_max: f64,
    pub h_invertibility: f64,
    pub h_deviation: Option<f64>,
    pub passed: bool,
}

fn excluded(r: [f64; 3], atoms: &[[f64; 3]], radius: [f64; 3]) -> bool {
    atoms.iter().any(|a| (0..3).map(|k| (wrap_dist(r[k], a[k]) / radius[k]).powi(2)).sum::<f64>() < 1.0)
}

/// Checks interpolation, stationarity and the off-support bound for `q0`.
pub fn validate_certificate(q0: &[C64], scene: &Scene, cfg: &ValidationConfig) -> Result<CertificateReport> {
    let d = &scene.dims;
    let radius = [0.5 / d.m as f64, 0.5 / d.p as f64, 0.5 / d.nr as f64];
    let grid = [cfg.oversample * d.m, cfg.oversample * d.p, cfg.oversample * d.nr];
    let (mut interp, mut deriv, mut fd, mut off) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let centre = axis_centres(d);
    for (which, coef) in [(Which::Radar, &scene.u), (Which::Comms, &scene.v)] {
        let atoms: Vec<(C64, [f64; 3])> = match which {
            Which::Radar => &scene.radar,
            Which::Comms => &scene.comms,
        }
        .atoms
        .iter()
        .map(|a| (a.alpha, a.params()))
        .collect();
        if atoms.is_empty() {
            continue;
        }
        let poly = DualPolynomial::from_bases(q0, &scene.bases, d, which)?;
        for &(alpha, r) in &atoms {
            let jet = poly.jet(r);
            let target: Vec<C64> = coef.iter().map(|&c| sign(alpha) * c).collect();
            interp = interp.max(norm(&jet.value.iter().zip(&target).map(|(a, b)| a - b).collect::<Vec<_>>()));
            for k in 0..3 {
                let rot = C64::new(0.0, 2.0 * PI * centre[k]);
                let centred: Vec<C64> = jet.grad[k].iter().zip(&jet.value).map(|(g, v)| g - rot * v).collect();
                deriv = deriv.max(norm(&centred));
                let mut rp = r;
                let mut rm = r;
                rp[k] += cfg.fd_step;
                rm[k] -= cfg.fd_step;
                let (fp, fm) = (poly.eval(rp), poly.eval(rm));
                let num: Vec<C64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * cfg.fd_step)).collect();
                let gap = norm(&num.iter().zip(&jet.grad[k]).map(|(a, b)| a - b).collect::<Vec<_>>());
                let scale = norm(&jet.value).max(norm(&jet.grad[k])).max(1e-300);
                fd = fd.max(gap / scale);
            }
        }
        let pts: Vec<[f64; 3]> = atoms.iter().map(|a| a.1).collect();
        let field = field_of(&poly, grid)?;
        for c in 0..grid[2] {
            for b in 0..grid[1] {
                for a in 0..grid[0] {
                    let r = field.point([a, b, c]);
                    if !excluded(r, &pts, radius) {
                        off = off.max(field.at(a, b, c).sqrt());
                    }
                }
            }
        }
    }
    let h = build_h(scene)?;
    let h_invertibility = min_singular(&h);
    let h_deviation = if cfg.h_trials > 0 {
        let eh = expected_h(scene, cfg.h_trials, cfg.h_seed)?;
        Some(spectral_norm(&(&h - &eh)))
    } else {
        None
    };
    let passed = interp <= cfg.interp_tol && deriv <= cfg.deriv_tol && off < 1.0;
    Ok(CertificateReport { interp_residual: interp, deriv_residual: deriv, fd_mismatch: fd, offgrid_max: off, h_invertibility, h_deviation, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atom, Channel3D};

    fn tiny_scene() -> Scene {
        let dims = ProblemDims::new(3, 1, 1, 1, 1, 0).unwrap();
        let bases = random_bases(&dims, 3);
        Scene {
            dims,
            radar: Channel3D::new(vec![Atom::new(0.2, 0.0, 0.0, C64::cis(0.4))]),
            comms: Channel3D::new(vec![]),
            bases,
            u: vec![C64::new(1.0, 0.0)],
            v: vec![],
        }
    }

    #[test]
    fn three_sample_f_by_hand() {
        let s = tiny_scene();
        let f = build_f(&s).unwrap();
        assert_eq!((f.nrows(), f.ncols()), (4, 3));
        for i in 0..3 {
            let n = i as f64 - 1.0;
            let expect = s.bases.t[(i, 0)].conj() * C64::cis(2.0 * PI * n * 0.2);
            assert!((f[(0, i)] - expect).norm() < 1e-14);
            assert!((f[(1, i)] - expect * C64::new(0.0, 2.0 * PI * n)).norm() < 1e-12);
            // single pulse, single antenna: ν and β rows vanish
            assert_eq!(f[(2, i)], ZERO);
            assert_eq!(f[(3, i)], ZERO);
        }
    }

    #[test]
    fn weights_at_centre_of_three_samples() {
        let d = ProblemDims::new(3, 1, 1, 1, 1, 0).unwrap();
        let w = certificate_weights(&d);
        assert!((w[1] - 3.0 / 17f64.sqrt()).abs() < 1e-14);
        assert!((w[0] - w[2]).abs() < 1e-14);
        assert!(w[1] < w[0]);
    }

    #[test]
    fn zero_certificate_fails_interpolation() {
        let s = tiny_scene();
        let cfg = ValidationConfig { h_trials: 0, ..Default::default() };
        let rep = validate_certificate(&[ZERO; 3], &s, &cfg).unwrap();
        assert!((rep.interp_residual - 1.0).abs() < 1e-14);
        assert!(!rep.passed);
    }

    #[test]
    fn single_atom_h_is_unit_at_origin() {
        let s = tiny_scene();
        let h = build_h(&s).unwrap();
        assert!((h[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((h[(1, 1)] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }
}
