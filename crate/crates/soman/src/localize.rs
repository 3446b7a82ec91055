//! Dual-polynomial evaluation and channel-parameter extraction.
//!
//! Component `j` of the radar polynomial is
//! `f_j(r) = Σ_m̃ q_m̃ conj(T[n, j]) e^{j2π(nτ + pν + rβ)}`; the comms
//! polynomial has `PJ` components, component `(p, j)` supported on pulse
//! slab `p` only. Grids are evaluated with a separable inverse FFT and
//! peaks refined by a Newton/gradient ascent on `‖f‖²`.
//!
//! Because each comms component lives on a single slab `p`, its modulus does
//! not depend on `ν` at all: `‖f_c‖` is constant along the Doppler axis.
//! [`extract_peaks`] detects such invariant axes and reports them as
//! unresolved instead of returning a ridge of spurious maxima.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::model::{wrap01, wrap_dist, ProblemDims, Sensing, SubspaceBases, Which};
use crate::sdp::adjoint_coef;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Relative spread below which a field is treated as constant along an axis.
const INVARIANCE_TOL: f64 = 1e-9;

/// Fraction of the threshold a grid sample must reach to be refined.
pub const PREFILTER: f64 = 0.5;

/// `8M × 8P × 8N_r`.
pub fn default_grid(dims: &ProblemDims) -> [usize; 3] {
    [8 * dims.m, 8 * dims.p, 8 * dims.nr]
}

/// The vector-valued polynomial as sparse coefficient lists, one per component.
#[derive(Debug, Clone)]
pub struct DualPolynomial {
    pub dims: ProblemDims,
    pub which: Which,
    /// `(m̃, c_j[m̃])` pairs with nonzero coefficient.
    components: Vec<Vec<(usize, C64)>>,
}

/// `f(r)` together with its first and second partial derivatives.
#[derive(Debug, Clone)]
pub struct Jet {
    pub value: Vec<C64>,
    pub grad: [Vec<C64>; 3],
    /// Upper triangle in order `ττ, τν, τβ, νν, νβ, ββ`.
    pub hess: [Vec<C64>; 6],
}

impl DualPolynomial {
    pub fn new(q: &[C64], sensing: Sensing<'_>, dims: &ProblemDims) -> Result<Self> {
        if q.len() != dims.len() {
            return Err(Error::Shape(format!("q has {} entries, expected {}", q.len(), dims.len())));
        }
        let rows = sensing.rows(dims);
        let components = (0..rows)
            .map(|row| {
                (0..dims.len())
                    .filter_map(|i| {
                        let a = adjoint_coef(sensing, dims, i, row);
                        (a != ZERO).then(|| (i, q[i] * a))
                    })
                    .collect()
            })
            .collect();
        Ok(Self { dims: *dims, which: sensing.which(), components })
    }

    pub fn from_bases(q: &[C64], bases: &SubspaceBases, dims: &ProblemDims, which: Which) -> Result<Self> {
        bases.check(dims)?;
        Self::new(q, bases.sensing(which), dims)
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Coefficient of component `row` at sample `idx`.
    pub fn coefficient(&self, row: usize, idx: usize) -> C64 {
        self.components[row].iter().find(|(i, _)| *i == idx).map_or(ZERO, |&(_, c)| c)
    }

    /// Per-axis phase tables `e^{j2π k x}` for the sample ranges of each axis.
    fn phases(&self, r: [f64; 3]) -> [Vec<C64>; 3] {
        let d = &self.dims;
        let h = d.half() as i64;
        [
            (-h..=h).map(|n| C64::cis(2.0 * PI * n as f64 * r[0])).collect(),
            (0..d.p).map(|p| C64::cis(2.0 * PI * p as f64 * r[1])).collect(),
            (0..d.nr).map(|k| C64::cis(2.0 * PI * k as f64 * r[2])).collect(),
        ]
    }

    /// Frequencies `(n, p, r)` of sample `idx` as reals.
    fn freqs(&self, idx: usize) -> [f64; 3] {
        let (n, p, r) = self.dims.split(idx);
        [n as f64, p as f64, r as f64]
    }

    pub fn eval(&self, r: [f64; 3]) -> Vec<C64> {
        let ph = self.phases(r);
        let m = self.dims.m;
        let mp = m * self.dims.p;
        self.components
            .iter()
            .map(|comp| comp.iter().map(|&(i, c)| c * ph[0][i % m] * ph[1][(i / m) % self.dims.p] * ph[2][i / mp]).sum())
            .collect()
    }

    /// `‖f(r)‖₂²`.
    pub fn norm2(&self, r: [f64; 3]) -> f64 {
        self.eval(r).iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn jet(&self, r: [f64; 3]) -> Jet {
        let ph = self.phases(r);
        let (m, p) = (self.dims.m, self.dims.p);
        let rows = self.components.len();
        let mut value = vec![ZERO; rows];
        let mut grad: [Vec<C64>; 3] = std::array::from_fn(|_| vec![ZERO; rows]);
        let mut hess: [Vec<C64>; 6] = std::array::from_fn(|_| vec![ZERO; rows]);
        const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        for (row, comp) in self.components.iter().enumerate() {
            for &(i, c) in comp {
                let t = c * ph[0][i % m] * ph[1][(i / m) % p] * ph[2][i / (m * p)];
                let w = self.freqs(i).map(|k| 2.0 * PI * k);
                value[row] += t;
                for k in 0..3 {
                    grad[k][row] += t * C64::new(0.0, w[k]);
                }
                for (h, &(a, b)) in PAIRS.iter().enumerate() {
                    hess[h][row] -= t * (w[a] * w[b]);
                }
            }
        }
        Jet { value, grad, hess }
    }

    /// `‖f‖²`, its gradient and Hessian in `(τ, ν, β)`.
    pub fn norm2_derivatives(&self, r: [f64; 3]) -> (f64, [f64; 3], [[f64; 3]; 3]) {
        let jet = self.jet(r);
        let dot = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum::<f64>();
        let v = dot(&jet.value, &jet.value);
        let g = std::array::from_fn(|k| 2.0 * dot(&jet.value, &jet.grad[k]));
        let mut h = [[0.0; 3]; 3];
        let slot = |a: usize, b: usize| match (a.min(b), a.max(b)) {
            (0, 0) => 0,
            (0, 1) => 1,
            (0, 2) => 2,
            (1, 1) => 3,
            (1, 2) => 4,
            _ => 5,
        };
        for a in 0..3 {
            for b in 0..3 {
                h[a][b] = 2.0 * (dot(&jet.grad[a], &jet.grad[b]) + dot(&jet.value, &jet.hess[slot(a, b)]));
            }
        }
        (v, g, h)
    }
}

/// `‖f(r)‖₂²` sampled on a regular grid over `[0,1)³`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolynomialField {
    pub grid: [usize; 3],
    /// Flat storage, `τ` fastest: `values[a + Gτ (b + Gν c)]`.
    pub values: Vec<f64>,
    pub which: Which,
}

impl PolynomialField {
    pub fn at(&self, a: usize, b: usize, c: usize) -> f64 {
        self.values[a + self.grid[0] * (b + self.grid[1] * c)]
    }

    pub fn point(&self, idx: [usize; 3]) -> [f64; 3] {
        std::array::from_fn(|k| idx[k] as f64 / self.grid[k] as f64)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0, |a, &b| a.max(b))
    }

    /// Axes along which the field is constant to [`INVARIANCE_TOL`] relative.
    pub fn invariant_axes(&self) -> [bool; 3] {
        let scale = self.max().max(f64::MIN_POSITIVE);
        let [g0, g1, g2] = self.grid;
        let mut out = [true; 3];
        for (k, flag) in out.iter_mut().enumerate() {
            if self.grid[k] == 1 {
                continue;
            }
            'scan: for c in 0..g2 {
                for b in 0..g1 {
                    for a in 0..g0 {
                        let next = match k {
                            0 => self.at((a + 1) % g0, b, c),
                            1 => self.at(a, (b + 1) % g1, c),
                            _ => self.at(a, b, (c + 1) % g2),
                        };
                        if (next - self.at(a, b, c)).abs() > INVARIANCE_TOL * scale {
                            *flag = false;
                            break 'scan;
                        }
                    }
                }
            }
        }
        out
    }

    /// Raw `f64` grid plus a JSON sidecar describing it.
    pub fn export(&self, stem: &Path) -> Result<()> {
        io::write_f64_grid(&stem.with_extension("f64"), &self.values)?;
        let meta = serde_json::json!({
            "grid": self.grid,
            "which": self.which,
            "layout": "little-endian f64, tau fastest, then nu, then beta",
            "max": self.max(),
        });
        io::write_json(&stem.with_extension("json"), &meta)
    }
}

/// Evaluates `‖f‖²` on a `grid[0] × grid[1] × grid[2]` lattice by zero-padded
/// inverse FFTs, one per polynomial component.
pub fn eval_dual_field(
    q: &[C64],
    bases: &SubspaceBases,
    dims: &ProblemDims,
    grid: [usize; 3],
    which: Which,
) -> Result<PolynomialField> {
    let poly = DualPolynomial::from_bases(q, bases, dims, which)?;
    field_of(&poly, grid)
}

pub fn field_of(poly: &DualPolynomial, grid: [usize; 3]) -> Result<PolynomialField> {
    let d = &poly.dims;
    let need = [d.m, d.p, d.nr];
    if (0..3).any(|k| grid[k] < need[k]) {
        return Err(Error::Param(format!("grid {grid:?} smaller than sample extents {need:?}")));
    }
    let total = grid[0] * grid[1] * grid[2];
    let mut planner = FftPlanner::<f64>::new();
    let plans: Vec<_> = grid.iter().map(|&g| planner.plan_fft_inverse(g)).collect();

    let component_field = |comp: &Vec<(usize, C64)>| -> Vec<f64> {
        let mut buf = vec![ZERO; total];
        for &(i, c) in comp {
            let (n, p, r) = d.split(i);
            let a = n.rem_euclid(grid[0] as i64) as usize;
            buf[a + grid[0] * (p + grid[1] * r)] += c;
        }
        let mut line = Vec::new();
        // τ: only rows with b < P, c < N_r carry data
        for c in 0..d.nr {
            for b in 0..d.p {
                let s = grid[0] * (b + grid[1] * c);
                plans[0].process(&mut buf[s..s + grid[0]]);
            }
        }
        // ν: columns with c < N_r
        line.resize(grid[1], ZERO);
        for c in 0..d.nr {
            for a in 0..grid[0] {
                for b in 0..grid[1] {
                    line[b] = buf[a + grid[0] * (b + grid[1] * c)];
                }
                plans[1].process(&mut line);
                for b in 0..grid[1] {
                    buf[a + grid[0] * (b + grid[1] * c)] = line[b];
                }
            }
        }
        line.resize(grid[2], ZERO);
        let stride = grid[0] * grid[1];
        for ab in 0..stride {
            for c in 0..grid[2] {
                line[c] = buf[ab + stride * c];
            }
            plans[2].process(&mut line);
            for c in 0..grid[2] {
                buf[ab + stride * c] = line[c];
            }
        }
        buf.into_iter().map(|z| z.norm_sqr()).collect()
    };

    let values = poly
        .components
        .par_iter()
        .map(component_field)
        .reduce(|| vec![0.0; total], |mut acc, f| {
            acc.iter_mut().zip(f).for_each(|(a, b)| *a += b);
            acc
        });
    Ok(PolynomialField { grid, values, which: poly.which })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizedAtom {
    pub tau: f64,
    pub nu: f64,
    pub beta: f64,
    pub peak_norm2: f64,
    /// Axes along which the polynomial norm carries no information; the
    /// corresponding coordinate is reported as `0`.
    pub unresolved: [bool; 3],
    /// Refinement reached the gradient tolerance.
    pub converged: bool,
}

impl LocalizedAtom {
    pub fn params(&self) -> [f64; 3] {
        [self.tau, self.nu, self.beta]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub which: Which,
    pub atoms: Vec<LocalizedAtom>,
    pub threshold_used: f64,
    pub refined: bool,
}

impl LocalizationResult {
    pub fn params(&self) -> Vec<[f64; 3]> {
        self.atoms.iter().map(LocalizedAtom::params).collect()
    }
}

/// Half a main lobe per axis: `1/(2M), 1/(2P), 1/(2N_r)`.
pub fn default_min_sep(dims: &ProblemDims) -> [f64; 3] {
    [0.5 / dims.m as f64, 0.5 / dims.p as f64, 0.5 / dims.nr as f64]
}

fn same_box(a: [f64; 3], b: [f64; 3], sep: [f64; 3]) -> bool {
    (0..3).all(|k| wrap_dist(a[k], b[k]) < sep[k])
}

/// Grid local maxima of `field` at or above `threshold`, greedily
/// de-duplicated (two points closer than `min_sep` on every axis are the same
/// atom), optionally refined against `poly`.
///
/// With `poly` the grid is only a starting point: candidates down to
/// [`PREFILTER`]`·threshold` are refined, and the threshold is applied to the
/// refined peak values, so a coarse grid cannot hide a peak that sits
/// between samples.
pub fn extract_peaks(
    field: &PolynomialField,
    threshold: f64,
    min_sep: [f64; 3],
    poly: Option<&DualPolynomial>,
) -> Result<LocalizationResult> {
    if !(threshold > 0.0) {
        return Err(Error::Param(format!("peak threshold {threshold} must be positive")));
    }
    let g = field.grid;
    let free = field.invariant_axes();
    // collapse invariant axes onto index 0
    let span = |k: usize| if free[k] { 1 } else { g[k] };
    let floor = if poly.is_some() { PREFILTER * threshold } else { threshold };
    let mut cand: Vec<([usize; 3], f64)> = Vec::new();
    for c in 0..span(2) {
        for b in 0..span(1) {
            for a in 0..span(0) {
                let v = field.at(a, b, c);
                if v < floor {
                    continue;
                }
                let mut is_max = true;
                'nb: for dc in -1i64..=1 {
                    for db in -1i64..=1 {
                        for da in -1i64..=1 {
                            if (da, db, dc) == (0, 0, 0) {
                                continue;
                            }
                            let aa = (a as i64 + da).rem_euclid(g[0] as i64) as usize;
                            let bb = (b as i64 + db).rem_euclid(g[1] as i64) as usize;
                            let cc = (c as i64 + dc).rem_euclid(g[2] as i64) as usize;
                            if field.at(aa, bb, cc) > v {
                                is_max = false;
                                break 'nb;
                            }
                        }
                    }
                }
                if is_max {
                    cand.push(([a, b, c], v));
                }
            }
        }
    }
    cand.sort_by(|x, y| y.1.total_cmp(&x.1));

    let mut atoms: Vec<LocalizedAtom> = Vec::new();
    for (idx, v) in cand {
        let r = field.point(idx);
        if atoms.iter().any(|a| same_box(a.params(), r, min_sep)) {
            continue;
        }
        atoms.push(LocalizedAtom { tau: r[0], nu: r[1], beta: r[2], peak_norm2: v, unresolved: free, converged: false });
    }

    if let Some(poly) = poly {
        let mut refined: Vec<LocalizedAtom> = Vec::new();
        for a in atoms {
            let out = refine_peak(poly, a.params(), free, &RefineOptions::default());
            let at = LocalizedAtom { tau: out.r[0], nu: out.r[1], beta: out.r[2], peak_norm2: out.norm2, converged: out.converged, ..a };
            match refined.iter_mut().find(|b| same_box(b.params(), at.params(), min_sep)) {
                Some(b) if b.peak_norm2 < at.peak_norm2 => *b = at,
                Some(_) => {}
                None => refined.push(at),
            }
        }
        refined.retain(|a| a.peak_norm2 >= threshold);
        refined.sort_by(|x, y| y.peak_norm2.total_cmp(&x.peak_norm2));
        return Ok(LocalizationResult { which: field.which, atoms: refined, threshold_used: threshold, refined: true });
    }
    Ok(LocalizationResult { which: field.which, atoms, threshold_used: threshold, refined: false })
}

#[derive(Debug, Clone, Copy)]
pub struct RefineOptions {
    pub grad_tol: f64,
    pub max_steps: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-9, max_steps: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refined {
    pub r: [f64; 3],
    pub norm2: f64,
    pub steps: usize,
    pub converged: bool,
}

/// Ascent on `‖f‖²` from `r0`. Takes a Newton step when the Hessian
/// restricted to the free axes is negative definite, a scaled gradient step
/// otherwise, and backtracks until the objective increases. Axes flagged in
/// `fixed` are not moved.
pub fn refine_peak(poly: &DualPolynomial, r0: [f64; 3], fixed: [bool; 3], opts: &RefineOptions) -> Refined {
    let axes: Vec<usize> = (0..3).filter(|&k| !fixed[k]).collect();
    let mut r = r0.map(wrap01);
    let (mut val, mut g, mut h) = poly.norm2_derivatives(r);
    // gradient scale: a step of 1/(2π·extent) per unit of relative slope
    let extent = [poly.dims.m, poly.dims.p, poly.dims.nr].map(|e| e as f64);
    let gnorm = |g: &[f64; 3]| axes.iter().map(|&k| g[k] * g[k]).sum::<f64>().sqrt();
    for step in 0..opts.max_steps {
        if gnorm(&g) <= opts.grad_tol {
            return Refined { r, norm2: val, steps: step, converged: true };
        }
        let dir = newton_direction(&axes, &g, &h).unwrap_or_else(|| {
            let mut d = [0.0; 3];
            for &k in &axes {
                let curv = (2.0 * PI * extent[k]).powi(2) * val.max(1e-12);
                d[k] = g[k] / curv;
            }
            d
        });
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let cand: [f64; 3] = std::array::from_fn(|k| wrap01(r[k] + t * dir[k]));
            let v = poly.norm2(cand);
            if v >= val {
                r = cand;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // no ascent possible at machine precision: treat as stationary
            return Refined { r, norm2: val, steps: step, converged: gnorm(&g) <= opts.grad_tol.max(1e-6 * val.max(1.0)) };
        }
        (val, g, h) = poly.norm2_derivatives(r);
    }
    let converged = gnorm(&g) <= opts.grad_tol;
    Refined { r, norm2: val, steps: opts.max_steps, converged }
}

/// `-H⁻¹ g` on the free axes, or `None` unless `H` is negative definite there.
fn newton_direction(axes: &[usize], g: &[f64; 3], h: &[[f64; 3]; 3]) -> Option<[f64; 3]> {
    let k = axes.len();
    if k == 0 {
        return None;
    }
    // Cholesky of -H restricted to the free axes
    let mut a = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = -h[axes[i]][axes[j]];
        }
    }
    let mut l = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|t| l[i][t] * l[j][t]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let b: Vec<f64> = axes.iter().map(|&ax| g[ax]).collect();
    let mut z = vec![0.0; k];
    for i in 0..k {
        z[i] = (b[i] - (0..i).map(|t| l[i][t] * z[t]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        x[i] = (z[i] - (i + 1..k).map(|t| l[t][i] * x[t]).sum::<f64>()) / l[i][i];
    }
    let mut d = [0.0; 3];
    for (i, &ax) in axes.iter().enumerate() {
        d[ax] = x[i];
    }
    Some(d)
}

/// Peak levels of the regularized program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyLevels {
    pub a_r: f64,
    pub a_c: f64,
    /// `slack · a_r`, `slack · a_c`: the thresholds handed to [`extract_peaks`].
    pub threshold_r: f64,
    pub threshold_c: f64,
}

/// `a = μ² (1 − (ε_e + 2√(MPN_r)) ε_e ‖Q‖₂)` for both emitters. A negative
/// level means the error bound swamps the regularizer.
pub fn noisy_thresholds(mu_r: f64, mu_c: f64, eps_e: f64, dims: &ProblemDims, q_spectral: f64, slack: f64) -> Result<NoisyLevels> {
    if [mu_r, mu_c, eps_e, q_spectral].iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::Param("noisy thresholds need non-negative inputs".into()));
    }
    if !(slack > 0.0 && slack <= 1.0) {
        return Err(Error::Param(format!("slack {slack} outside (0, 1]")));
    }
    let factor = 1.0 - (eps_e + 2.0 * (dims.len() as f64).sqrt()) * eps_e * q_spectral;
    if factor < 0.0 {
        return Err(Error::Unusable(format!("error bound {eps_e} drives the peak level negative ({factor:.3e})")));
    }
    let (a_r, a_c) = (mu_r * mu_r * factor, mu_c * mu_c * factor);
    Ok(NoisyLevels { a_r, a_c, threshold_r: slack * a_r, threshold_c: slack * a_c })
}

/// Grid evaluation, peak extraction and refinement in one call.
pub fn localize(
    q: &[C64],
    bases: &SubspaceBases,
    dims: &ProblemDims,
    which: Which,
    grid: [usize; 3],
    threshold: f64,
) -> Result<LocalizationResult> {
    let poly = DualPolynomial::from_bases(q, bases, dims, which)?;
    let field = field_of(&poly, grid)?;
    extract_peaks(&field, threshold, default_min_sep(dims), Some(&poly))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_bases;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_q(len: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
    }

    #[test]
    fn zero_q_gives_zero_field() {
        let d = ProblemDims::new(3, 2, 2, 2, 1, 1).unwrap();
        let b = random_bases(&d, 1);
        let f = eval_dual_field(&vec![ZERO; d.len()], &b, &d, [12, 8, 8], Which::Radar).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_smaller_than_extent_rejected() {
        let d = ProblemDims::new(5, 2, 2, 2, 1, 1).unwrap();
        let b = random_bases(&d, 1);
        assert!(eval_dual_field(&random_q(d.len(), 0), &b, &d, [4, 8, 8], Which::Radar).is_err());
    }

    #[test]
    fn unreachable_threshold_gives_no_atoms() {
        let d = ProblemDims::new(5, 2, 2, 2, 1, 1).unwrap();
        let b = random_bases(&d, 1);
        let q = random_q(d.len(), 4);
        let poly = DualPolynomial::from_bases(&q, &b, &d, Which::Radar).unwrap();
        let f = field_of(&poly, [20, 8, 8]).unwrap();
        let res = extract_peaks(&f, f.max() * 1.1, default_min_sep(&d), Some(&poly)).unwrap();
        assert!(res.atoms.is_empty());
    }

    #[test]
    fn comms_norm_ignores_doppler() {
        let d = ProblemDims::new(5, 3, 2, 2, 1, 1).unwrap();
        let b = random_bases(&d, 2);
        let poly = DualPolynomial::from_bases(&random_q(d.len(), 5), &b, &d, Which::Comms).unwrap();
        let a = poly.norm2([0.3, 0.1, 0.7]);
        let c = poly.norm2([0.3, 0.77, 0.7]);
        assert!((a - c).abs() <= 1e-12 * a);
        let f = field_of(&poly, [20, 12, 8]).unwrap();
        assert_eq!(f.invariant_axes(), [false, true, false]);
    }

    #[test]
    fn thresholds_error_free_and_boundary() {
        let d = ProblemDims::new(3, 1, 1, 1, 1, 1).unwrap();
        let lv = noisy_thresholds(2.0, 3.0, 0.0, &d, 5.0, 1.0).unwrap();
        assert_eq!((lv.a_r, lv.a_c), (4.0, 9.0));
        // (ε + 2√3) ε ‖Q‖ = 1 exactly at ‖Q‖ = 1 / ((ε + 2√3) ε)
        let eps = 0.1;
        let qn = 1.0 / ((eps + 2.0 * 3f64.sqrt()) * eps);
        let lv = noisy_thresholds(1.0, 1.0, eps, &d, qn, 0.95).unwrap();
        assert!(lv.a_r.abs() < 1e-12);
        assert!(matches!(noisy_thresholds(1.0, 1.0, eps, &d, 1.01 * qn, 0.95), Err(Error::Unusable(_))));
    }
}
