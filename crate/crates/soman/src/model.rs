//! Scene synthesis, the lifted sensing operators and their adjoints.
//!
//! Conventions used everywhere in the crate:
//!
//! * samples are indexed by `m̃ = (n + N) + M·p + M·P·r` with `n ∈ [-N, N]`,
//!   `p ∈ [0, P)`, `r ∈ [0, N_r)`;
//! * the steering vector has entries `w(r)[m̃] = e^{+j2π(nτ + pν + rβ)}`;
//! * `T` is `M × J` with row `n` equal to `t_n^H`, so `s = T u`; each message
//!   block `D_p` is `M × J` and `g_p = D_p v_p`;
//! * a channel enters the lifted unknown as `X = Σ α u w(r)^H`, which makes
//!   `y[m̃] = Σ α (t_n^H u) e^{-j2π(nτ + pν + rβ)}`.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDims {
    /// Samples per pulse, `M = 2N + 1`.
    pub m: usize,
    /// Pulses (radar) and messages (comms).
    pub p: usize,
    /// Receive antennas.
    pub nr: usize,
    /// Subspace dimension.
    pub j: usize,
    /// Radar targets.
    pub l: usize,
    /// Communication paths.
    pub q: usize,
}

impl ProblemDims {
    pub fn new(m: usize, p: usize, nr: usize, j: usize, l: usize, q: usize) -> Result<Self> {
        let d = Self { m, p, nr, j, l, q };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.p == 0 || self.nr == 0 || self.j == 0 {
            return Err(Error::Dims(format!("all of M, P, N_r, J must be >= 1, got {self:?}")));
        }
        if self.m % 2 == 0 {
            return Err(Error::Dims(format!("M must be odd (M = 2N + 1), got {}", self.m)));
        }
        Ok(())
    }

    /// `N` in `M = 2N + 1`.
    pub fn half(&self) -> usize {
        (self.m - 1) / 2
    }

    /// `M·P·N_r`, the observation length.
    pub fn len(&self) -> usize {
        self.m * self.p * self.nr
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, n: i64, p: usize, r: usize) -> usize {
        (n + self.half() as i64) as usize + self.m * p + self.m * self.p * r
    }

    /// Inverse of [`index`](Self::index): `(n, p, r)`.
    pub fn split(&self, idx: usize) -> (i64, usize, usize) {
        let i = idx % self.m;
        let p = (idx / self.m) % self.p;
        let r = idx / (self.m * self.p);
        (i as i64 - self.half() as i64, p, r)
    }

    /// The recovery theory needs far fewer atoms than samples; this only
    /// warns, it never rejects.
    pub fn sparsity_warning(&self) -> Option<String> {
        let atoms = self.l + self.q;
        (atoms * 10 > self.len()).then(|| {
            format!("L + Q = {atoms} is not small compared with M·P·N_r = {}", self.len())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub tau: f64,
    pub nu: f64,
    pub beta: f64,
    pub alpha: C64,
}

impl Atom {
    pub fn new(tau: f64, nu: f64, beta: f64, alpha: C64) -> Self {
        Self { tau, nu, beta, alpha }
    }

    pub fn params(&self) -> [f64; 3] {
        [self.tau, self.nu, self.beta]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Channel3D {
    pub atoms: Vec<Atom>,
}

impl Channel3D {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.atoms.iter().enumerate() {
            if (a.alpha.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Param(format!("atom {i}: |alpha| = {} is not 1", a.alpha.norm())));
            }
            if a.params().iter().any(|&x| !(0.0..1.0).contains(&x)) {
                return Err(Error::Param(format!("atom {i}: parameters {:?} outside [0,1)", a.params())));
            }
            for (k, b) in self.atoms[..i].iter().enumerate() {
                if a.params().iter().zip(b.params()).all(|(&x, y)| wrap_dist(x, y) == 0.0) {
                    return Err(Error::Param(format!("atoms {k} and {i} coincide")));
                }
            }
        }
        Ok(())
    }

    /// Sum of `|α|`, the atomic norm of the lifted channel.
    pub fn amplitude_sum(&self) -> f64 {
        self.atoms.iter().map(|a| a.alpha.norm()).sum()
    }
}

/// Distance on the unit circle `[0, 1)`.
pub fn wrap_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

pub fn wrap01(x: f64) -> f64 {
    let w = x.rem_euclid(1.0);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceBases {
    /// `M × J`, row `n` is `t_n^H`.
    #[serde(with = "crate::io::mat")]
    pub t: Mat<C64>,
    /// `P` blocks of size `M × J`.
    #[serde(with = "crate::io::mat_vec")]
    pub d_blocks: Vec<Mat<C64>>,
    pub coherence_mu: f64,
}

impl SubspaceBases {
    pub fn new(t: Mat<C64>, d_blocks: Vec<Mat<C64>>) -> Result<Self> {
        let all = std::iter::once(&t).chain(d_blocks.iter());
        let mut mu = 0.0f64;
        for b in all {
            for j in 0..b.ncols() {
                for i in 0..b.nrows() {
                    let v = b[(i, j)];
                    if !v.re.is_finite() || !v.im.is_finite() {
                        return Err(Error::Param("non-finite basis entry".into()));
                    }
                    mu = mu.max(v.norm_sqr());
                }
            }
        }
        Ok(Self { t, d_blocks, coherence_mu: mu })
    }

    pub fn check(&self, dims: &ProblemDims) -> Result<()> {
        let ok = self.t.nrows() == dims.m
            && self.t.ncols() == dims.j
            && self.d_blocks.len() == dims.p
            && self.d_blocks.iter().all(|d| d.nrows() == dims.m && d.ncols() == dims.j);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "bases T {}x{}, {} message blocks do not match {dims:?}",
                self.t.nrows(),
                self.t.ncols(),
                self.d_blocks.len()
            )))
        }
    }

    /// The block-diagonal `D` of size `MP × PJ`.
    pub fn d_dense(&self) -> Mat<C64> {
        let (m, j) = (self.t.nrows(), self.t.ncols());
        let p = self.d_blocks.len();
        let mut d = Mat::zeros(m * p, j * p);
        for (b, blk) in self.d_blocks.iter().enumerate() {
            for c in 0..j {
                for r in 0..m {
                    d[(b * m + r, b * j + c)] = blk[(r, c)];
                }
            }
        }
        d
    }

    pub fn t_frobenius(&self) -> f64 {
        self.t.norm_l2()
    }

    pub fn d_frobenius(&self) -> f64 {
        self.d_blocks.iter().map(|d| d.squared_norm_l2()).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Which {
    Radar,
    Comms,
}

/// Borrowed sensing basis of one emitter.
#[derive(Debug, Clone, Copy)]
pub enum Sensing<'a> {
    Radar(&'a Mat<C64>),
    Comms(&'a [Mat<C64>]),
}

impl Sensing<'_> {
    /// Components of the dual polynomial: `J` for radar, `PJ` for comms.
    pub fn rows(&self, dims: &ProblemDims) -> usize {
        match self {
            Sensing::Radar(_) => dims.j,
            Sensing::Comms(_) => dims.p * dims.j,
        }
    }

    pub fn which(&self) -> Which {
        match self {
            Sensing::Radar(_) => Which::Radar,
            Sensing::Comms(_) => Which::Comms,
        }
    }
}

impl SubspaceBases {
    pub fn sensing(&self, which: Which) -> Sensing<'_> {
        match which {
            Which::Radar => Sensing::Radar(&self.t),
            Which::Comms => Sensing::Comms(&self.d_blocks),
        }
    }
}

/// `b = [1, e^{j2πσ}, …, e^{j2π(J-1)σ}]` with `σ ~ N(0, 1)`.
fn progression(j: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let sigma: f64 = rng.sample(StandardNormal);
    (0..j).map(|k| C64::cis(2.0 * PI * k as f64 * sigma)).collect()
}

/// Random representation bases; every column `t_n` (and every message row
/// vector) is a unit-modulus progression with Gaussian rate.
pub fn random_bases(dims: &ProblemDims, seed: u64) -> SubspaceBases {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let mut b = Mat::<C64>::zeros(dims.m, dims.j);
        for n in 0..dims.m {
            let col = progression(dims.j, rng);
            for (k, c) in col.into_iter().enumerate() {
                // row n of T is t_n^H
                b[(n, k)] = c.conj();
            }
        }
        b
    };
    let t = draw(&mut rng);
    let d_blocks = (0..dims.p).map(|_| draw(&mut rng)).collect();
    SubspaceBases::new(t, d_blocks).expect("finite by construction")
}

/// `w(r)` of length `M·P·N_r`.
pub fn steering_vector(r: [f64; 3], dims: &ProblemDims) -> Vec<C64> {
    let [tau, nu, beta] = r.map(wrap01);
    let n0 = dims.half() as f64;
    let a_tau: Vec<C64> = (0..dims.m).map(|i| C64::cis(2.0 * PI * (i as f64 - n0) * tau)).collect();
    let a_nu: Vec<C64> = (0..dims.p).map(|p| C64::cis(2.0 * PI * p as f64 * nu)).collect();
    let a_beta: Vec<C64> = (0..dims.nr).map(|r| C64::cis(2.0 * PI * r as f64 * beta)).collect();
    let mut w = Vec::with_capacity(dims.len());
    for b in &a_beta {
        for v in &a_nu {
            let bv = b * v;
            for t in &a_tau {
                w.push(bv * t);
            }
        }
    }
    w
}

/// Unit-norm coefficient vector with real and imaginary parts uniform on `[0, 1]`.
pub fn random_coefficients(len: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let v: Vec<C64> = (0..len).map(|_| C64::new(rng.random::<f64>(), rng.random::<f64>())).collect();
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// Draws `count` atoms uniformly in `[0,1)³` whose pairwise wrap-around
/// distance is at least `sep[axis]` on every axis, with unit-modulus
/// amplitudes of uniform phase.
pub fn random_channel(count: usize, sep: [f64; 3], rng: &mut ChaCha8Rng) -> Result<Channel3D> {
    // Sequential placement can paint itself into a corner (e.g. three atoms
    // spaced so that no fourth fits), so stalled placements start over.
    const RESTARTS: usize = 1000;
    const TRIES_PER_ATOM: usize = 2000;
    for _ in 0..RESTARTS {
        let mut atoms: Vec<Atom> = Vec::with_capacity(count);
        let mut stalled = 0;
        while atoms.len() < count && stalled < TRIES_PER_ATOM {
            let r = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            if atoms.iter().all(|a| (0..3).all(|k| wrap_dist(a.params()[k], r[k]) >= sep[k])) {
                let alpha = C64::cis(2.0 * PI * rng.random::<f64>());
                atoms.push(Atom::new(r[0], r[1], r[2], alpha));
                stalled = 0;
            } else {
                stalled += 1;
            }
        }
        if atoms.len() == count {
            return Ok(Channel3D::new(atoms));
        }
    }
    Err(Error::Param(format!("cannot place {count} atoms with separations {sep:?}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub u: Vec<C64>,
    pub v: Vec<C64>,
    #[serde(with = "crate::io::mat")]
    pub x_r: Mat<C64>,
    #[serde(with = "crate::io::mat")]
    pub x_c: Mat<C64>,
}

impl GroundTruth {
    pub fn new(radar: &Channel3D, comms: &Channel3D, u: Vec<C64>, v: Vec<C64>, dims: &ProblemDims) -> Self {
        let x_r = lifted(radar, &u, dims);
        let x_c = lifted(comms, &v, dims);
        Self { u, v, x_r, x_c }
    }
}

/// `Σ α c w(r)^H` as a `len(c) × M·P·N_r` matrix.
pub fn lifted(ch: &Channel3D, coef: &[C64], dims: &ProblemDims) -> Mat<C64> {
    let mut x = Mat::<C64>::zeros(coef.len(), dims.len());
    for a in &ch.atoms {
        let w = steering_vector(a.params(), dims);
        for (col, wc) in w.iter().enumerate() {
            let s = a.alpha * wc.conj();
            for (row, c) in coef.iter().enumerate() {
                x[(row, col)] += s * c;
            }
        }
    }
    x
}

/// Per-channel clean contributions `(y_r, y_c)` synthesized directly from the
/// atoms, without going through the lifted matrices.
pub fn synth_components(
    radar: &Channel3D,
    comms: &Channel3D,
    bases: &SubspaceBases,
    u: &[C64],
    v: &[C64],
    dims: &ProblemDims,
) -> Result<(Vec<C64>, Vec<C64>)> {
    bases.check(dims)?;
    if u.len() != dims.j || v.len() != dims.p * dims.j {
        return Err(Error::Shape(format!("u has {} entries, v has {}; expected J = {} and PJ", u.len(), v.len(), dims.j)));
    }
    let s: Vec<C64> = (0..dims.m).map(|n| (0..dims.j).map(|k| bases.t[(n, k)] * u[k]).sum()).collect();
    let g: Vec<Vec<C64>> = (0..dims.p)
        .map(|p| {
            let d = &bases.d_blocks[p];
            (0..dims.m).map(|n| (0..dims.j).map(|k| d[(n, k)] * v[p * dims.j + k]).sum()).collect()
        })
        .collect();
    let mut yr = vec![C64::new(0.0, 0.0); dims.len()];
    let mut yc = vec![C64::new(0.0, 0.0); dims.len()];
    let accumulate = |y: &mut [C64], a: &Atom, sig: &dyn Fn(usize, usize) -> C64| {
        let w = steering_vector(a.params(), dims);
        for (idx, wv) in w.iter().enumerate() {
            let i = idx % dims.m;
            let p = (idx / dims.m) % dims.p;
            y[idx] += a.alpha * sig(i, p) * wv.conj();
        }
    };
    for a in &radar.atoms {
        accumulate(&mut yr, a, &|i, _| s[i]);
    }
    for a in &comms.atoms {
        accumulate(&mut yc, a, &|i, p| g[p][i]);
    }
    Ok((yr, yc))
}

/// Clean observation `y = Σ α s_n e^{-j2π(·)} + Σ α [g_p]_n e^{-j2π(·)}`.
pub fn synth_observation(
    radar: &Channel3D,
    comms: &Channel3D,
    bases: &SubspaceBases,
    u: &[C64],
    v: &[C64],
    dims: &ProblemDims,
) -> Result<Vec<C64>> {
    let (yr, yc) = synth_components(radar, comms, bases, u, v, dims)?;
    Ok(yr.iter().zip(&yc).map(|(a, b)| a + b).collect())
}

fn check_cols(x: &Mat<C64>, rows: usize, dims: &ProblemDims, what: &str) -> Result<()> {
    if x.nrows() != rows || x.ncols() != dims.len() {
        return Err(Error::Shape(format!(
            "{what} is {}x{}, expected {rows}x{}",
            x.nrows(),
            x.ncols(),
            dims.len()
        )));
    }
    Ok(())
}

/// `[B_r(X)]_m̃ = t_n^H X[:, m̃]`.
pub fn apply_br(x: &Mat<C64>, bases: &SubspaceBases, dims: &ProblemDims) -> Result<Vec<C64>> {
    check_cols(x, dims.j, dims, "X_r")?;
    Ok((0..dims.len())
        .map(|idx| {
            let n = idx % dims.m;
            (0..dims.j).map(|k| bases.t[(n, k)] * x[(k, idx)]).sum()
        })
        .collect())
}

/// `[B_c(X)]_m̃ = d_{n,p}^H X[:, m̃]`, only the `p`-th `J`-row slab of `X` is read.
pub fn apply_bc(x: &Mat<C64>, bases: &SubspaceBases, dims: &ProblemDims) -> Result<Vec<C64>> {
    check_cols(x, dims.p * dims.j, dims, "X_c")?;
    Ok((0..dims.len())
        .map(|idx| {
            let n = idx % dims.m;
            let p = (idx / dims.m) % dims.p;
            let d = &bases.d_blocks[p];
            (0..dims.j).map(|k| d[(n, k)] * x[(p * dims.j + k, idx)]).sum()
        })
        .collect())
}

fn check_len(q: &[C64], dims: &ProblemDims) -> Result<()> {
    if q.len() != dims.len() {
        return Err(Error::Shape(format!("vector has length {}, expected {}", q.len(), dims.len())));
    }
    Ok(())
}

/// `B_r^*(q)`: column `m̃` is `q_m̃ t_n`.
pub fn adjoint_br(q: &[C64], bases: &SubspaceBases, dims: &ProblemDims) -> Result<Mat<C64>> {
    check_len(q, dims)?;
    Ok(Mat::from_fn(dims.j, dims.len(), |k, idx| q[idx] * bases.t[(idx % dims.m, k)].conj()))
}

/// `B_c^*(q)`: column `m̃` is `q_m̃` times `d_{n,p}` placed in slab `p`.
pub fn adjoint_bc(q: &[C64], bases: &SubspaceBases, dims: &ProblemDims) -> Result<Mat<C64>> {
    check_len(q, dims)?;
    let j = dims.j;
    Ok(Mat::from_fn(dims.p * j, dims.len(), |row, idx| {
        let p = (idx / dims.m) % dims.p;
        if row / j == p {
            q[idx] * bases.d_blocks[p][(idx % dims.m, row % j)].conj()
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    /// Standard deviation of the complex additive noise (total per-entry variance `σ²`).
    pub sigma_noise: f64,
    /// Standard deviation of the per-antenna gain and phase errors.
    pub sigma_gainphase: f64,
    /// Declared bound on `‖e‖₂`.
    pub epsilon_e: f64,
}

impl Default for ErrorModel {
    fn default() -> Self {
        Self { sigma_noise: 0.0, sigma_gainphase: 0.0, epsilon_e: 0.0 }
    }
}

impl ErrorModel {
    pub fn validate(&self) -> Result<()> {
        if [self.sigma_noise, self.sigma_gainphase, self.epsilon_e].iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::Param(format!("error model fields must be >= 0: {self:?}")));
        }
        Ok(())
    }

    /// A high-probability bound on `‖e‖₂` for gain/phase errors of standard
    /// deviation `sigma` on `nr` antennas: `e ≈ n + jφ` has `2N_r` Gaussian
    /// components, so `σ(√(2N_r) + 3)` is exceeded with negligible probability.
    pub fn default_epsilon(sigma: f64, nr: usize) -> f64 {
        sigma * ((2.0 * nr as f64).sqrt() + 3.0)
    }
}

/// Per-entry noise variance for a target SNR: the expected total noise
/// energy `len·σ²` equals `‖y‖²/10^(SNR/10)`.
pub fn noise_variance_for_snr(y: &[C64], snr_db: f64) -> f64 {
    let energy: f64 = y.iter().map(|v| v.norm_sqr()).sum();
    energy / 10f64.powf(snr_db / 10.0) / y.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRealization {
    pub y: Vec<C64>,
    /// `e_m = (1 + n_m) e^{jφ_m} - 1` per antenna.
    pub e: Vec<C64>,
    pub noise: Vec<C64>,
    pub e_norm: f64,
    /// Set when the realized `‖e‖₂` exceeds the declared bound.
    pub exceeds_bound: bool,
}

/// Applies the per-antenna multiplicative error to every `M·P` entry of that
/// antenna and adds circular complex Gaussian noise.
pub fn apply_error_model(clean: &[C64], dims: &ProblemDims, err: &ErrorModel, seed: u64) -> Result<ErrorRealization> {
    check_len(clean, dims)?;
    err.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gp = Normal::new(0.0, err.sigma_gainphase).map_err(|e| Error::Param(e.to_string()))?;
    let e: Vec<C64> = (0..dims.nr)
        .map(|_| {
            let gain = gp.sample(&mut rng);
            let phase = gp.sample(&mut rng);
            C64::cis(phase) * (1.0 + gain) - 1.0
        })
        .collect();
    let ns = Normal::new(0.0, err.sigma_noise / 2f64.sqrt()).map_err(|e| Error::Param(e.to_string()))?;
    let noise: Vec<C64> = (0..clean.len()).map(|_| C64::new(ns.sample(&mut rng), ns.sample(&mut rng))).collect();
    let mp = dims.m * dims.p;
    let y = clean.iter().enumerate().map(|(i, c)| c * (1.0 + e[i / mp]) + noise[i]).collect();
    let e_norm = norm(&e);
    Ok(ErrorRealization { y, e, noise, e_norm, exceeds_bound: e_norm > err.epsilon_e })
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨a, b⟩ = b^H a`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// `⟨A, B⟩ = Tr(B^H A)`.
pub fn inner_mat(a: &Mat<C64>, b: &Mat<C64>) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)] * b[(i, j)].conj();
        }
    }
    s
}

/// A full synthetic scene: channels, bases, coefficients and observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub dims: ProblemDims,
    pub radar: Channel3D,
    pub comms: Channel3D,
    pub bases: SubspaceBases,
    pub u: Vec<C64>,
    pub v: Vec<C64>,
}

impl Scene {
    /// Draws bases, channels and coefficients from independent streams of one seed.
    pub fn random(dims: &ProblemDims, sep: [f64; 3], seed: u64) -> Result<Self> {
        dims.validate()?;
        let bases = random_bases(dims, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let radar = random_channel(dims.l, sep, &mut rng)?;
        let comms = random_channel(dims.q, sep, &mut rng)?;
        let u = random_coefficients(dims.j, &mut rng);
        let v = random_coefficients(dims.p * dims.j, &mut rng);
        Ok(Self { dims: *dims, radar, comms, bases, u, v })
    }

    pub fn observation(&self) -> Result<Vec<C64>> {
        synth_observation(&self.radar, &self.comms, &self.bases, &self.u, &self.v, &self.dims)
    }

    pub fn truth(&self) -> GroundTruth {
        GroundTruth::new(&self.radar, &self.comms, self.u.clone(), self.v.clone(), &self.dims)
    }
}
