//! Per-block cone splitting `V = S - μZ` with `S, Z ⪰ 0`, `⟨S, Z⟩ = 0`.
//!
//! Near convergence one side of the spectrum of `V` has low rank (the
//! multiplier rank). Large blocks then compute only that side with a
//! warm-started block LOBPCG and reassemble `S` or `Z` from it; every result
//! is checked by residual norms and falls back to a full eigendecomposition.

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cone::{frob_sq, hermitian_eigen, reassemble};
use crate::error::Result;

/// Full eigendecompositions are forced this often to re-anchor the partial path.
const FULL_EVERY: usize = 50;
const MAX_LOBPCG_ITERS: usize = 60;

pub(crate) struct Projector {
    size: usize,
    partial: bool,
    /// Which side of the spectrum was smaller at the last call (true = negative).
    neg_side: bool,
    /// Last captured eigenvectors of the small side (warm start).
    basis: Option<Mat<C64>>,
    calls: usize,
    rng: ChaCha8Rng,
    pub(crate) force_full: bool,
}

impl Projector {
    pub fn new(size: usize, partial: bool) -> Self {
        Self {
            size,
            partial,
            neg_side: true,
            basis: None,
            calls: 0,
            rng: ChaCha8Rng::seed_from_u64(0x5eed ^ size as u64),
            force_full: false,
        }
    }

    /// Returns `(S, Z) = (Π₊(V), Π₊(-V)/μ)`.
    pub fn split(&mut self, v: Mat<C64>, mu: f64) -> Result<(Mat<C64>, Mat<C64>)> {
        self.calls += 1;
        let full = !self.partial || self.force_full || self.calls % FULL_EVERY == 1;
        self.force_full = false;
        if !full {
            if let Some(out) = self.try_partial(&v, mu) {
                return Ok(out);
            }
        }
        self.full(v, mu)
    }

    fn full(&mut self, v: Mat<C64>, mu: f64) -> Result<(Mat<C64>, Mat<C64>)> {
        let (vals, vecs) = hermitian_eigen(v.as_ref())?;
        let n_neg = vals.iter().filter(|&&l| l < 0.0).count();
        let n = self.size;
        self.neg_side = n_neg <= n - n_neg;
        if self.partial {
            let idx: Vec<usize> = if self.neg_side { (0..n_neg).collect() } else { (n_neg..n).rev().collect() };
            self.basis = (!idx.is_empty()).then(|| Mat::from_fn(n, idx.len(), |i, j| vecs[(i, idx[j])]));
        }
        Ok(self.assemble_from(&v, &vals, vecs.as_ref(), mu))
    }

    /// Builds `(S, Z)` from eigenpairs of the small side only.
    fn assemble_from(&self, v: &Mat<C64>, vals: &[f64], vecs: MatRef<'_, C64>, mu: f64) -> (Mat<C64>, Mat<C64>) {
        if self.neg_side {
            // N = U_- Λ_- U_-^H, S = V - N, Z = -N / μ
            let neg = reassemble(vals, vecs, |l| if l < 0.0 { l } else { 0.0 });
            let s = v - &neg;
            let z = &neg * faer::Scale(C64::from(-1.0 / mu));
            (s, z)
        } else {
            let s = reassemble(vals, vecs, |l| if l > 0.0 { l } else { 0.0 });
            let z = (&s - v) * faer::Scale(C64::from(1.0 / mu));
            (s, z)
        }
    }

    fn try_partial(&mut self, v: &Mat<C64>, mu: f64) -> Option<(Mat<C64>, Mat<C64>)> {
        let n = self.size;
        let sign = if self.neg_side { 1.0 } else { -1.0 };
        // smallest eigenpairs of A = sign * V
        let prev = self.basis.as_ref().map_or(0, |b| b.ncols());
        let mut k = prev + (prev / 2).max(6);
        let vnorm = frob_sq(v.as_ref()).sqrt();
        let tol = 1e-11 * vnorm.max(1e-300);
        loop {
            if 3 * k > n {
                return None;
            }
            let x0 = self.start_block(k);
            let (vals, vecs) = lobpcg(v, sign, x0, tol)?;
            let wanted = vals.iter().filter(|&&l| l < 0.0).count();
            if wanted == k {
                // every Ritz value on the wanted side: enlarge and retry
                self.basis = Some(vecs);
                k *= 2;
                continue;
            }
            self.basis = (wanted > 0).then(|| vecs.subcols(0, wanted).to_owned());
            let true_vals: Vec<f64> = vals.iter().map(|l| sign * l).collect();
            return Some(self.assemble_from(v, &true_vals, vecs.as_ref(), mu));
        }
    }

    fn start_block(&mut self, k: usize) -> Mat<C64> {
        let n = self.size;
        let mut x = Mat::<C64>::zeros(n, k);
        let have = self.basis.as_ref().map_or(0, |b| b.ncols().min(k));
        if let Some(b) = &self.basis {
            for j in 0..have {
                for i in 0..n {
                    x[(i, j)] = b[(i, j)];
                }
            }
        }
        for j in have..k {
            for i in 0..n {
                x[(i, j)] = C64::new(self.rng.random_range(-1.0..1.0), self.rng.random_range(-1.0..1.0));
            }
        }
        x
    }
}

/// Orthonormalizes the columns of `b` (in place of returning a transform),
/// dropping directions whose singular value falls below `drop` relative to the
/// largest. Returns the transform `T` with `b_new = b T`.
fn svqb(b: MatRef<'_, C64>, drop: f64) -> Option<Mat<C64>> {
    let k = b.ncols();
    if k == 0 {
        return Some(Mat::zeros(0, 0));
    }
    let g = b.adjoint() * b;
    let (vals, vecs) = hermitian_eigen(g.as_ref()).ok()?;
    let top = vals.iter().cloned().fold(0.0, f64::max);
    if !(top > 0.0) {
        return None;
    }
    let keep: Vec<usize> = (0..k).filter(|&i| vals[i] > drop * drop * top).collect();
    Some(Mat::from_fn(k, keep.len(), |i, j| vecs[(i, keep[j])] * (1.0 / vals[keep[j]].sqrt())))
}

fn hcat(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Mat<C64> {
    let (n, ka, kb) = (a.nrows(), a.ncols(), b.ncols());
    Mat::from_fn(n, ka + kb, |i, j| if j < ka { a[(i, j)] } else { b[(i, j - ka)] })
}

/// Removes the span of orthonormal `x` from `b`, tracking `A b` alongside.
fn deflate(x: MatRef<'_, C64>, ax: MatRef<'_, C64>, b: &mut Mat<C64>, ab: &mut Mat<C64>) {
    let c = x.adjoint() * b.as_ref();
    *b -= x * &c;
    *ab -= ax * &c;
}

/// Smallest `k = x0.ncols()` eigenpairs of `sign * V` by LOBPCG. Returns
/// ascending Ritz values and vectors once every pair with negative Ritz value
/// and the first nonnegative one have residual at most `tol`.
fn lobpcg(v: &Mat<C64>, sign: f64, x0: Mat<C64>, tol: f64) -> Option<(Vec<f64>, Mat<C64>)> {
    let apply = |m: MatRef<'_, C64>| -> Mat<C64> { (v * m) * faer::Scale(C64::from(sign)) };
    let k = x0.ncols();
    let t = svqb(x0.as_ref(), 1e-10)?;
    if t.ncols() < k {
        return None;
    }
    let mut x = &x0 * &t;
    let mut ax = apply(x.as_ref());
    // initial Rayleigh-Ritz
    let h = x.adjoint() * &ax;
    let (mut theta, c) = hermitian_eigen(h.as_ref()).ok()?;
    x = &x * &c;
    ax = &ax * &c;
    let mut p: Option<(Mat<C64>, Mat<C64>)> = None;

    for it in 0..MAX_LOBPCG_ITERS {
        if it % 8 == 7 {
            // refresh the tracked product to limit drift
            ax = apply(x.as_ref());
        }
        let r = Mat::from_fn(x.nrows(), k, |i, j| ax[(i, j)] - x[(i, j)] * theta[j]);
        let res: Vec<f64> = (0..k).map(|j| r.col(j).norm_l2()).collect();
        let Some(guard) = theta.iter().position(|&l| l >= 0.0) else {
            // Ritz values only decrease: all k wanted, caller enlarges the block
            return Some((theta, x));
        };
        // The guard vector is never used; it only has to sit clearly on the
        // other side of zero.
        let guard_ok = res[guard] <= tol || theta[guard] >= 4.0 * res[guard];
        if guard_ok && (0..guard).all(|j| res[j] <= tol) {
            let need = guard;
            // confirm with an explicit product
            let ax_true = apply(x.as_ref());
            let ok = (0..need).all(|j| {
                let mut s = 0.0;
                for i in 0..x.nrows() {
                    s += (ax_true[(i, j)] - x[(i, j)] * theta[j]).norm_sqr();
                }
                s.sqrt() <= 2.0 * tol
            });
            if ok {
                return Some((theta, x));
            }
            ax = ax_true;
            continue;
        }
        // search directions: residuals of unconverged pairs
        let active: Vec<usize> = (0..k).filter(|&j| res[j] > tol * 0.1).collect();
        let mut w = Mat::from_fn(x.nrows(), active.len(), |i, j| r[(i, active[j])]);
        let mut aw = apply(w.as_ref());
        deflate(x.as_ref(), ax.as_ref(), &mut w, &mut aw);
        let (mut b, mut ab) = match p.take() {
            Some((pp, app)) => (hcat(w.as_ref(), pp.as_ref()), hcat(aw.as_ref(), app.as_ref())),
            None => (w, aw),
        };
        deflate(x.as_ref(), ax.as_ref(), &mut b, &mut ab);
        // two passes for orthogonality
        for _ in 0..2 {
            let tr = svqb(b.as_ref(), 1e-8)?;
            b = &b * &tr;
            ab = &ab * &tr;
            deflate(x.as_ref(), ax.as_ref(), &mut b, &mut ab);
        }
        let kb = b.ncols();
        let s = hcat(x.as_ref(), b.as_ref());
        let as_ = hcat(ax.as_ref(), ab.as_ref());
        let h = s.adjoint() * &as_;
        let h = crate::cone::hermitian_part(h.as_ref());
        let (vals, c) = hermitian_eigen(h.as_ref()).ok()?;
        let ck = c.subcols(0, k);
        let x_new = &s * ck;
        let ax_new = &as_ * ck;
        // new P: the component of the update outside the old X
        let cb = ck.subrows(k, kb);
        let pn = &b * cb;
        let apn = &ab * cb;
        p = Some((pn, apn));
        x = x_new;
        ax = ax_new;
        theta = vals[..k].to_vec();
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> Mat<C64> {
        let a = Mat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let h = crate::cone::hermitian_part(a.as_ref());
        hermitian_eigen(h.as_ref()).unwrap().1
    }

    fn with_spectrum(u: &Mat<C64>, vals: &[f64]) -> Mat<C64> {
        reassemble(vals, u.as_ref(), |l| l)
    }

    fn max_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
        frob_sq((a - b).as_ref()).sqrt()
    }

    #[test]
    fn partial_matches_full_on_low_rank_sides() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 120;
        let u = random_unitary(n, &mut rng);
        for (n_neg, mu) in [(0usize, 1.0), (3, 0.5), (10, 2.0), (n - 5, 1.0)] {
            let vals: Vec<f64> = (0..n).map(|i| if i < n_neg { -1.0 - i as f64 * 0.1 } else { 0.01 + i as f64 * 0.02 }).collect();
            let v = with_spectrum(&u, &vals);
            let mut full = Projector::new(n, false);
            let (s_ref, z_ref) = full.split(v.clone(), mu).unwrap();
            let mut part = Projector::new(n, true);
            // first call is always full; perturb for the partial calls
            let _ = part.split(v.clone(), mu).unwrap();
            let (s, z) = part.try_partial(&v, mu).expect("partial path");
            assert!(max_diff(&s, &s_ref) < 1e-8, "n_neg={n_neg}");
            assert!(max_diff(&z, &z_ref) < 1e-8, "n_neg={n_neg}");
        }
    }

    #[test]
    fn partial_from_cold_start_finds_all_negatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 150;
        let u = random_unitary(n, &mut rng);
        let vals: Vec<f64> = (0..n).map(|i| if i < 13 { -2.0 + i as f64 * 0.1 } else { i as f64 * 0.01 }).collect();
        let v = with_spectrum(&u, &vals);
        let mut part = Projector::new(n, true);
        let (s, z) = part.try_partial(&v, 1.0).expect("partial path");
        let mut full = Projector::new(n, false);
        let (s_ref, z_ref) = full.split(v, 1.0).unwrap();
        assert!(max_diff(&s, &s_ref) < 1e-8);
        assert!(max_diff(&z, &z_ref) < 1e-8);
    }
}
