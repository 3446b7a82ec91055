//! Reference machinery for testing the first-order solver.
//!
//! [`barrier_solve`] is a dense primal log-barrier interior-point method that
//! works on the real symmetric embedding of every Hermitian block and takes
//! damped Newton steps with an equality-constrained KKT system. It shares no
//! code with the ADMM path beyond the problem container and the embedding.
//!
//! [`random_instance`] draws small problems that are strictly feasible on
//! both sides, so an optimum exists and is attained.

use faer::prelude::Solve;
use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdpsolve::{hermitian_to_real_embedding, EqConstraint, PsdBlock, SdpProblem, Sense};

#[derive(Debug, Clone)]
pub struct BarrierResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub newton_steps: usize,
}

struct Dense {
    // per block: real-embedded constant and per-variable coefficient matrices
    c: Vec<Mat<f64>>,
    a: Vec<Vec<Mat<f64>>>,
    e: Mat<f64>,
    b: Vec<f64>,
    cost: Vec<f64>,
}

fn embed_block(blk: &PsdBlock, n_vars: usize) -> (Mat<f64>, Vec<Mat<f64>>) {
    let n = blk.size;
    let mut c = Mat::<C64>::zeros(n, n);
    let mut a = vec![Mat::<C64>::zeros(n, n); n_vars];
    let put = |m: &mut Mat<C64>, r: usize, col: usize, v: C64| {
        if r == col {
            m[(r, r)] += C64::new(v.re, 0.0);
        } else {
            m[(r, col)] += v;
            m[(col, r)] += v.conj();
        }
    };
    for e in &blk.constant {
        put(&mut c, e.row, e.col, e.coef);
    }
    for t in &blk.terms {
        put(&mut a[t.var], t.row, t.col, t.coef);
    }
    (hermitian_to_real_embedding(c.as_ref()), a.iter().map(|m| hermitian_to_real_embedding(m.as_ref())).collect())
}

impl Dense {
    fn new(p: &SdpProblem) -> Self {
        let mut c = Vec::new();
        let mut a = Vec::new();
        for blk in &p.blocks {
            let (ck, ak) = embed_block(blk, p.n_vars);
            c.push(ck);
            a.push(ak);
        }
        let m = p.eqs.len();
        let mut e = Mat::<f64>::zeros(m, p.n_vars);
        let mut b = vec![0.0; m];
        for (i, eq) in p.eqs.iter().enumerate() {
            for &(v, coef) in &eq.terms {
                e[(i, v)] += coef;
            }
            b[i] = eq.rhs;
        }
        let cost = match p.sense {
            Sense::Minimize => p.objective.clone(),
            Sense::Maximize => p.objective.iter().map(|v| -v).collect(),
        };
        Self { c, a, e, b, cost }
    }

    fn block_value(&self, k: usize, x: &[f64]) -> Mat<f64> {
        let mut f = self.c[k].clone();
        for (v, av) in self.a[k].iter().enumerate() {
            if x[v] != 0.0 {
                f += av * faer::Scale(x[v]);
            }
        }
        f
    }
}

/// `Σ log λ_i(F)` if `F ≻ 0`.
fn logdet_pd(f: MatRef<'_, f64>) -> Option<f64> {
    let llt = f.llt(Side::Lower).ok()?;
    let l = llt.L();
    let mut s = 0.0;
    for i in 0..f.nrows() {
        let d = l[(i, i)];
        if !(d > 0.0) {
            return None;
        }
        s += 2.0 * d.ln();
    }
    Some(s)
}

fn inverse_pd(f: MatRef<'_, f64>) -> Mat<f64> {
    let n = f.nrows();
    let llt = f.llt(Side::Lower).expect("positive definite");
    llt.solve(Mat::<f64>::identity(n, n))
}

fn trace_prod(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

/// Minimizes `t c^T x - Σ logdet F_k(x)` over `E x = b` from a strictly
/// feasible `x`, by damped Newton steps.
fn centering(d: &Dense, cost: &[f64], x: &mut [f64], t: f64, steps: &mut usize) {
    let nv = x.len();
    let m = d.b.len();
    let phi = |x: &[f64]| -> Option<f64> {
        let mut v = t * cost.iter().zip(x).map(|(c, x)| c * x).sum::<f64>();
        for k in 0..d.c.len() {
            v -= logdet_pd(d.block_value(k, x).as_ref())?;
        }
        Some(v)
    };
    for _ in 0..200 {
        *steps += 1;
        let mut g: Vec<f64> = cost.iter().map(|c| t * c).collect();
        let mut h = Mat::<f64>::zeros(nv, nv);
        for k in 0..d.c.len() {
            let finv = inverse_pd(d.block_value(k, x).as_ref());
            let fa: Vec<Mat<f64>> = d.a[k].iter().map(|av| &finv * av).collect();
            for v in 0..nv {
                g[v] -= (0..fa[v].nrows()).map(|i| fa[v][(i, i)]).sum::<f64>();
                for w in v..nv {
                    let val = trace_prod(fa[v].as_ref(), fa[w].as_ref());
                    h[(v, w)] += val;
                    if w != v {
                        h[(w, v)] += val;
                    }
                }
            }
        }
        // KKT: [[H, E^T], [E, 0]] [dx; y] = [-g; 0]
        let mut kkt = Mat::<f64>::zeros(nv + m, nv + m);
        let mut rhs = Mat::<f64>::zeros(nv + m, 1);
        for i in 0..nv {
            for j in 0..nv {
                kkt[(i, j)] = h[(i, j)];
            }
            rhs[(i, 0)] = -g[i];
        }
        for r in 0..m {
            for v in 0..nv {
                kkt[(nv + r, v)] = d.e[(r, v)];
                kkt[(v, nv + r)] = d.e[(r, v)];
            }
        }
        let sol = kkt.partial_piv_lu().solve(&rhs);
        let dx: Vec<f64> = (0..nv).map(|i| sol[(i, 0)]).collect();
        let dec: f64 = dx.iter().zip(&g).map(|(a, b)| -a * b).sum();
        if dec / 2.0 < 1e-12 {
            return;
        }
        let f0 = phi(x).expect("iterate stays interior");
        let mut s = 1.0;
        loop {
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(x, d)| x + s * d).collect();
            if let Some(f1) = phi(&cand) {
                if f1 <= f0 - 0.25 * s * dec {
                    x.copy_from_slice(&cand);
                    break;
                }
            }
            s *= 0.5;
            if s < 1e-14 {
                return;
            }
        }
    }
}

/// Solves a small problem to high accuracy. Panics if the problem has no
/// strictly feasible point.
pub fn barrier_solve(p: &SdpProblem) -> BarrierResult {
    let d = Dense::new(p);
    let nv = p.n_vars;
    let m = d.b.len();
    let mut steps = 0;

    // least-norm point on the affine set
    let mut x = vec![0.0; nv];
    if m > 0 {
        let eet = &d.e * d.e.transpose();
        let bcol = Mat::from_fn(m, 1, |i, _| d.b[i]);
        let y = eet.partial_piv_lu().solve(&bcol);
        let xc = d.e.transpose() * &y;
        for v in 0..nv {
            x[v] = xc[(v, 0)];
        }
    }

    // phase I: append s with F_k(x) + s I ⪰ 0 and minimize s until s < 0
    let min_eig = |x: &[f64]| -> f64 {
        (0..d.c.len())
            .map(|k| {
                let f = d.block_value(k, x);
                let evd = f.self_adjoint_eigen(Side::Lower).unwrap();
                (0..f.nrows()).map(|i| evd.S()[i]).fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    };
    if min_eig(&x) <= 1e-9 {
        let mut a1 = d.a.clone();
        for (k, ak) in a1.iter_mut().enumerate() {
            ak.push(Mat::<f64>::identity(d.c[k].nrows(), d.c[k].nrows()));
        }
        let mut e1 = Mat::<f64>::zeros(m, nv + 1);
        for i in 0..m {
            for v in 0..nv {
                e1[(i, v)] = d.e[(i, v)];
            }
        }
        let mut cost1 = vec![0.0; nv + 1];
        cost1[nv] = 1.0;
        let d1 = Dense { c: d.c.clone(), a: a1, e: e1, b: d.b.clone(), cost: cost1.clone() };
        let mut x1 = x.clone();
        x1.push(1.0 - min_eig(&x));
        let mut t = 1.0;
        while x1[nv] > -1e-3 {
            centering(&d1, &cost1, &mut x1, t, &mut steps);
            t *= 4.0;
            assert!(t < 1e12, "no strictly feasible point");
        }
        x = x1[..nv].to_vec();
    }

    // phase II
    let nu: f64 = d.c.iter().map(|c| c.nrows() as f64).sum();
    let mut t = 1.0;
    loop {
        centering(&d, &d.cost, &mut x, t, &mut steps);
        if nu / t < 1e-10 {
            break;
        }
        t *= 8.0;
    }
    BarrierResult { objective: p.objective_value(&x), x, newton_steps: steps }
}

fn random_hermitian_entries(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for r in 0..n {
        for c in r..n {
            if rng.random::<f64>() < density {
                let im = if r == c { 0.0 } else { rng.random_range(-1.0..1.0) };
                out.push((r, c, C64::new(rng.random_range(-1.0..1.0), im)));
            }
        }
    }
    out
}

fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> Mat<C64> {
    let b = Mat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let mut s = &b * b.adjoint();
    for i in 0..n {
        s[(i, i)] += C64::new(0.3, 0.0);
    }
    s
}

/// A random problem with strictly feasible primal and dual points.
pub fn random_instance(seed: u64) -> SdpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_vars = rng.random_range(2..=6);
    let n_blocks = rng.random_range(1..=3);
    let n_eqs = rng.random_range(0..=(n_vars / 2).min(2));
    let mut p = SdpProblem::new(format!("random instance {seed}"), Sense::Minimize);
    p.add_vars("x", n_vars);
    let x0: Vec<f64> = (0..n_vars).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut cost = vec![0.0; n_vars];
    for k in 0..n_blocks {
        let n = rng.random_range(1..=4);
        let mut blk = PsdBlock::new(format!("B{k}"), n);
        for v in 0..n_vars {
            for (r, c, a) in random_hermitian_entries(&mut rng, n, 0.7) {
                blk.add_term(v, r, c, a);
            }
        }
        // C = S0 - Σ x0_v A_v with S0 ≻ 0
        let s0 = random_pd(&mut rng, n);
        let ax0 = blk.value(&x0);
        for r in 0..n {
            for c in r..n {
                let v = s0[(r, c)] - ax0[(r, c)];
                let v = if r == c { C64::new(v.re, 0.0) } else { v };
                blk.add_constant(r, c, v);
            }
        }
        // c += A^*(Z0) with Z0 ≻ 0
        let z0 = random_pd(&mut rng, n);
        for t in &blk.terms {
            let zv = z0[(t.row, t.col)];
            let w = if t.row == t.col { 1.0 } else { 2.0 };
            cost[t.var] += w * (t.coef.re * zv.re + t.coef.im * zv.im);
        }
        p.blocks.push(blk);
    }
    for i in 0..n_eqs {
        let terms: Vec<(usize, f64)> = (0..n_vars).map(|v| (v, rng.random_range(-1.0..1.0))).collect();
        let rhs = terms.iter().map(|&(v, a)| a * x0[v]).sum();
        let lam: f64 = rng.random_range(-1.0..1.0);
        for &(v, a) in &terms {
            cost[v] += lam * a;
        }
        p.eqs.push(EqConstraint { label: format!("e{i}"), terms, rhs });
    }
    p.objective = cost;
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_boundary() {
        // maximize q s.t. [[1, q], [q, 1]] ⪰ 0
        let mut p = SdpProblem::new("box", Sense::Maximize);
        let q = p.add_vars("q", 1);
        p.objective[q] = 1.0;
        let mut b = PsdBlock::new("B", 2);
        b.add_constant(0, 0, C64::new(1.0, 0.0));
        b.add_constant(1, 1, C64::new(1.0, 0.0));
        b.add_term(q, 0, 1, C64::new(1.0, 0.0));
        p.blocks.push(b);
        let r = barrier_solve(&p);
        assert!((r.objective - 1.0).abs() < 1e-8, "{}", r.objective);
    }

    #[test]
    fn random_instances_are_solved_to_stationarity() {
        for seed in 0..5 {
            let p = random_instance(seed);
            let r = barrier_solve(&p);
            assert!(r.objective.is_finite());
            for e in p.eq_residuals(&r.x) {
                assert!(e.abs() < 1e-8);
            }
        }
    }
}
