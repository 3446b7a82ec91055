//! Compiled, scaled form of an [`SdpProblem`]'s affine maps.

use faer::sparse::Triplet;
use faer::Mat;
use num_complex::Complex64 as C64;

use crate::problem::SdpProblem;

/// One block's map `x -> C + Σ x_v A_v`, grouped by upper-triangle position.
pub(crate) struct BlockOp {
    pub size: usize,
    pub constant: Vec<(usize, usize, C64)>,
    pub pos: Vec<(usize, usize)>,
    pub ptr: Vec<usize>,
    pub vars: Vec<usize>,
    pub coefs: Vec<C64>,
}

pub(crate) struct Operator {
    pub n_vars: usize,
    pub blocks: Vec<BlockOp>,
    pub eq_ptr: Vec<usize>,
    pub eq_vars: Vec<usize>,
    pub eq_coefs: Vec<f64>,
    pub eq_rhs: Vec<f64>,
}

/// Diagonal scalings: decisions `x = var ⊙ x̃`, blocks `S̃_k = block_k S_k`,
/// equality rows multiplied by `eq_i`, objective multiplied by `obj`.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    pub var: Vec<f64>,
    pub block: Vec<f64>,
    pub eq: Vec<f64>,
    pub obj: f64,
}

impl Scaling {
    pub fn identity(p: &SdpProblem) -> Self {
        Self { var: vec![1.0; p.n_vars], block: vec![1.0; p.blocks.len()], eq: vec![1.0; p.eqs.len()], obj: 1.0 }
    }

    /// A few rounds of block-wise Ruiz equilibration (infinity norms).
    pub fn equilibrate(p: &SdpProblem, rounds: usize) -> Self {
        let mut s = Self::identity(p);
        for _ in 0..rounds {
            let mut col = vec![0.0f64; p.n_vars];
            let mut blk = vec![0.0f64; p.blocks.len()];
            let mut row = vec![0.0f64; p.eqs.len()];
            for (k, b) in p.blocks.iter().enumerate() {
                for t in &b.terms {
                    let a = t.coef.norm() * s.var[t.var] * s.block[k];
                    col[t.var] = col[t.var].max(a);
                    blk[k] = blk[k].max(a);
                }
            }
            for (i, e) in p.eqs.iter().enumerate() {
                for &(v, a) in &e.terms {
                    let a = a.abs() * s.var[v] * s.eq[i];
                    col[v] = col[v].max(a);
                    row[i] = row[i].max(a);
                }
            }
            let fix = |x: f64| if x > 0.0 { 1.0 / x.sqrt() } else { 1.0 };
            for (v, c) in col.iter().enumerate() {
                s.var[v] *= fix(*c);
            }
            for (k, c) in blk.iter().enumerate() {
                s.block[k] *= fix(*c);
            }
            for (i, c) in row.iter().enumerate() {
                s.eq[i] *= fix(*c);
            }
        }
        let cn = p.objective.iter().zip(&s.var).map(|(c, d)| (c * d).abs()).fold(0.0, f64::max);
        if cn > 0.0 {
            s.obj = 1.0 / cn;
        }
        s
    }
}

impl Operator {
    pub fn compile(p: &SdpProblem, s: &Scaling) -> Self {
        let mut blocks = Vec::with_capacity(p.blocks.len());
        for (k, b) in p.blocks.iter().enumerate() {
            let bs = s.block[k];
            let mut terms: Vec<(usize, usize, usize, C64)> =
                b.terms.iter().map(|t| (t.row, t.col, t.var, t.coef * (bs * s.var[t.var]))).collect();
            terms.sort_by_key(|t| (t.1, t.0, t.2));
            let mut pos = Vec::new();
            let mut ptr = vec![0];
            let mut vars = Vec::with_capacity(terms.len());
            let mut coefs = Vec::with_capacity(terms.len());
            for &(r, c, v, a) in &terms {
                if pos.last() != Some(&(r, c)) {
                    if !pos.is_empty() {
                        ptr.push(vars.len());
                    }
                    pos.push((r, c));
                } else if vars.last() == Some(&v) {
                    // repeated (position, var) pair
                    *coefs.last_mut().unwrap() += a;
                    continue;
                }
                vars.push(v);
                coefs.push(a);
            }
            if !pos.is_empty() {
                ptr.push(vars.len());
            }
            let constant = b.constant.iter().map(|e| (e.row, e.col, e.coef * bs)).collect();
            blocks.push(BlockOp { size: b.size, constant, pos, ptr, vars, coefs });
        }
        let mut eq_ptr = vec![0];
        let mut eq_vars = Vec::new();
        let mut eq_coefs = Vec::new();
        let mut eq_rhs = Vec::with_capacity(p.eqs.len());
        for (i, e) in p.eqs.iter().enumerate() {
            for &(v, a) in &e.terms {
                eq_vars.push(v);
                eq_coefs.push(a * s.eq[i] * s.var[v]);
            }
            eq_ptr.push(eq_vars.len());
            eq_rhs.push(e.rhs * s.eq[i]);
        }
        Self { n_vars: p.n_vars, blocks, eq_ptr, eq_vars, eq_coefs, eq_rhs }
    }

    pub fn n_eqs(&self) -> usize {
        self.eq_rhs.len()
    }

    /// `out += A_k x` on both triangles.
    pub fn apply_block(&self, k: usize, x: &[f64], out: &mut Mat<C64>) {
        let b = &self.blocks[k];
        for (i, &(r, c)) in b.pos.iter().enumerate() {
            let mut v = C64::new(0.0, 0.0);
            for j in b.ptr[i]..b.ptr[i + 1] {
                v += b.coefs[j] * x[b.vars[j]];
            }
            add_herm(out, r, c, v);
        }
    }

    /// `out += alpha * C_k`.
    pub fn add_constant(&self, k: usize, alpha: f64, out: &mut Mat<C64>) {
        for &(r, c, v) in &self.blocks[k].constant {
            add_herm(out, r, c, v * alpha);
        }
    }

    /// `out += alpha * A_k^*(Z)` for Hermitian `Z` (upper triangle read).
    pub fn adjoint_block(&self, k: usize, z: &Mat<C64>, alpha: f64, out: &mut [f64]) {
        let b = &self.blocks[k];
        for (i, &(r, c)) in b.pos.iter().enumerate() {
            let zv = z[(r, c)];
            let w = if r == c { alpha } else { 2.0 * alpha };
            for j in b.ptr[i]..b.ptr[i + 1] {
                let a = b.coefs[j];
                out[b.vars[j]] += w * (a.re * zv.re + a.im * zv.im);
            }
        }
    }

    /// `⟨C_k, Z⟩`.
    pub fn constant_inner(&self, k: usize, z: &Mat<C64>) -> f64 {
        let mut s = 0.0;
        for &(r, c, v) in &self.blocks[k].constant {
            let zv = z[(r, c)];
            let w = if r == c { 1.0 } else { 2.0 };
            s += w * (v.re * zv.re + v.im * zv.im);
        }
        s
    }

    pub fn constant_norm_sq(&self, k: usize) -> f64 {
        let b = &self.blocks[k];
        let mut m = Mat::<C64>::zeros(b.size, b.size);
        self.add_constant(k, 1.0, &mut m);
        crate::cone::frob_sq(m.as_ref())
    }

    /// `E x` (without the right-hand side).
    pub fn apply_eq(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_eqs())
            .map(|i| (self.eq_ptr[i]..self.eq_ptr[i + 1]).map(|j| self.eq_coefs[j] * x[self.eq_vars[j]]).sum())
            .collect()
    }

    /// `out += alpha * E^T y`.
    pub fn adjoint_eq(&self, y: &[f64], alpha: f64, out: &mut [f64]) {
        for i in 0..self.n_eqs() {
            for j in self.eq_ptr[i]..self.eq_ptr[i + 1] {
                out[self.eq_vars[j]] += alpha * self.eq_coefs[j] * y[i];
            }
        }
    }

    /// Upper-triangle triplets of `Σ_k A_k^* A_k` (real, symmetric).
    pub fn gram_triplets(&self) -> Vec<Triplet<usize, usize, f64>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            for (i, &(r, c)) in b.pos.iter().enumerate() {
                let w = if r == c { 1.0 } else { 2.0 };
                let range = b.ptr[i]..b.ptr[i + 1];
                for j1 in range.clone() {
                    for j2 in range.clone() {
                        let (v1, v2) = (b.vars[j1], b.vars[j2]);
                        if v1 > v2 {
                            continue;
                        }
                        let (a1, a2) = (b.coefs[j1], b.coefs[j2]);
                        let val = if r == c { a1.re * a2.re } else { a1.re * a2.re + a1.im * a2.im };
                        if val != 0.0 {
                            out.push(Triplet::new(v1, v2, w * val));
                        }
                    }
                }
            }
        }
        out
    }
}

fn add_herm(m: &mut Mat<C64>, r: usize, c: usize, v: C64) {
    if r == c {
        m[(r, r)].re += v.re;
    } else {
        m[(r, c)] += v;
        m[(c, r)] += v.conj();
    }
}
