//! Solves `(G + E^T E) x = b`, where `G = Σ A_k^* A_k`, through the
//! quasi-definite augmented system `[[G + δI, E^T], [E, -I]]` so that dense
//! equality rows never form cliques.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};

use crate::error::{Result, SdpError};
use crate::operator::Operator;

pub(crate) struct NormalSolver {
    n: usize,
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    // upper-triangle triplets of G for matvecs during refinement
    gram: Vec<(usize, usize, f64)>,
    buf: MemBuffer,
}

impl NormalSolver {
    pub fn new(op: &Operator) -> Result<Self> {
        let n = op.n_vars;
        let m = op.n_eqs();
        let gram_t = op.gram_triplets();
        // merge duplicates
        let gram_mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &gram_t)
            .map_err(|e| SdpError::Factorization(format!("{e:?}")))?;
        let mut gram = Vec::new();
        let mut diag_max = 0.0f64;
        for j in 0..n {
            let rows = gram_mat.as_ref().row_idx_of_col_raw(j);
            let vals = gram_mat.as_ref().val_of_col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                gram.push((i, j, v));
                if i == j {
                    diag_max = diag_max.max(v);
                }
            }
        }
        let delta = 1e-11 * diag_max.max(1.0);
        let mut trip: Vec<Triplet<usize, usize, f64>> = gram.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        for j in 0..n {
            trip.push(Triplet::new(j, j, delta));
        }
        for i in 0..m {
            for k in op.eq_ptr[i]..op.eq_ptr[i + 1] {
                trip.push(Triplet::new(op.eq_vars[k], n + i, op.eq_coefs[k]));
            }
            trip.push(Triplet::new(n + i, n + i, -1.0));
        }
        let kkt = SparseColMat::<usize, f64>::try_new_from_triplets(n + m, n + m, &trip)
            .map_err(|e| SdpError::Factorization(format!("{e:?}")))?;
        let symbolic = factorize_symbolic_cholesky(
            kkt.symbolic(),
            Side::Upper,
            SymmetricOrdering::Amd,
            CholeskySymbolicParams::default(),
        )
        .map_err(|e| SdpError::Factorization(format!("{e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let signs: Vec<i8> = (0..n + m).map(|i| if i < n { 1 } else { -1 }).collect();
        let reg = LdltRegularization {
            dynamic_regularization_signs: Some(&signs),
            dynamic_regularization_delta: 1e-9,
            dynamic_regularization_epsilon: 1e-14,
        };
        let mut fbuf = MemBuffer::new(symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()));
        symbolic
            .factorize_numeric_ldlt(
                &mut values,
                kkt.as_ref(),
                Side::Upper,
                reg,
                Par::Seq,
                MemStack::new(&mut fbuf),
                Default::default(),
            )
            .map_err(|e| SdpError::Factorization(format!("{e:?}")))?;
        let buf = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        Ok(Self { n, symbolic, values, gram, buf })
    }

    fn raw_solve(&mut self, rhs: &[f64], m: usize) -> Vec<f64> {
        let mut col = Mat::<f64>::zeros(self.n + m, 1);
        for (i, &v) in rhs.iter().enumerate() {
            col[(i, 0)] = v;
        }
        LdltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(
            Conj::No,
            col.as_mut(),
            Par::Seq,
            MemStack::new(&mut self.buf),
        );
        (0..self.n).map(|i| col[(i, 0)]).collect()
    }

    fn apply(&self, op: &Operator, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for &(i, j, v) in &self.gram {
            out[i] += v * x[j];
            if i != j {
                out[j] += v * x[i];
            }
        }
        let ex = op.apply_eq(x);
        op.adjoint_eq(&ex, 1.0, &mut out);
        out
    }

    /// Solves with two rounds of iterative refinement against the
    /// unregularized operator.
    pub fn solve(&mut self, op: &Operator, b: &[f64]) -> Vec<f64> {
        let m = op.n_eqs();
        let mut x = self.raw_solve(b, m);
        for _ in 0..2 {
            let ax = self.apply(op, &x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let dx = self.raw_solve(&r, m);
            for (x, d) in x.iter_mut().zip(&dx) {
                *x += d;
            }
        }
        x
    }
}
