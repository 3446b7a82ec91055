//! Standard form: optimize `c^T x` over real decisions `x` subject to
//! Hermitian affine blocks `S_k(x) = C_k + Σ_v x_v A_{k,v} ⪰ 0` and real
//! equalities `a_i^T x = b_i`.
//!
//! Block coefficients are given on the upper triangle (`row <= col`); the
//! lower triangle is implied by Hermitian symmetry. Diagonal coefficients must
//! be real.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdpError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub coef: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub var: usize,
    pub row: usize,
    pub col: usize,
    pub coef: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdBlock {
    pub label: String,
    pub size: usize,
    pub constant: Vec<Entry>,
    pub terms: Vec<Term>,
}

impl PsdBlock {
    pub fn new(label: impl Into<String>, size: usize) -> Self {
        Self { label: label.into(), size, constant: Vec::new(), terms: Vec::new() }
    }

    /// Adds `coef` to the constant at `(row, col)`; `(col, row)` gets the conjugate.
    pub fn add_constant(&mut self, row: usize, col: usize, coef: C64) {
        let (row, col, coef) = upper(row, col, coef);
        self.constant.push(Entry { row, col, coef });
    }

    /// Adds `coef * x[var]` at `(row, col)`; `(col, row)` gets the conjugate.
    pub fn add_term(&mut self, var: usize, row: usize, col: usize, coef: C64) {
        let (row, col, coef) = upper(row, col, coef);
        self.terms.push(Term { var, row, col, coef });
    }

    /// Dense Hermitian value of the block at `x`.
    pub fn value(&self, x: &[f64]) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.size, self.size);
        for e in &self.constant {
            accumulate(&mut m, e.row, e.col, e.coef);
        }
        for t in &self.terms {
            accumulate(&mut m, t.row, t.col, t.coef * x[t.var]);
        }
        m
    }
}

fn upper(row: usize, col: usize, coef: C64) -> (usize, usize, C64) {
    if row <= col {
        (row, col, coef)
    } else {
        (col, row, coef.conj())
    }
}

fn accumulate(m: &mut Mat<C64>, row: usize, col: usize, v: C64) {
    if row == col {
        m[(row, row)] += C64::new(v.re, 0.0);
    } else {
        m[(row, col)] += v;
        m[(col, row)] += v.conj();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqConstraint {
    pub label: String,
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// A named contiguous range of decision variables, for bookkeeping only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarGroup {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub description: String,
    pub n_vars: usize,
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub blocks: Vec<PsdBlock>,
    pub eqs: Vec<EqConstraint>,
    pub groups: Vec<VarGroup>,
}

impl SdpProblem {
    pub fn new(description: impl Into<String>, sense: Sense) -> Self {
        Self {
            description: description.into(),
            n_vars: 0,
            sense,
            objective: Vec::new(),
            blocks: Vec::new(),
            eqs: Vec::new(),
            groups: Vec::new(),
        }
    }

    /// Declares `len` new decisions under `name` and returns the first index.
    pub fn add_vars(&mut self, name: impl Into<String>, len: usize) -> usize {
        let start = self.n_vars;
        self.groups.push(VarGroup { name: name.into(), start, len });
        self.n_vars += len;
        self.objective.resize(self.n_vars, 0.0);
        start
    }

    pub fn group(&self, name: &str) -> Option<&VarGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.n_vars {
            return Err(SdpError::ObjectiveLength { got: self.objective.len(), expected: self.n_vars });
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(SdpError::NonFinite("objective".into()));
        }
        for b in &self.blocks {
            if b.size == 0 {
                return Err(SdpError::EmptyBlock(b.label.clone()));
            }
            let check = |row: usize, col: usize, coef: C64| -> Result<()> {
                if row >= b.size || col >= b.size {
                    return Err(SdpError::EntryOutOfRange { block: b.label.clone(), row, col, size: b.size });
                }
                if !(coef.re.is_finite() && coef.im.is_finite()) {
                    return Err(SdpError::NonFinite(format!("block `{}`", b.label)));
                }
                if row == col && coef.im != 0.0 {
                    return Err(SdpError::ComplexDiagonal { block: b.label.clone(), row });
                }
                Ok(())
            };
            for e in &b.constant {
                check(e.row, e.col, e.coef)?;
            }
            for t in &b.terms {
                if t.var >= self.n_vars {
                    return Err(SdpError::UnknownVariable {
                        var: t.var,
                        n_vars: self.n_vars,
                        context: format!("block `{}`", b.label),
                    });
                }
                check(t.row, t.col, t.coef)?;
            }
        }
        for e in &self.eqs {
            for &(v, a) in &e.terms {
                if v >= self.n_vars {
                    return Err(SdpError::UnknownVariable {
                        var: v,
                        n_vars: self.n_vars,
                        context: format!("equality `{}`", e.label),
                    });
                }
                if !a.is_finite() {
                    return Err(SdpError::NonFinite(format!("equality `{}`", e.label)));
                }
            }
            if !e.rhs.is_finite() {
                return Err(SdpError::NonFinite(format!("equality `{}`", e.label)));
            }
        }
        Ok(())
    }

    /// `a_i^T x - b_i` for every equality.
    pub fn eq_residuals(&self, x: &[f64]) -> Vec<f64> {
        self.eqs
            .iter()
            .map(|e| e.terms.iter().map(|&(v, a)| a * x[v]).sum::<f64>() - e.rhs)
            .collect()
    }
}
