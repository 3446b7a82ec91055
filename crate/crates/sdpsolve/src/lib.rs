//! A self-contained first-order solver for semidefinite programs whose cones
//! are complex Hermitian PSD blocks plus linear equalities.
//!
//! Problems are stated in [`SdpProblem`] form and solved by [`solve`], an
//! alternating-direction method with block equilibration, a sparse
//! quasi-definite factorization for the affine step, and (for large blocks)
//! warm-started partial eigendecompositions for the cone step.

mod admm;
pub mod cone;
mod error;
mod linsys;
mod operator;
mod problem;
mod projector;

pub use admm::{residuals, solve, solve_warm, IterLog, Residuals, Solution, SolverConfig, Status, WarmStart};
pub use cone::{hermitian_to_real_embedding, psd_project, real_embedding_to_hermitian};
pub use error::{Result, SdpError};
pub use problem::{Entry, EqConstraint, PsdBlock, SdpProblem, Sense, Term, VarGroup};

pub use faer::Mat;
pub use num_complex::Complex64 as C64;
