//! The conic solver used for every program in this crate.
//!
//! The implementation lives in the `sdpsolve` crate; this module fixes the
//! configurations used by the pipeline.

pub use sdpsolve::{psd_project, hermitian_to_real_embedding, real_embedding_to_hermitian};
pub use sdpsolve::{Residuals, Solution, SolverConfig, Status};

use crate::error::Result;
use crate::sdp::{DualProgram, DualSolution};

/// Defaults: 1e-7 absolute / 1e-6 relative, 50 000 sweeps.
pub fn default_config() -> SolverConfig {
    SolverConfig::default()
}

pub fn solve(prog: &DualProgram, cfg: &SolverConfig) -> Result<DualSolution> {
    crate::sdp::solve(prog, cfg)
}
