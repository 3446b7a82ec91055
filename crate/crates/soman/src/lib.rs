//! Multi-antenna dual-blind deconvolution: separating an overlaid radar and
//! communications reception into both unknown channels (delay, Doppler,
//! direction of arrival) and both unknown transmit waveforms.
//!
//! Pipeline: [`model`] synthesizes a scene, [`sdp`] builds the dual
//! semidefinite program solved by [`solver`], [`localize`] reads the channel
//! parameters off the dual polynomials, and [`waveforms`] recovers the
//! signal coefficients. [`certificate`] constructs and checks interpolating
//! dual certificates directly, and [`harness`] runs experiments.

pub mod certificate;
pub mod error;
pub mod io;
pub mod kernels;
pub mod localize;
pub mod model;
pub mod harness;
pub mod sdp;
pub mod waveforms;
pub mod solver;

pub use error::{Error, Result};
pub use model::{Atom, Channel3D, ErrorModel, ProblemDims, Scene, SubspaceBases, Which};
