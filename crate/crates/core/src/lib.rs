//! Numerical toolkit for continuous-variable and linear-optical quantum information.
//!
//! The crate is organised by topic:
//!
//! * [`fock`]: truncated Fock-space states and single-mode Gaussian operators.
//! * [`matfun`]: permanents, hafnians and loop hafnians.
//! * [`interf`]: passive linear optics, Boson Sampling and adaptive circuits.
//! * [`gaussian`]: covariance-matrix formalism and output densities of Gaussian circuits.
//! * [`stellar`]: stellar functions, zero counting, core states and robustness.
//! * [`heterodyne`]: Husimi sampling and the heterodyne estimator stack.
//! * [`mverify`]: multimode fidelity witnesses for Boson Sampling.
//! * [`progmeas`]: swap tests and programmable-measurement interferometers.
//! * [`wcf`]: weak coin flipping analysis.

pub mod config;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod heterodyne;
pub mod interf;
pub mod matfun;
pub mod mverify;
pub mod optimize;
pub mod progmeas;
pub mod special;
pub mod stellar;
pub mod types;
pub mod wcf;

pub use error::{CvError, Result};
pub use types::{
    ComplexMatrix, ComplexVector, ConfidenceValue, OccupationTuple, SampleBatch, C64,
};
