//! Numerical laboratory for positive-commutator estimates near an embedded
//! eigenvalue of a half-line Schrödinger operator coupled to a finite
//! discrete sector.
//!
//! The crate is organized bottom-up:
//!
//! * [`numerics`]: dense and structured eigensolvers, sine transforms, shifted solves.
//! * [`model`]: the discretized channel, the discrete sector and their coupling.
//! * [`conjugate`]: the cut-off generator of dilations and the commutator helpers.
//! * [`fgr`]: the regularized resolvent and the second-order width.
//! * [`mourre`]: compressed commutators, gaps and their bookkeeping.
//! * [`resonance`]: virial checks, complex scaling and the decay proxy.
//! * [`experiments`]: config parsing, the experiment registry and reports.

pub mod conjugate;
pub mod error;
pub mod experiments;
pub mod fgr;
pub mod model;
pub mod mourre;
pub mod numerics;
pub mod resonance;

pub use error::{Error, Result};
pub use numerics::{
    BorderedTridiagonal, CMatrix, ComplexMatrix, EigenDecomposition, GeneralEigenDecomposition, HermitianMatrix,
    LinearOperator, C64,
};
