//! Momentum distribution of the mean-field Fermi gas.
//!
//! The library computes the random-phase-approximation term `n_rpa(q)` of the
//! momentum distribution by three independent routes (spectral cosh, scalar
//! t-integral, truncated series), the exchange corrections `n_ex(q)` and
//! `n_ex1(q)`, and an exact small-scale Fock-space reference against which the
//! analytic pipeline is validated end to end.
//!
//! Modules:
//! - [`lattice`]: exact integer geometry of the Fermi ball, lenses and gaps
//! - [`potential`]: interaction families and hypothesis verification
//! - [`kernel`]: per-lens Bogoliubov kernels via SPD matrix functions
//! - [`observables`]: the distribution itself, all routes cross-validated
//! - [`fock`]: exact diagonalization oracle on a truncated mode set
//! - [`quad`]: adaptive quadrature on the half line

pub mod cache;
pub mod error;
pub mod fock;
pub mod kernel;
pub mod lattice;
pub mod linalg;
pub mod observables;
pub mod potential;
pub mod quad;

pub use error::{Error, Result};
pub use fock::{FockBasis, FockStateVector, GeneratorMatrix, ModeSet, Occupation};
pub use kernel::{KernelData, LeadingKernel};
pub use lattice::{FermiBall, HalfInt, LensData, Momentum};
pub use observables::{ExchangeResult, Model, RpaResult, RpaRoute};
pub use potential::{DecayClass, HypothesisReport, PotentialSpec};
pub use quad::QuadratureConfig;
