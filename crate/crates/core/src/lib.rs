//! Dense-matrix simulation of out-of-time-ordered correlators (OTOCs), their
//! coarse-grained Kirkwood-Dirac quasiprobability distributions, and three
//! OTOC measurement protocols (weak-measurement, interferometric and
//! quantum-clock) on a mixed-field Ising chain with single-qubit dephasing.
//!
//! The crate is organized bottom-up:
//!
//! * [`operator`]: multi-qubit operators, spectral decomposition, propagators.
//! * [`spin_chain`]: the Ising Hamiltonian, butterfly operators, initial states
//!   and the dephasing noise model.
//! * [`dynamics`]: exact unitary legs and the jump/no-jump dephasing map.
//! * [`protocols`]: the ideal OTOC and the three measurement protocols.
//! * [`qpd`]: quasiprobabilities, total nonclassicality and its timescales.
//! * [`experiment`]: run configuration, CSV/SVG output and the experiment driver.

pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod operator;
pub mod parallel;
pub mod protocols;
pub mod qpd;
pub mod spin_chain;
pub mod state;
pub mod tolerance;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Dense complex matrix used for every operator and carried state.
pub type CMatrix = ndarray::Array2<C64>;

/// Crate version recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
