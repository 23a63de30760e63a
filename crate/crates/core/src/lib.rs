//! Hybrid quantum-classical optimisation of Sherrington-Kirkpatrick spin glasses.
//!
//! The crate provides Metropolis-Hastings chains, simulated annealing and parallel
//! tempering, each of which can draw proposals from a local single-spin flip, a
//! uniform resample, or a quantum kernel. The quantum kernel prepares the current
//! configuration as a computational basis state, applies a Trotterized real-time
//! evolution under a mixed transverse-field / problem Hamiltonian using an exact
//! dense statevector, and measures once.
//!
//! The [`analysis`] module builds exact transition matrices for small systems and
//! provides the spectral-gap and effort metrics used to compare the methods.

pub mod analysis;
pub mod chain;
pub mod error;
pub mod ising;
pub mod proposal;
pub mod rng;
pub mod schedule;
pub mod statevector;
pub mod tempering;

pub use error::{Error, Result};
pub use ising::{SkInstance, SpinConfiguration};
pub use proposal::ProposalKernel;
