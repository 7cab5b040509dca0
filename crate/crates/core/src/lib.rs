//! Simulation library for the two-mode multiphoton Jaynes-Cummings (MPJC)
//! model: a two-level spin exchanging `m` quanta with each of two bosonic
//! modes.
//!
//! The crate is organised bottom-up:
//!
//! - [`hilbert`]: truncated Fock spaces, the fixed `spin ⊗ mode1 ⊗ mode2`
//!   index layout, dense and sparse operators, partial trace and transpose.
//! - [`states`]: spin and bosonic initial states with explicit truncation
//!   leakage.
//! - [`model`]: Hamiltonians (plain, Kerr, dispersive, single-mode) and
//!   Lindblad jump operators.
//! - [`analytic`]: closed-form amplitudes and measures for ground-state
//!   bosons, used as oracles for the numerics.
//! - [`measures`]: logarithmic negativity, coherence, entropies, NOON
//!   fidelity, covariance matrices and Gaussian diagnostics.
//! - [`dynamics`]: exact unitary propagation, the four-amplitude ODE and
//!   the Lindblad master equation.
//! - [`harness`]: experiment configs, sweeps, figure datasets, CSV output
//!   and the validation report.

pub mod analytic;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod hilbert;
pub mod measures;
pub mod model;
pub mod ode;
pub mod states;

mod linalg;

pub use error::{Error, Result};
pub use hilbert::{Operator, SpaceDescriptor, SparseOperator};
pub use num_complex::Complex64 as C64;
