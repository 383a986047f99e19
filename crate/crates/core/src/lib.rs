//! Simulation and verification harness for the phase distinguishing problem
//! and quantum phase estimation.
//!
//! The crate simulates query algorithms against the oracle family
//! `U_y = ω_N^y |u⟩⟨u| + (I − |u⟩⟨u|)`, both with a fixed hidden `y` and in the
//! purified view where `y` is held coherently in a counter register. In the
//! Fourier basis that register counts queries, which is what caps the success
//! probability of any `q`-query algorithm at `(q+1)/N`; the sweeps in
//! [`experiments`] check that cap and its tightness numerically.

pub mod algorithms;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod fourier;
pub mod linalg;
pub mod oracles;
pub mod purified;

pub use error::{PhaseLabError, Result};
pub use linalg::{Complex, RegisterLayout, StateVector, UnitaryMatrix};
pub use oracles::{PhaseInstance, PhaseOracleFamily, QueryKind};
pub use purified::{QueryAlgorithm, Step};
