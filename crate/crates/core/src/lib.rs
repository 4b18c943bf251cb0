//! Exact simulation of three-party quantum secret sharing over reusable
//! GHZ / even-parity carriers, Bob's entanglement-splitting attack, and the
//! generalized-Hadamard H(θ) countermeasure.
//!
//! Module map:
//! - [`state`], [`unitary`], [`density`]: dense state-vector engine.
//! - [`gates`]: named gates, H(θ), carrier and Bell states.
//! - [`protocol`]: the honest protocol session.
//! - [`adversary`]: split-unitary synthesis and the cheating receiver.
//! - [`detection`]: public announcement checks.
//! - [`experiment`]: seeded Monte Carlo harness and angle sweeps.
//! - [`identities`]: the numeric identity suite behind `qss verify`.

pub mod adversary;
pub mod density;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod gates;
pub mod identities;
pub mod protocol;
pub mod state;
pub mod unitary;

pub use density::{trace_distance, DensityMatrix};
pub use error::{Error, Result};
pub use gates::{BellKind, CarrierKind, ThetaTriple};
pub use state::{fidelity, StateVector, C64};
pub use unitary::UnitaryMatrix;
