//! Simulation and analysis of a two-gene regulatory network whose genes
//! switch with binary hysteresis, modeled as a hybrid dynamical system.
//!
//! - [`hybrid`]: hybrid time, arcs, exact affine flows and the event-driven simulator.
//! - [`model`]: the network's parameters, switching functions and data `(C, F, D, G)`.
//! - [`analysis`]: equilibrium classification and the closed-form limit cycle.
//! - [`certificate`]: the shadow-trajectory contraction certificate.
//! - [`perturb`]: disturbed dynamics and a practical-stability probe.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod certificate;
pub mod hybrid;
pub mod model;
pub mod perturb;

pub use model::{GeneNetwork, HybridState, Mode, NetworkParams};
