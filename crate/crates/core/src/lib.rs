//! Physics-informed neural networks for forward and inverse PDE problems,
//! with optional invariant-surface-condition (symmetry) loss terms.

pub mod autodiff;
pub mod harness;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod problems;
pub mod sampling;
