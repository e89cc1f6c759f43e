//! Gradients of fixed-point objectives in energy-based networks.
//!
//! A layered network settles into a fixed point of its energy; the training
//! objective is the cost at that fixed point. This crate computes its weight
//! gradient three ways (recurrent back-propagation, equilibrium propagation
//! and finite differences) and measures how the temporal processes of the
//! first two track each other.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod eqprop;
pub mod equivalence;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod parallel;
pub mod rbp;
pub mod training;

pub use dynamics::{FixedPoint, RelaxationConfig, Trajectory};
pub use eqprop::{GradientEstimate, Method, TemporalProcessRecord};
pub use error::{Error, Result};
pub use linalg::{FlatVector, Matrix};
pub use model::{Activation, Instance, NetworkShape, Params, Sample, State};
pub use rbp::ErrorProcessState;
