//! Planar overhead crane: plant model, decoupled sliding-mode control with an
//! adaptive fuzzy disturbance compensator, and a fixed-step simulator.

// `!(v > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod fuzzy;
pub mod output;
pub mod reference;
pub mod scenario;
pub mod sim;
pub mod smc;
