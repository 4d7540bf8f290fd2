// Negated float comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod error;
pub mod flock;
pub mod geometry;
pub mod herding;
pub mod integrator;
pub mod output;
pub mod potentials;
pub mod scenario;
pub mod sim;
pub mod virtual_agents;

pub use error::{Error, Result};
