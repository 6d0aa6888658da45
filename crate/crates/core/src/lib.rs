// Negated comparisons reject NaN along with out-of-order bounds.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod cli;
pub mod error;
pub mod hjsolver;
pub mod ltl;
pub mod statespace;
pub mod scenario;
pub mod spp;
pub mod tlt;

pub use error::{Error, Result};
