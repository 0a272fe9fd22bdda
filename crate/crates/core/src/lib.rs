// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod boundary;
pub mod cavity;
pub mod energy;
pub mod error;
pub mod inner;
pub mod ode;
pub mod radial;

pub use error::{Error, Result};
