//! Numerics for the two-index fractional Ornstein-Uhlenbeck process.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
// Reference constants keep all their published digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::excessive_precision)]

pub mod dd;
pub mod error;
pub mod fpe;
pub mod kernel;
pub mod langevin;
pub mod pathint;
pub mod quad;
pub mod specfun;
pub mod verify;

pub use error::{Error, Result};
pub use specfun::{SeriesControl, SeriesResult};
pub use kernel::{CoeffTable, GreenFn, ProcessParams};
