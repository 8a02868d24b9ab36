// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod error;
pub mod hqp;
pub mod projection;
pub mod qp;
pub mod robot;
pub mod scenario;
pub mod schedule;
pub mod task_model;

pub use error::{Error, Result};
