// `!(x > t)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod coherent;
pub mod config;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod hilbert;
pub mod numerics;
pub mod operators;
pub mod report;
pub mod verify;

pub use error::Error;
