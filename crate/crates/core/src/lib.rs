#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod error;
pub mod experiments;
pub mod export;
pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod net;
pub mod optimize;
pub mod pde;
pub mod problems;
pub mod quadrature;
pub mod sublinear;

pub use error::{Error, Result};
