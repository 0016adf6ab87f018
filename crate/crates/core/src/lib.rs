#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chaos;
pub mod config;
pub mod driver;
pub mod error;
pub mod experiment;
pub mod forcing;
pub mod hermite;
pub mod model;
pub mod moments;
pub mod multiindex;
pub mod oracles;
pub mod orthogonal;
pub mod output;
pub mod quadrature;
pub mod stats;
pub mod tensor;
