#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod matrix_fisher;
pub mod bayes_filter;
pub mod commands;
pub mod config;
pub mod formats;
pub mod normalizer;
pub mod pendulum;
pub mod quadrature;
pub mod so3;
pub mod special;
pub mod unscented;

pub use error::{Error, Result};
