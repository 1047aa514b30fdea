//! Monte-Carlo experiments, configuration files, result files and the
//! oracle suite behind the `holo-jcas` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod harness;
pub mod output;
pub mod validate;

pub use error::{Error, Result};
