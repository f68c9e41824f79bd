#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod grape;
pub mod inequality;
pub mod moussa;
pub mod noise;
pub mod operator;
pub mod pseudospin;
pub mod random;
pub mod report;
pub mod state;

pub use error::{Error, Result};
