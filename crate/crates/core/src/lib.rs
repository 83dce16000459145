//! Parameter learning for discrete Bayesian networks from incomplete data
//! whose missingness mechanism is unknown and possibly not at random.

pub mod aim;
pub mod cli;
pub mod completion;
pub mod conservative;
pub mod data;
pub mod em;
pub mod error;
pub mod eval;
pub mod experiment;
mod factor;
pub mod fixtures;
pub mod inference;
pub mod learn;
pub mod likelihood;
pub mod netfile;
pub mod network;
pub mod numfmt;
pub mod seed;
pub mod coarsen;

pub use error::{Error, Result};
