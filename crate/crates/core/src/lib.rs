//! Feasibility search and infeasibility proofs for mutually unbiased
//! sub-bases posed as real polynomial systems.

pub mod bnb;
pub mod cli;
pub mod conic;
pub mod error;
pub mod linalg;
pub mod model;
pub mod poly;
pub mod region;
pub mod relaxation;
pub mod search;

pub use error::{Error, Result};
