pub mod error;
pub mod graph;
pub mod numeric;
pub mod derand;
pub mod distsim;
pub mod online;
pub mod rng;
pub mod schedule;
pub mod slocal;

pub use error::{Error, Result};
