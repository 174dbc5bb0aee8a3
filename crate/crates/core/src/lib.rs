//! Fault-tolerant approximate distance and shortest-path oracles for
//! Euclidean spanners under vertex failures.

pub mod arbitrary_path;
pub mod bundle;
pub mod error;
pub mod far;
pub mod graph;
pub mod ft;
pub mod general;
pub mod kernel;
pub mod queries;
pub mod spanner_gen;

pub use error::{OracleError, Result};
