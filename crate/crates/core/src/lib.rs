//! Bounded verification of commutativity conditions for data-structure
//! implementations written in a small imperative DSL.

pub mod bench;
pub mod cfa;
pub mod cli;
pub mod commute;
pub mod dsl;
pub mod encode;
pub mod equivalence;
pub mod error;
pub mod ir;
pub mod report;
pub mod semantics;

pub use error::{Error, Result};
