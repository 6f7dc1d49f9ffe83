//! Forge benchmarks of novel facts from knowledge-base deltas and measure how
//! many of them a prefix can store in a small causal transformer.

pub mod bench;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod facts;
pub mod model;
pub mod num;
pub mod train;
pub mod world;

pub use error::{Error, Result};
