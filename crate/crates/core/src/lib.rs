//! Causal scene-graph layout: build a relation graph for a set of objects,
//! screen its edges, and place the objects as non-overlapping boxes.

pub mod bayes;
pub mod config;
pub mod edit;
pub mod error;
pub mod grammar;
pub mod graph;
pub mod intervention;
pub mod layout;
pub mod oracle;
pub mod order;
pub mod pid;
pub mod pipeline;

pub use error::{Error, Result};
