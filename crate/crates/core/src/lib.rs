//! Topological complexity of optimizer trajectories, empirical trajectory
//! stability, and the generalization bounds that combine them.
//!
//! The pipeline trains desk-scale synthetic models with projected SGD
//! ([`trainer`]), measures the recorded iterates with alpha-weighted
//! lifetime sums ([`lifetime`]) and positive magnitude ([`magnitude`]),
//! estimates how much the trajectory moves when training samples are swapped
//! ([`stability`]), and evaluates the bounds ([`bounds`]) and their
//! correlation with the observed generalization gap ([`analysis`]).

pub mod analysis;
pub mod artifact;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod lifetime;
pub mod magnitude;
pub mod pipeline;
pub mod rng;
pub mod stability;
pub mod trainer;

pub use error::{Error, Result};
