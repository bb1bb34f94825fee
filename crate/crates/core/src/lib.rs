pub mod benchmark;
pub mod cli;
pub mod features;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod neighbors;
pub mod nn;
pub mod rng;
pub mod synthgen;
