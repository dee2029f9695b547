//! Pareto optimization over thin resource categories.

pub mod instance;
pub mod issue;
pub mod particle;
pub mod probcat;
pub mod rescat;
pub mod scale;
pub mod summing;
pub mod swarm;
pub mod valuation;
