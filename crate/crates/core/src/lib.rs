//! Solvers for the prophet secretary problem measured against the online
//! optimum: an exact subset DP, a grouped count-vector DP, a discretization
//! pipeline with a grouped DP on top, a frontloading reduction with its own
//! DP, and a Monte-Carlo strategy simulator.

pub mod checks;
pub mod discretize;
pub mod error;
pub mod exact;
pub mod generate;
pub mod grouped;
pub mod model;
pub mod preprocess;
pub mod ptas;
pub mod qptas;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{DiscreteDistribution, Instance, PointMass, Profile, SchemeConfig};
