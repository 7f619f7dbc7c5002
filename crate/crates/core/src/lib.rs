//! Grid simulation of two-sided Brownian motion together with allocation
//! rules that balance the local time at zero against target additive
//! functionals, the random shifts built from them, an exact discrete matching
//! oracle, and the statistical checks used by the verification harness.

pub mod allocation;
pub mod error;
pub mod measures;
pub mod path_engine;
pub mod point_matching;
pub mod shifts;
pub mod stats;

pub use error::{Error, Result};
