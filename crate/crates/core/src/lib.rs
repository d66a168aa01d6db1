//! Repetitive scenario trials for chance-constrained convex programs:
//! exact confidence bounds on constraint-violation probability, trial
//! design for hitting a prescribed violation band, a deterministic
//! parallel trial engine, and empirical validation utilities.

pub mod bounds;
pub mod design;
pub mod engine;
pub mod error;
pub mod rng;
pub mod scenario;
pub mod specfun;
pub mod validate;

pub use error::{Error, Result};
