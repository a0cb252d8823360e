//! Reachability-based control co-design for longitudinal aircraft dynamics.
//!
//! The pipeline runs from an aerodynamic table through trim and linearization
//! to sampled reachable sets, design optimization over the planform, and
//! tracking-controller evaluation.

pub mod aero;
pub mod control;
pub mod error;
pub mod flight;
pub mod hull;
pub mod json;
pub mod lp;
pub mod lti;
pub mod optim;
pub mod reach;

pub use error::{Error, Result};
pub use lti::{LtiSystem, TimeGrid, Trajectory};
pub use reach::{InputBox, ReachConfig, ReachSet};
