//! Fault-tolerant visual servoing for capturing a tumbling target.
//!
//! The pipeline: a synthetic range sensor scans the target, ICP seeded by the
//! estimator's prediction registers the scan against the surface model, a
//! constrained noise-adaptive multiplicative EKF fuses healthy registrations
//! (and coasts on the dynamics model through faults), and a time-optimal
//! planner drives the chaser's end-effector to the predicted grapple point.

pub mod core_math;
pub mod error;
pub mod estimator;
pub mod guidance;
pub mod harness;
pub mod observability;
pub mod registration;
pub mod sim;

pub use core_math::{
    BodyState, InertiaRatios, Parameterization, SigmaParams, TargetState, UnitQuaternion,
};
pub use error::{Error, Result};
