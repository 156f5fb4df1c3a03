//! Constrained, noise-adaptive, fault-gated multiplicative EKF.

pub mod config;
pub mod filter;
pub mod gate;

pub use config::FilterConfig;
pub use filter::{
    adapt_r, error_state, innovation, measurement_matrix, propagate, push_residual, transition_matrix,
    update, FilterState, Innovation, Measurement, Propagated, UpdateInfo,
};
pub use gate::{alpha_threshold, detect_convergence, detect_fault, weighted_norm, ConvergenceMonitor};
