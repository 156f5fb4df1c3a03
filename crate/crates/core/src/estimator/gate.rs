//! Registration fault gate and the convergence latch.

use nalgebra::{Matrix6, Vector6};

use super::config::FilterConfig;
use super::filter::FilterState;
use crate::registration::icp::{IcpStatus, RegistrationResult};

/// `‖α‖_W` with `W = diag(I, L·I)`.
pub fn weighted_norm(alpha: &Vector6<f64>, length: f64) -> f64 {
    let mut a = *alpha;
    for i in 3..6 {
        a[i] *= length;
    }
    a.norm()
}

/// `α_th = factor · sqrt(tr(W S W))`.
pub fn alpha_threshold(s: &Matrix6<f64>, cfg: &FilterConfig) -> f64 {
    let l2 = cfg.characteristic_length * cfg.characteristic_length;
    let tr = (0..3).map(|i| s[(i, i)]).sum::<f64>() + l2 * (3..6).map(|i| s[(i, i)]).sum::<f64>();
    cfg.alpha_gate_factor * tr.max(0.0).sqrt()
}

/// `γ`: false when the scan is empty, ICP failed, or both the fit error
/// and the predicted-pose discrepancy exceed their thresholds.
pub fn detect_fault(
    result: &RegistrationResult,
    alpha: &Vector6<f64>,
    s: &Matrix6<f64>,
    eps_threshold: f64,
    cfg: &FilterConfig,
) -> bool {
    if result.status == IcpStatus::Failed || !result.fit_error.is_finite() {
        return false;
    }
    let bad_fit = result.fit_error >= eps_threshold;
    let bad_pose = weighted_norm(alpha, cfg.characteristic_length) >= alpha_threshold(s, cfg);
    !(bad_fit && bad_pose)
}

/// Latches once the parameter-block trace has stayed below threshold for
/// the configured number of consecutive epochs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceMonitor {
    run: usize,
    latched_at: Option<f64>,
}

impl ConvergenceMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, fs: &FilterState, t: f64, cfg: &FilterConfig) -> bool {
        if self.latched_at.is_some() {
            return true;
        }
        if fs.parameter_trace() < cfg.convergence_trace {
            self.run += 1;
        } else {
            self.run = 0;
        }
        if self.run >= cfg.hold_epochs {
            self.latched_at = Some(t);
        }
        self.latched_at.is_some()
    }

    pub fn converged(&self) -> bool {
        self.latched_at.is_some()
    }

    pub fn latched_at(&self) -> Option<f64> {
        self.latched_at
    }
}

/// Single-shot form of the latch for a sequence of trace values.
pub fn detect_convergence(monitor: &mut ConvergenceMonitor, fs: &FilterState, t: f64, cfg: &FilterConfig) -> bool {
    monitor.observe(fs, t, cfg)
}
