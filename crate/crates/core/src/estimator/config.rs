use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tuning of the constrained adaptive filter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Residual window `w`.
    pub window: usize,
    /// Residuals recorded before `R̂` starts adapting.
    pub adapt_after: usize,
    pub adaptive: bool,
    /// Enforce `|σᵢ| < 1` by gain projection.
    pub constrained: bool,
    /// Keeps projected `σ` strictly inside the box, `|σᵢ| ≤ 1 − δ`.
    pub box_margin: f64,
    /// `λ_floor` for `R̂`.
    pub lambda_floor: f64,
    /// Updates are skipped when `cond(S)` exceeds this.
    pub max_condition: f64,
    /// Power spectral density of the linear-acceleration disturbance, m²/s³.
    pub psd_force: f64,
    /// Power spectral density of the angular-acceleration disturbance, rad²/s³.
    pub psd_torque: f64,
    /// Initial `R` standard deviations: position (m) and attitude vector part.
    pub r0_position_std: f64,
    pub r0_attitude_std: f64,
    /// Initial standard deviations for the first-fix state.
    pub p0_attitude_std: f64,
    pub p0_rate_std: f64,
    pub p0_position_std: f64,
    pub p0_velocity_std: f64,
    pub p0_sigma_std: f64,
    pub p0_varrho_std: f64,
    pub p0_mu_std: f64,
    /// Longest covariance-propagation substep, s.
    pub max_step: f64,
    /// Fault gate: characteristic length `L`, m/rad.
    pub characteristic_length: f64,
    /// Fault gate: `α_th = factor · sqrt(tr(W S W))`.
    pub alpha_gate_factor: f64,
    /// Convergence latch: trace of the parameter block below this...
    pub convergence_trace: f64,
    /// ...for this many consecutive epochs.
    pub hold_epochs: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            window: 30,
            adapt_after: 30,
            adaptive: true,
            constrained: true,
            box_margin: 1e-3,
            lambda_floor: 1e-8,
            max_condition: 1e12,
            psd_force: 2e-8,
            psd_torque: 3e-7,
            r0_position_std: 1e-3,
            r0_attitude_std: 2e-3,
            p0_attitude_std: 0.01,
            p0_rate_std: 0.05,
            p0_position_std: 0.005,
            p0_velocity_std: 0.02,
            p0_sigma_std: 0.5,
            p0_varrho_std: 0.2,
            p0_mu_std: 0.1,
            max_step: 0.1,
            characteristic_length: 1.0,
            alpha_gate_factor: 5.0,
            convergence_trace: 1e-3,
            hold_epochs: 5,
        }
    }
}

impl FilterConfig {
    /// The comparison filter: no gain projection.
    pub fn unconstrained(&self) -> Self {
        Self { constrained: false, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.lambda_floor,
            self.max_condition,
            self.r0_position_std,
            self.r0_attitude_std,
            self.p0_attitude_std,
            self.p0_rate_std,
            self.p0_position_std,
            self.p0_velocity_std,
            self.p0_sigma_std,
            self.p0_varrho_std,
            self.p0_mu_std,
            self.max_step,
            self.characteristic_length,
            self.alpha_gate_factor,
            self.convergence_trace,
        ];
        let nonneg = [self.psd_force, self.psd_torque, self.box_margin];
        if self.window == 0
            || pos.iter().any(|v| !(v.is_finite() && *v > 0.0))
            || nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0))
            || self.box_margin >= 1.0
        {
            return Err(Error::Config(format!("invalid filter configuration {self:?}")));
        }
        Ok(())
    }
}
