//! Iterative closest point seeded from the estimator's prediction.
//!
//! Poses passed in and returned map model coordinates {C} into the sensor
//! frame {A}. Internally the loop works with the inverse map, cloud to model.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::horn::horn_align;
use crate::core_math::pose::Pose;
use crate::core_math::state::TargetState;
use crate::error::{Error, Result};
use crate::sim::model::SurfaceModel;
use crate::sim::sensor::PointCloud;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcpConfig {
    /// `ε_th`, m².
    pub eps_threshold: f64,
    /// `n_max`.
    pub max_iterations: usize,
    /// Pairs farther apart than this are dropped, m.
    pub correspondence_cutoff: f64,
    /// Adaptive cutoff `κ·sqrt(ε)` from the previous iteration; 0 disables it.
    pub trim_factor: f64,
    /// Lower bound for the adaptive cutoff, m.
    pub trim_floor: f64,
    /// Iteration stops once the pose step is below this (m and rad).
    pub step_tolerance: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self::for_sensor(0.002, crate::sim::model::MESH_RESOLUTION)
    }
}

impl IcpConfig {
    /// Defaults with `ε_th = 3 (σ² + r²)` for sensor noise `σ` and model
    /// resolution `r`.
    pub fn for_sensor(noise_std: f64, resolution: f64) -> Self {
        Self {
            eps_threshold: 3.0 * (noise_std * noise_std + resolution * resolution),
            max_iterations: 30,
            correspondence_cutoff: 0.1,
            trim_factor: 3.0,
            trim_floor: 0.01,
            step_tolerance: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.eps_threshold > 0.0
            && self.max_iterations > 0
            && self.correspondence_cutoff > 0.0
            && self.trim_factor >= 0.0
            && self.trim_floor >= 0.0
            && self.step_tolerance >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid ICP configuration {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IcpStatus {
    /// Fit error below `ε_th`.
    Converged,
    /// Ran out of iterations or stalled above `ε_th`.
    NotConverged,
    /// No usable scan, no correspondences, or degenerate geometry.
    Failed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegistrationResult {
    /// `ρ̄`: grapple-frame origin in {A}.
    pub rho_bar: Vector3<f64>,
    /// `η̄`: grapple-frame attitude in {A}.
    pub eta_bar: crate::core_math::quaternion::UnitQuaternion,
    /// `ε`, mean squared pair distance, m². `+∞` when nothing was registered.
    pub fit_error: f64,
    pub iterations: usize,
    /// `γ`.
    pub healthy: bool,
    pub status: IcpStatus,
    pub pairs: usize,
    /// Fit error after each iteration.
    pub history: Vec<f64>,
}

impl RegistrationResult {
    pub fn pose(&self) -> Pose {
        Pose::new(self.rho_bar, self.eta_bar)
    }

    fn failed(initial: &Pose, iterations: usize, history: Vec<f64>) -> Self {
        Self {
            rho_bar: initial.rho,
            eta_bar: initial.eta,
            fit_error: f64::INFINITY,
            iterations,
            healthy: false,
            status: IcpStatus::Failed,
            pairs: 0,
            history,
        }
    }
}

/// Registration seed `η⁽⁰⁾ = μ̂ ⊗ q̂`, `ρ⁽⁰⁾ = ρ̂_o + A(q̂) ϱ̂`.
pub fn initial_pose_from_prediction(prior: &TargetState) -> Pose {
    Pose::new(prior.grapple_position(), prior.grapple_attitude())
}

/// One correspondence: cloud index and its closest model point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    pub cloud_index: usize,
    pub model_point: Vector3<f64>,
    pub dist_sq: f64,
}

/// Pairs each `cᵢ` with the model point closest to `A(η) cᵢ + ρ`, where
/// `cloud_to_model = (ρ, η)`. Pairs beyond `cutoff` are dropped; the rest
/// keep cloud order.
pub fn find_correspondences(
    cloud: &[Vector3<f64>],
    model: &SurfaceModel,
    cloud_to_model: &Pose,
    cutoff: f64,
) -> Result<Vec<Correspondence>> {
    let r = cloud_to_model.eta.rotation_matrix();
    let c2 = cutoff * cutoff;
    let pairs: Vec<Correspondence> = cloud
        .par_iter()
        .with_min_len(64)
        .enumerate()
        .filter_map(|(i, c)| {
            let p = r * c + cloud_to_model.rho;
            let hit = model.closest(&p);
            (hit.dist_sq <= c2).then_some(Correspondence {
                cloud_index: i,
                model_point: hit.point,
                dist_sq: hit.dist_sq,
            })
        })
        .collect();
    if pairs.is_empty() {
        Err(Error::EmptyCorrespondence)
    } else {
        Ok(pairs)
    }
}

/// Full ICP cycle from `initial` (model to sensor).
pub fn icp_register(
    cloud: &PointCloud,
    model: &SurfaceModel,
    initial: &Pose,
    cfg: &IcpConfig,
) -> RegistrationResult {
    if cloud.is_empty() {
        return RegistrationResult::failed(initial, 0, Vec::new());
    }
    let pts = &cloud.points;
    let mut t = initial.inverse();
    let mut history = Vec::with_capacity(cfg.max_iterations);
    let mut eps = f64::INFINITY;
    let mut pairs = 0;
    let mut n = 0;
    while n < cfg.max_iterations {
        let cutoff = if cfg.trim_factor > 0.0 && eps.is_finite() {
            cfg.correspondence_cutoff.min((cfg.trim_factor * eps.sqrt()).max(cfg.trim_floor))
        } else {
            cfg.correspondence_cutoff
        };
        let corr = match find_correspondences(pts, model, &t, cutoff) {
            Ok(c) => c,
            Err(_) => return RegistrationResult::failed(initial, n, history),
        };
        let src: Vec<Vector3<f64>> = corr.iter().map(|c| pts[c.cloud_index]).collect();
        let dst: Vec<Vector3<f64>> = corr.iter().map(|c| c.model_point).collect();
        let (next, e) = match horn_align(&src, &dst) {
            Ok(r) => r,
            Err(_) => return RegistrationResult::failed(initial, n, history),
        };
        n += 1;
        let (dp, da) = next.error_to(&t);
        t = next;
        eps = e;
        pairs = corr.len();
        history.push(e);
        if dp < cfg.step_tolerance && da < cfg.step_tolerance {
            break;
        }
    }
    let healthy = eps < cfg.eps_threshold;
    let pose = t.inverse();
    RegistrationResult {
        rho_bar: pose.rho,
        eta_bar: pose.eta.canonical(),
        fit_error: eps,
        iterations: n,
        healthy,
        status: if healthy { IcpStatus::Converged } else { IcpStatus::NotConverged },
        pairs,
        history,
    }
}
