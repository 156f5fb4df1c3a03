use nalgebra::Vector3;

use super::quaternion::UnitQuaternion;

/// Rigid transform `p ↦ A(η) p + ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pose {
    pub rho: Vector3<f64>,
    pub eta: UnitQuaternion,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        rho: Vector3::new(0.0, 0.0, 0.0),
        eta: UnitQuaternion::IDENTITY,
    };

    pub fn new(rho: Vector3<f64>, eta: UnitQuaternion) -> Self {
        Self { rho, eta }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.eta.rotation_matrix() * p + self.rho
    }

    /// `p ↦ A(η)ᵀ (p − ρ)`.
    pub fn inverse(&self) -> Self {
        let inv = self.eta.inverse();
        Self {
            rho: -(inv.rotation_matrix() * self.rho),
            eta: inv,
        }
    }

    /// Translation and rotation-angle distance to another pose.
    pub fn error_to(&self, other: &Pose) -> (f64, f64) {
        ((self.rho - other.rho).norm(), self.eta.angle_to(&other.eta))
    }
}
