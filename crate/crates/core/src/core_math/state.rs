use nalgebra::{Matrix3, Vector3};

use super::inertia::SigmaParams;
use super::quaternion::UnitQuaternion;

/// Dynamic part of the target state.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct BodyState {
    /// Attitude of the principal-axis body frame {B} w.r.t. the sensor frame {A}.
    pub q: UnitQuaternion,
    /// Body rates expressed in {B}, rad/s.
    pub omega: Vector3<f64>,
    /// Centre-of-mass position in {A}, m.
    pub rho_o: Vector3<f64>,
    /// Centre-of-mass velocity in {A}, m/s.
    pub rho_o_dot: Vector3<f64>,
}

/// Full estimator state: body state plus constant parameters.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct TargetState {
    pub body: BodyState,
    pub sigma: SigmaParams,
    /// Grapple-fixture offset from the centre of mass, expressed in {B}, m.
    pub varrho: Vector3<f64>,
    /// Constant attitude of {B} relative to the grapple frame {C}.
    pub mu: UnitQuaternion,
}

impl BodyState {
    pub fn is_finite(&self) -> bool {
        self.q.is_finite()
            && self.omega.iter().all(|x| x.is_finite())
            && self.rho_o.iter().all(|x| x.is_finite())
            && self.rho_o_dot.iter().all(|x| x.is_finite())
    }
}

impl TargetState {
    /// Grapple-fixture position `ρ = ρ_o + A(q) ϱ` in {A}.
    pub fn grapple_position(&self) -> Vector3<f64> {
        self.body.rho_o + self.body.q.rotation_matrix() * self.varrho
    }

    /// Grapple-fixture velocity `ρ̇ = ρ̇_o + A(q)(ω × ϱ)`.
    pub fn grapple_velocity(&self) -> Vector3<f64> {
        self.body.rho_o_dot + self.body.q.rotation_matrix() * self.body.omega.cross(&self.varrho)
    }

    /// Attitude of the grapple frame {C} in {A}, `η = μ ⊗ q`.
    pub fn grapple_attitude(&self) -> UnitQuaternion {
        self.mu.product(&self.body.q)
    }

    pub fn attitude_matrix(&self) -> Matrix3<f64> {
        self.body.q.rotation_matrix()
    }

    pub fn is_valid(&self) -> bool {
        self.body.is_finite()
            && self.sigma.is_valid()
            && self.varrho.iter().all(|x| x.is_finite())
            && self.mu.is_finite()
    }
}

/// Which inertia parameterization an error state carries.
///
/// `Minimal` is the 20-state vector `[δq_v, δω, δρ_o, δρ̇_o, δσ₁, δσ₂, δϱ, δμ_v]`.
/// `Redundant` treats `σ₃` as a third independent parameter (21 states),
/// dropping the `Γ(σ) = 0` elimination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Parameterization {
    #[default]
    Minimal,
    Redundant,
}

impl Parameterization {
    pub const Q: usize = 0;
    pub const OMEGA: usize = 3;
    pub const RHO_O: usize = 6;
    pub const RHO_O_DOT: usize = 9;
    pub const SIGMA: usize = 12;

    pub fn sigma_len(self) -> usize {
        match self {
            Parameterization::Minimal => 2,
            Parameterization::Redundant => 3,
        }
    }

    pub fn varrho(self) -> usize {
        Self::SIGMA + self.sigma_len()
    }

    pub fn mu(self) -> usize {
        self.varrho() + 3
    }

    pub fn dim(self) -> usize {
        self.mu() + 3
    }

    pub fn label(self) -> &'static str {
        match self {
            Parameterization::Minimal => "minimal",
            Parameterization::Redundant => "redundant",
        }
    }
}

/// Dimension of the minimal error state.
pub const STATE_DIM: usize = 20;
/// Process noise `[ε_τ; ε_f]`.
pub const NOISE_DIM: usize = 6;
/// Measurement `[ρ̄; δη̄_v]`.
pub const MEAS_DIM: usize = 6;
