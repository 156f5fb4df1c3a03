//! Continuous-time target dynamics and a fixed-step RK4 integrator.

use nalgebra::{Vector3, Vector4};

use super::inertia::{disturbance_gain_diag, euler_phi_full, SigmaParams};
use super::quaternion::{raw_product, UnitQuaternion};
use super::state::{BodyState, TargetState};

/// Process noise sample `ε = [ε_τ; ε_f]`, held constant over a step.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ProcessInput {
    /// Angular-acceleration disturbance `τ / tr(I_c)`, rad/s².
    pub eps_tau: Vector3<f64>,
    /// Linear-acceleration disturbance, m/s².
    pub eps_f: Vector3<f64>,
}

impl ProcessInput {
    pub const ZERO: ProcessInput = ProcessInput {
        eps_tau: Vector3::new(0.0, 0.0, 0.0),
        eps_f: Vector3::new(0.0, 0.0, 0.0),
    };
}

/// Time derivative of the dynamic sub-state; parameters have zero rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDerivative {
    pub q_dot: Vector4<f64>,
    pub omega_dot: Vector3<f64>,
    pub rho_o_dot: Vector3<f64>,
    pub rho_o_ddot: Vector3<f64>,
}

/// Inertia ratios used by the integrator. `sigma3` is passed explicitly so
/// the redundant parameterization can share the code.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertiaModel {
    pub sigma: SigmaParams,
    pub sigma3: f64,
}

impl InertiaModel {
    pub fn minimal(sigma: SigmaParams) -> Self {
        Self {
            sigma,
            sigma3: sigma.sigma3(),
        }
    }

    pub fn phi(&self, omega: &Vector3<f64>) -> Vector3<f64> {
        euler_phi_full(omega, self.sigma.sigma1, self.sigma.sigma2, self.sigma3)
    }
}

/// `q̇ = ½ Ω(ω) q`.
pub fn quaternion_rate(q: &Vector4<f64>, omega: &Vector3<f64>) -> Vector4<f64> {
    0.5 * raw_product(&Vector4::new(omega.x, omega.y, omega.z, 0.0), q)
}

fn body_rate(
    q: &Vector4<f64>,
    omega: &Vector3<f64>,
    rho_o_dot: &Vector3<f64>,
    model: &InertiaModel,
    input: &ProcessInput,
) -> StateDerivative {
    let b = disturbance_gain_diag(&model.sigma);
    StateDerivative {
        q_dot: quaternion_rate(q, omega),
        omega_dot: model.phi(omega) + b.component_mul(&input.eps_tau),
        rho_o_dot: *rho_o_dot,
        rho_o_ddot: input.eps_f,
    }
}

/// `ẋ = f(x, ε)` for the full target state.
pub fn state_derivative(
    x: &TargetState,
    eps_tau: &Vector3<f64>,
    eps_f: &Vector3<f64>,
) -> StateDerivative {
    let input = ProcessInput {
        eps_tau: *eps_tau,
        eps_f: *eps_f,
    };
    body_rate(
        &x.body.q.to_vector4(),
        &x.body.omega,
        &x.body.rho_o_dot,
        &InertiaModel::minimal(x.sigma),
        &input,
    )
}

/// One classical RK4 step of length `h` with the input held constant.
/// The quaternion is renormalized at the end of the step.
pub fn rk4_step(body: &BodyState, model: &InertiaModel, input: &ProcessInput, h: f64) -> BodyState {
    let q0 = body.q.to_vector4();
    let (w0, r0, v0) = (body.omega, body.rho_o, body.rho_o_dot);

    let k1 = body_rate(&q0, &w0, &v0, model, input);
    let q1 = q0 + 0.5 * h * k1.q_dot;
    let w1 = w0 + 0.5 * h * k1.omega_dot;
    let v1 = v0 + 0.5 * h * k1.rho_o_ddot;

    let k2 = body_rate(&q1, &w1, &v1, model, input);
    let q2 = q0 + 0.5 * h * k2.q_dot;
    let w2 = w0 + 0.5 * h * k2.omega_dot;
    let v2 = v0 + 0.5 * h * k2.rho_o_ddot;

    let k3 = body_rate(&q2, &w2, &v2, model, input);
    let q3 = q0 + h * k3.q_dot;
    let w3 = w0 + h * k3.omega_dot;
    let v3 = v0 + h * k3.rho_o_ddot;

    let k4 = body_rate(&q3, &w3, &v3, model, input);

    let sixth = h / 6.0;
    let q = q0 + sixth * (k1.q_dot + 2.0 * k2.q_dot + 2.0 * k3.q_dot + k4.q_dot);
    BodyState {
        q: UnitQuaternion::from_vector4(&q),
        omega: w0 + sixth * (k1.omega_dot + 2.0 * k2.omega_dot + 2.0 * k3.omega_dot + k4.omega_dot),
        rho_o: r0 + sixth * (k1.rho_o_dot + 2.0 * k2.rho_o_dot + 2.0 * k3.rho_o_dot + k4.rho_o_dot),
        rho_o_dot: v0
            + sixth * (k1.rho_o_ddot + 2.0 * k2.rho_o_ddot + 2.0 * k3.rho_o_ddot + k4.rho_o_ddot),
    }
}

/// Noise-free propagation over `dt`, in equal substeps no longer than `max_step`.
pub fn propagate_body(body: &BodyState, model: &InertiaModel, dt: f64, max_step: f64) -> BodyState {
    if dt <= 0.0 {
        return *body;
    }
    let n = (dt / max_step).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let mut b = *body;
    for _ in 0..n {
        b = rk4_step(&b, model, &ProcessInput::ZERO, h);
    }
    b
}

/// Noise-free propagation of a full target state.
pub fn propagate_target(x: &TargetState, dt: f64, max_step: f64) -> TargetState {
    TargetState {
        body: propagate_body(&x.body, &InertiaModel::minimal(x.sigma), dt, max_step),
        ..*x
    }
}
