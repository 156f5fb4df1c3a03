//! Noise-free extrapolation of the grapple fixture from an estimate.

use nalgebra::Vector3;

use crate::core_math::dynamics::{rk4_step, InertiaModel, ProcessInput};
use crate::core_math::state::{BodyState, TargetState};

/// Node spacing of the cached trajectory, s.
pub const EPHEMERIS_STEP: f64 = 0.01;

/// Grapple position, velocity and acceleration in {A}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrappleKinematics {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
}

/// Grapple kinematics of a target state with no disturbance acting.
pub fn grapple_kinematics(x: &TargetState, model: &InertiaModel) -> GrappleKinematics {
    let a = x.body.q.rotation_matrix();
    let w = x.body.omega;
    let wd = model.phi(&w);
    let r = x.varrho;
    GrappleKinematics {
        position: x.body.rho_o + a * r,
        velocity: x.body.rho_o_dot + a * w.cross(&r),
        acceleration: a * (wd.cross(&r) + w.cross(&w.cross(&r))),
    }
}

/// RK4 nodes from a snapshot, extended on demand. Queries between nodes
/// take one RK4 step of the remaining fraction from the node below, so the
/// result varies smoothly with the query time.
#[derive(Clone, Debug)]
pub struct Ephemeris {
    base: TargetState,
    model: InertiaModel,
    t0: f64,
    nodes: Vec<BodyState>,
}

impl Ephemeris {
    pub fn new(target: &TargetState, model: InertiaModel, t0: f64) -> Self {
        Self {
            base: *target,
            model,
            t0,
            nodes: vec![target.body],
        }
    }

    pub fn epoch(&self) -> f64 {
        self.t0
    }

    pub fn state_at(&mut self, t: f64) -> TargetState {
        let dt = (t - self.t0).max(0.0);
        let i = (dt / EPHEMERIS_STEP).floor() as usize;
        while self.nodes.len() <= i {
            let last = *self.nodes.last().expect("non-empty");
            self.nodes.push(rk4_step(&last, &self.model, &ProcessInput::ZERO, EPHEMERIS_STEP));
        }
        let rem = dt - i as f64 * EPHEMERIS_STEP;
        let body = if rem > 0.0 {
            rk4_step(&self.nodes[i], &self.model, &ProcessInput::ZERO, rem)
        } else {
            self.nodes[i]
        };
        TargetState { body, ..self.base }
    }

    pub fn grapple_at(&mut self, t: f64) -> GrappleKinematics {
        let x = self.state_at(t);
        grapple_kinematics(&x, &self.model)
    }
}

/// `(ρ(t_f), ρ̇(t_f))` by propagating the full dynamics from `t`.
pub fn predict_grapple(target: &TargetState, t: f64, tf: f64) -> (Vector3<f64>, Vector3<f64>) {
    let mut e = Ephemeris::new(target, InertiaModel::minimal(target.sigma), t);
    let k = e.grapple_at(tf);
    (k.position, k.velocity)
}
