//! Quaternion algebra, minimum-parameter rigid-body dynamics and the
//! analytic Jacobians shared by the estimator and the simulator.

pub mod dynamics;
pub mod inertia;
pub mod jacobian;
pub mod pose;
pub mod quaternion;
pub mod state;

pub use dynamics::{
    propagate_body, propagate_target, rk4_step, state_derivative, InertiaModel, ProcessInput,
    StateDerivative,
};
pub use inertia::{
    disturbance_gain_b, euler_phi, sigma3_of, sigma_from_inertia, InertiaRatios, SigmaParams,
};
pub use jacobian::{jacobian_f, jacobian_f_model, jacobian_g, jacobian_g_model, retract};
pub use pose::Pose;
pub use quaternion::{quat_inverse, quat_product, rotation_matrix, skew, UnitQuaternion};
pub use state::{BodyState, Parameterization, TargetState, MEAS_DIM, NOISE_DIM, STATE_DIM};
