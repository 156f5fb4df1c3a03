//! Linearized error-state dynamics `δẋ = F δx + G ε`.
//!
//! The attitude error is multiplicative, `δq = q ⊗ q̂⁻¹` (and `δμ = μ̂⁻¹ ⊗ μ`),
//! so the attitude rows are written in terms of the vector parts only.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::dynamics::InertiaModel;
use super::inertia::{disturbance_gain_diag, euler_phi_d_sigma, euler_phi_full_d_omega};
use super::quaternion::{skew, UnitQuaternion};
use super::state::{Parameterization, TargetState, NOISE_DIM};

/// `F` for the minimal 20-state model.
pub fn jacobian_f(x: &TargetState) -> DMatrix<f64> {
    jacobian_f_model(x, &InertiaModel::minimal(x.sigma), Parameterization::Minimal)
}

/// `G` for the minimal model.
pub fn jacobian_g(x: &TargetState) -> DMatrix<f64> {
    jacobian_g_model(x, Parameterization::Minimal)
}

pub fn jacobian_f_model(x: &TargetState, model: &InertiaModel, param: Parameterization) -> DMatrix<f64> {
    let n = param.dim();
    let mut f = DMatrix::zeros(n, n);
    let w = x.body.omega;
    let (iq, iw) = (Parameterization::Q, Parameterization::OMEGA);

    f.fixed_view_mut::<3, 3>(iq, iq).copy_from(&(-skew(&w)));
    f.fixed_view_mut::<3, 3>(iq, iw)
        .copy_from(&(0.5 * Matrix3::identity()));

    let d_omega = euler_phi_full_d_omega(&w, model.sigma.sigma1, model.sigma.sigma2, model.sigma3);
    f.fixed_view_mut::<3, 3>(iw, iw).copy_from(&d_omega);
    match param {
        Parameterization::Minimal => {
            f.fixed_view_mut::<3, 2>(iw, Parameterization::SIGMA)
                .copy_from(&euler_phi_d_sigma(&w, &model.sigma));
        }
        Parameterization::Redundant => {
            let d = Matrix3::from_diagonal(&Vector3::new(w.y * w.z, w.x * w.z, w.x * w.y));
            f.fixed_view_mut::<3, 3>(iw, Parameterization::SIGMA).copy_from(&d);
        }
    }

    f.fixed_view_mut::<3, 3>(Parameterization::RHO_O, Parameterization::RHO_O_DOT)
        .copy_from(&Matrix3::identity());
    f
}

pub fn jacobian_g_model(x: &TargetState, param: Parameterization) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(param.dim(), NOISE_DIM);
    let b = Matrix3::from_diagonal(&disturbance_gain_diag(&x.sigma));
    g.fixed_view_mut::<3, 3>(Parameterization::OMEGA, 0).copy_from(&b);
    g.fixed_view_mut::<3, 3>(Parameterization::RHO_O_DOT, 3)
        .copy_from(&Matrix3::identity());
    g
}

/// Applies an error-state correction to a reference state:
/// `q = δq ⊗ q̂`, `μ = μ̂ ⊗ δμ`, additive elsewhere. Returns the corrected
/// state and the corrected free `σ₃` (unchanged for the minimal model).
pub fn retract(
    x: &TargetState,
    sigma3: f64,
    param: Parameterization,
    dx: &DVector<f64>,
) -> (TargetState, f64) {
    debug_assert_eq!(dx.len(), param.dim());
    let seg = |i: usize| Vector3::new(dx[i], dx[i + 1], dx[i + 2]);
    let mut out = *x;
    let dq = UnitQuaternion::from_vector_part(&seg(Parameterization::Q));
    out.body.q = dq.product(&x.body.q);
    out.body.omega += seg(Parameterization::OMEGA);
    out.body.rho_o += seg(Parameterization::RHO_O);
    out.body.rho_o_dot += seg(Parameterization::RHO_O_DOT);
    out.sigma.sigma1 += dx[Parameterization::SIGMA];
    out.sigma.sigma2 += dx[Parameterization::SIGMA + 1];
    let s3 = match param {
        Parameterization::Minimal => out.sigma.sigma3(),
        Parameterization::Redundant => sigma3 + dx[Parameterization::SIGMA + 2],
    };
    out.varrho += seg(param.varrho());
    let dmu = UnitQuaternion::from_vector_part(&seg(param.mu()));
    out.mu = x.mu.product(&dmu);
    (out, s3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_math::dynamics::state_derivative;
    use crate::core_math::inertia::SigmaParams;
    use crate::core_math::quaternion::raw_product;
    use crate::core_math::state::{BodyState, STATE_DIM};
    use nalgebra::{Vector4, Vector6};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Error-state rate computed from two evaluations of the nonlinear
    /// model: the perturbed truth and the reference.
    fn error_rate(xh: &TargetState, dx: &DVector<f64>, eps: &Vector6<f64>) -> DVector<f64> {
        let (x, _) = retract(xh, xh.sigma.sigma3(), Parameterization::Minimal, dx);
        let tau = Vector3::new(eps[0], eps[1], eps[2]);
        let force = Vector3::new(eps[3], eps[4], eps[5]);
        let d = state_derivative(&x, &tau, &force);
        let dh = state_derivative(xh, &Vector3::zeros(), &Vector3::zeros());
        let qh_inv = xh.body.q.inverse().to_vector4();
        let qh_inv_dot = Vector4::new(-dh.q_dot[0], -dh.q_dot[1], -dh.q_dot[2], dh.q_dot[3]);
        let dq_dot = raw_product(&d.q_dot, &qh_inv) + raw_product(&x.body.q.to_vector4(), &qh_inv_dot);
        let mut out = DVector::zeros(STATE_DIM);
        for i in 0..3 {
            out[i] = dq_dot[i];
            out[3 + i] = d.omega_dot[i] - dh.omega_dot[i];
            out[6 + i] = d.rho_o_dot[i] - dh.rho_o_dot[i];
            out[9 + i] = d.rho_o_ddot[i] - dh.rho_o_ddot[i];
        }
        out
    }

    fn random_state(rng: &mut ChaCha8Rng) -> TargetState {
        let mut v = || Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let q = UnitQuaternion::from_rotation_vector(&(v() * 2.0));
        let omega = v() * 0.5;
        let rho_o = v();
        let rho_o_dot = v() * 0.01;
        let varrho = v() * 0.2;
        let mu = UnitQuaternion::from_rotation_vector(&(v() * 0.5));
        let sigma = SigmaParams::new(rng.random_range(-0.95..0.95), rng.random_range(-0.95..0.95));
        TargetState {
            body: BodyState { q, omega, rho_o, rho_o_dot },
            sigma,
            varrho,
            mu,
        }
    }

    fn fd_step(v: f64) -> f64 {
        1e-6f64.max(1e-7 * v.abs())
    }

    #[test]
    fn f_and_g_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let xh = random_state(&mut rng);
            let f = jacobian_f(&xh);
            let g = jacobian_g(&xh);
            for j in 0..STATE_DIM {
                let h = fd_step(0.0);
                let mut dp = DVector::zeros(STATE_DIM);
                dp[j] = h;
                let col = (error_rate(&xh, &dp, &Vector6::zeros()) - error_rate(&xh, &(-dp), &Vector6::zeros())) / (2.0 * h);
                for i in 0..STATE_DIM {
                    let tol = 1e-6f64.max(1e-4 * f[(i, j)].abs());
                    assert!((col[i] - f[(i, j)]).abs() < tol, "F[{i},{j}] analytic {} fd {}", f[(i, j)], col[i]);
                }
            }
            for j in 0..NOISE_DIM {
                let h = 1e-6;
                let mut e = Vector6::zeros();
                e[j] = h;
                let z = DVector::zeros(STATE_DIM);
                let col = (error_rate(&xh, &z, &e) - error_rate(&xh, &z, &(-e))) / (2.0 * h);
                for i in 0..STATE_DIM {
                    let tol = 1e-6f64.max(1e-4 * g[(i, j)].abs());
                    assert!((col[i] - g[(i, j)]).abs() < tol, "G[{i},{j}]");
                }
            }
        }
    }

    #[test]
    fn zero_rate_blocks_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut x = random_state(&mut rng);
        x.body.omega = Vector3::zeros();
        let f = jacobian_f(&x);
        assert!(f.view((3, 3), (3, 3)).iter().all(|v| *v == 0.0));
        assert!(f.view((3, 12), (3, 2)).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn attitude_block_is_minus_skew_omega() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_state(&mut rng);
        let f = jacobian_f(&x);
        assert_eq!(f.fixed_view::<3, 3>(0, 0).into_owned(), -skew(&x.body.omega));
        assert_eq!(f.fixed_view::<3, 3>(0, 3).into_owned(), 0.5 * Matrix3::identity());
    }

    #[test]
    fn redundant_layout_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_state(&mut rng);
        let model = InertiaModel { sigma: x.sigma, sigma3: 0.3 };
        let f = jacobian_f_model(&x, &model, Parameterization::Redundant);
        assert_eq!(f.shape(), (21, 21));
        let w = x.body.omega;
        assert_eq!(f[(5, 14)], w.x * w.y);
        assert_eq!(f[(5, 3)], 0.3 * w.y);
        assert_eq!(jacobian_g_model(&x, Parameterization::Redundant).shape(), (21, 6));
    }
}
