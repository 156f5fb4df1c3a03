//! Ground-truth target propagation with sampled force/torque disturbances.

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::core_math::dynamics::{rk4_step, InertiaModel, ProcessInput};
use crate::core_math::state::TargetState;

/// Truth integrator step, s.
pub const TRUTH_STEP: f64 = 0.01;

/// Covariances of the disturbance samples, one draw per truth substep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProcessNoise {
    /// `E[ε_f ε_fᵀ]`, m²/s⁴.
    pub cov_f: Matrix3<f64>,
    /// `E[ε_τ ε_τᵀ]`, rad²/s⁴.
    pub cov_tau: Matrix3<f64>,
}

impl ProcessNoise {
    pub const ZERO: ProcessNoise = ProcessNoise {
        cov_f: Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        cov_tau: Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    };

    pub fn isotropic(var_f: f64, var_tau: f64) -> Self {
        Self {
            cov_f: Matrix3::identity() * var_f,
            cov_tau: Matrix3::identity() * var_tau,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.cov_f.iter().all(|v| *v == 0.0) && self.cov_tau.iter().all(|v| *v == 0.0)
    }
}

/// Symmetric square root `L Lᵀ = C` of a PSD matrix.
fn sqrt_psd(c: &Matrix3<f64>) -> Matrix3<f64> {
    let e = c.symmetric_eigen();
    let d = Matrix3::from_diagonal(&e.eigenvalues.map(|l| l.max(0.0).sqrt()));
    e.eigenvectors * d * e.eigenvectors.transpose()
}

/// Stateful sampler; one instance per scenario so the disturbance stream
/// stays continuous across sensor epochs.
#[derive(Clone, Debug)]
pub struct TruthPropagator {
    rng: ChaCha8Rng,
    l_f: Matrix3<f64>,
    l_tau: Matrix3<f64>,
    zero: bool,
}

impl TruthPropagator {
    pub fn new(noise: &ProcessNoise, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            l_f: sqrt_psd(&noise.cov_f),
            l_tau: sqrt_psd(&noise.cov_tau),
            zero: noise.is_zero(),
        }
    }

    fn normal3(&mut self) -> Vector3<f64> {
        Vector3::from_fn(|_, _| StandardNormal.sample(&mut self.rng))
    }

    /// Draws `[ε_τ, ε_f]`.
    pub fn sample(&mut self) -> ProcessInput {
        if self.zero {
            return ProcessInput::ZERO;
        }
        let eps_tau = self.l_tau * self.normal3();
        let eps_f = self.l_f * self.normal3();
        ProcessInput { eps_tau, eps_f }
    }

    /// One RK4 substep of length `h` with a fresh held disturbance.
    pub fn substep(&mut self, x: &TargetState, h: f64) -> TargetState {
        let input = self.sample();
        TargetState {
            body: rk4_step(&x.body, &InertiaModel::minimal(x.sigma), &input, h),
            ..*x
        }
    }

    /// Advances by `dt` in equal substeps no longer than [`TRUTH_STEP`].
    pub fn advance(&mut self, x: &TargetState, dt: f64) -> TargetState {
        if dt <= 0.0 {
            return *x;
        }
        let n = ((dt / TRUTH_STEP) - 1e-9).ceil().max(1.0) as usize;
        let h = dt / n as f64;
        let mut s = *x;
        for _ in 0..n {
            s = self.substep(&s, h);
        }
        s
    }
}

/// One-shot propagation from a seed.
pub fn propagate_truth(x: &TargetState, dt: f64, noise: &ProcessNoise, seed: u64) -> TargetState {
    TruthPropagator::new(noise, seed).advance(x, dt)
}
