//! Multiplicative EKF over `[δq_v, δω, δρ_o, δρ̇_o, δσ, δϱ, δμ_v]`.

use std::collections::VecDeque;

use nalgebra::{Cholesky, DMatrix, DVector, Matrix3, Matrix6, Vector3, Vector6};

use super::config::FilterConfig;
use crate::core_math::dynamics::{propagate_body, InertiaModel};
use crate::core_math::inertia::SigmaParams;
use crate::core_math::jacobian::{jacobian_f_model, retract};
use crate::core_math::pose::Pose;
use crate::core_math::quaternion::{skew, UnitQuaternion};
use crate::core_math::state::{BodyState, Parameterization, TargetState, MEAS_DIM, NOISE_DIM};

type P = Parameterization;

/// Registered pose handed to the filter, `z = [ρ̄; vec(μ̂⁻¹ ⊗ η̄ ⊗ q̂⁻¹)]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub rho_bar: Vector3<f64>,
    pub eta_bar: UnitQuaternion,
    /// `γ`.
    pub healthy: bool,
    pub timestamp: f64,
}

impl Measurement {
    pub fn from_pose(pose: &Pose, healthy: bool, timestamp: f64) -> Self {
        Self { rho_bar: pose.rho, eta_bar: pose.eta, healthy, timestamp }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Innovation {
    /// `α = z − h(0)`.
    pub alpha: Vector6<f64>,
    /// `S = H P⁻ Hᵀ + R̂`.
    pub s: Matrix6<f64>,
    pub h: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateInfo {
    pub applied: bool,
    /// Set when `S` was too ill-conditioned to invert.
    pub degenerate: bool,
    /// Which `σ` components were gain-projected.
    pub projected: [bool; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub xhat: TargetState,
    /// Free third ratio for the redundant parameterization; tracks `σ₃(σ₁, σ₂)` otherwise.
    pub sigma3: f64,
    pub param: Parameterization,
    pub p: DMatrix<f64>,
    /// Windowed residual covariance `Σ`.
    pub sigma_innov: Matrix6<f64>,
    pub residual_window: VecDeque<Vector6<f64>>,
    /// Residuals recorded so far.
    pub residual_count: usize,
    pub r_hat: Matrix6<f64>,
    /// Update epochs seen (healthy or not).
    pub k: usize,
    pub time: f64,
}

/// `B(σ)` with its denominators kept away from zero, so the unconstrained
/// comparison filter stays finite when its `σ` leaves the feasible box.
fn guarded_gain(sigma: &SigmaParams) -> Vector3<f64> {
    let (s1, s2) = (sigma.sigma1, sigma.sigma2);
    let g = |d: f64| if d.abs() < 0.05 { 0.05f64.copysign(d) } else { d };
    Vector3::new(
        1.0 + (2.0 + s1 * s2 + s1) / g(1.0 - s2),
        1.0 + (2.0 + s1 * s2 - s2) / g(1.0 + s1),
        1.0 + (2.0 + s1 - s2) / g(1.0 + s1 * s2),
    )
}

impl FilterState {
    /// First-fix initialization from a registered pose.
    ///
    /// The grapple pose is known, the split between body and offset is not:
    /// the position and attitude blocks are correlated with the `ϱ` and `μ`
    /// blocks so the grapple pose itself keeps only the measurement spread.
    pub fn from_first_fix(pose: &Pose, t: f64, param: Parameterization, cfg: &FilterConfig) -> Self {
        let xhat = TargetState {
            body: BodyState {
                q: pose.eta,
                omega: Vector3::zeros(),
                rho_o: pose.rho,
                rho_o_dot: Vector3::zeros(),
            },
            sigma: SigmaParams::new(0.0, 0.0),
            varrho: Vector3::zeros(),
            mu: UnitQuaternion::IDENTITY,
        };
        let n = param.dim();
        let mut p = DMatrix::zeros(n, n);
        let i3 = Matrix3::identity();
        let set = |p: &mut DMatrix<f64>, r: usize, c: usize, m: Matrix3<f64>| {
            p.fixed_view_mut::<3, 3>(r, c).copy_from(&m);
            if r != c {
                p.fixed_view_mut::<3, 3>(c, r).copy_from(&m.transpose());
            }
        };
        let (vr, vm) = (cfg.p0_varrho_std.powi(2), cfg.p0_mu_std.powi(2));
        let a = pose.eta.rotation_matrix();
        set(&mut p, P::Q, P::Q, i3 * (vm + cfg.p0_attitude_std.powi(2)));
        set(&mut p, P::OMEGA, P::OMEGA, i3 * cfg.p0_rate_std.powi(2));
        set(&mut p, P::RHO_O, P::RHO_O, i3 * (vr + cfg.p0_position_std.powi(2)));
        set(&mut p, P::RHO_O_DOT, P::RHO_O_DOT, i3 * cfg.p0_velocity_std.powi(2));
        for i in 0..param.sigma_len() {
            p[(P::SIGMA + i, P::SIGMA + i)] = cfg.p0_sigma_std.powi(2);
        }
        set(&mut p, param.varrho(), param.varrho(), i3 * vr);
        set(&mut p, param.mu(), param.mu(), i3 * vm);
        set(&mut p, P::RHO_O, param.varrho(), -a * vr);
        set(&mut p, P::Q, param.mu(), -i3 * vm);

        let mut r = Matrix6::zeros();
        for i in 0..3 {
            r[(i, i)] = cfg.r0_position_std.powi(2);
            r[(i + 3, i + 3)] = cfg.r0_attitude_std.powi(2);
        }
        Self {
            xhat,
            sigma3: 0.0,
            param,
            p,
            sigma_innov: Matrix6::zeros(),
            residual_window: VecDeque::with_capacity(cfg.window + 1),
            residual_count: 0,
            r_hat: r,
            k: 0,
            time: t,
        }
    }

    /// Initialization from two consecutive healthy fixes `dt` apart.
    ///
    /// Same as [`FilterState::from_first_fix`] at the second fix, with `ω̂`
    /// and `ρ̇̂_o` seeded by finite differences of the two poses.
    pub fn from_fix_pair(
        first: &Pose,
        second: &Pose,
        dt: f64,
        t: f64,
        param: Parameterization,
        cfg: &FilterConfig,
    ) -> Self {
        let mut fs = Self::from_first_fix(second, t, param, cfg);
        if dt > 0.0 {
            let d = second.eta.product(&first.eta.inverse()).canonical();
            fs.xhat.body.omega = d.rotation_vector() / dt;
            fs.xhat.body.rho_o_dot = (second.rho - first.rho) / dt;
        }
        fs
    }

    /// State with an explicit covariance, for tests and tooling.
    pub fn with_covariance(xhat: TargetState, p: DMatrix<f64>, r_hat: Matrix6<f64>, t: f64) -> Self {
        let param = if p.nrows() == P::Minimal.dim() { P::Minimal } else { P::Redundant };
        Self {
            xhat,
            sigma3: xhat.sigma.sigma3(),
            param,
            p,
            sigma_innov: Matrix6::zeros(),
            residual_window: VecDeque::new(),
            residual_count: 0,
            r_hat,
            k: 0,
            time: t,
        }
    }

    pub fn dim(&self) -> usize {
        self.param.dim()
    }

    pub fn model(&self) -> InertiaModel {
        match self.param {
            P::Minimal => InertiaModel::minimal(self.xhat.sigma),
            P::Redundant => InertiaModel { sigma: self.xhat.sigma, sigma3: self.sigma3 },
        }
    }

    pub fn f_matrix(&self) -> DMatrix<f64> {
        jacobian_f_model(&self.xhat, &self.model(), self.param)
    }

    pub fn g_matrix(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.dim(), NOISE_DIM);
        let b = Matrix3::from_diagonal(&guarded_gain(&self.xhat.sigma));
        g.fixed_view_mut::<3, 3>(P::OMEGA, 0).copy_from(&b);
        g.fixed_view_mut::<3, 3>(P::RHO_O_DOT, 3).copy_from(&Matrix3::identity());
        g
    }

    /// `H` evaluated after reset (`δq̂_v = δμ̂_v = 0`).
    pub fn h_matrix(&self) -> DMatrix<f64> {
        measurement_matrix(&self.xhat, self.param)
    }

    /// Predicted grapple pose `h(0)`.
    pub fn predicted_pose(&self) -> Pose {
        Pose::new(self.xhat.grapple_position(), self.xhat.grapple_attitude())
    }

    /// Noise-free extrapolation of the estimate to `t`.
    pub fn extrapolate(&self, dt: f64) -> TargetState {
        TargetState {
            body: propagate_body(&self.xhat.body, &self.model(), dt, 0.01),
            ..self.xhat
        }
    }

    /// Trace of the `(σ, ϱ, μ_v)` block of `P`.
    pub fn parameter_trace(&self) -> f64 {
        (P::SIGMA..self.dim()).map(|i| self.p[(i, i)]).sum()
    }

    pub fn is_covariance_healthy(&self, tol: f64) -> bool {
        let asym = (&self.p - self.p.transpose()).amax();
        asym <= tol && self.p.clone().symmetric_eigenvalues().min() >= -tol
    }
}

/// `H` for the reset linearization point.
pub fn measurement_matrix(x: &TargetState, param: Parameterization) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(MEAS_DIM, param.dim());
    let a = x.body.q.rotation_matrix();
    h.fixed_view_mut::<3, 3>(0, P::Q).copy_from(&(-2.0 * a * skew(&x.varrho)));
    h.fixed_view_mut::<3, 3>(0, P::RHO_O).copy_from(&Matrix3::identity());
    h.fixed_view_mut::<3, 3>(0, param.varrho()).copy_from(&a);
    h.fixed_view_mut::<3, 3>(3, P::Q).copy_from(&Matrix3::identity());
    h.fixed_view_mut::<3, 3>(3, param.mu()).copy_from(&Matrix3::identity());
    h
}

/// `Φ ≈ I + FΔt + ½(FΔt)²`.
pub fn transition_matrix(f: &DMatrix<f64>, dt: f64) -> DMatrix<f64> {
    let fd = f * dt;
    DMatrix::identity(f.nrows(), f.ncols()) + &fd + 0.5 * &fd * &fd
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let t = p.transpose();
    *p = 0.5 * (&*p + t);
}

/// Propagation result, including the transition over the whole interval.
pub struct Propagated {
    pub state: FilterState,
    pub phi: DMatrix<f64>,
}

/// Time update over `dt`. Covariance substeps are at most `cfg.max_step`
/// long, each linearized at its own starting estimate.
pub fn propagate(fs: &FilterState, dt: f64, cfg: &FilterConfig) -> Propagated {
    let n = fs.dim();
    let mut out = fs.clone();
    let mut phi_total = DMatrix::identity(n, n);
    if dt <= 0.0 {
        return Propagated { state: out, phi: phi_total };
    }
    let steps = ((dt / cfg.max_step) - 1e-9).ceil().max(1.0) as usize;
    let h = dt / steps as f64;
    let mut qc = DMatrix::zeros(NOISE_DIM, NOISE_DIM);
    for i in 0..3 {
        qc[(i, i)] = cfg.psd_torque;
        qc[(i + 3, i + 3)] = cfg.psd_force;
    }
    for _ in 0..steps {
        let phi = transition_matrix(&out.f_matrix(), h);
        let g = out.g_matrix();
        let qk = &g * &qc * g.transpose() * h;
        out.p = &phi * &out.p * phi.transpose() + qk;
        symmetrize(&mut out.p);
        out.xhat.body = propagate_body(&out.xhat.body, &out.model(), h, 0.01);
        phi_total = &phi * phi_total;
    }
    out.time = fs.time + dt;
    Propagated { state: out, phi: phi_total }
}

/// `α`, `S` and `H` for a registered pose.
pub fn innovation(fs: &FilterState, z: &Measurement) -> Innovation {
    let x = &fs.xhat;
    let d_eta = x.mu.inverse().product(&z.eta_bar).product(&x.body.q.inverse()).canonical();
    let dp = z.rho_bar - x.grapple_position();
    let alpha = Vector6::new(dp.x, dp.y, dp.z, d_eta.vector().x, d_eta.vector().y, d_eta.vector().z);
    let h = fs.h_matrix();
    let hph = &h * &fs.p * h.transpose();
    let s = Matrix6::from_fn(|i, j| hph[(i, j)]) + fs.r_hat;
    Innovation { alpha, s, h }
}

fn condition(s: &Matrix6<f64>) -> f64 {
    let e = s.symmetric_eigenvalues();
    let (lo, hi) = (e.min(), e.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Measurement update. A measurement with `healthy = false` leaves the
/// state untouched apart from the epoch counter.
pub fn update(fs: &FilterState, z: &Measurement, cfg: &FilterConfig) -> (FilterState, UpdateInfo) {
    let mut out = fs.clone();
    out.k += 1;
    let mut info = UpdateInfo::default();
    if !z.healthy {
        return (out, info);
    }
    let inn = innovation(fs, z);
    let chol = match Cholesky::new(inn.s) {
        Some(c) if condition(&inn.s) <= cfg.max_condition => c,
        _ => {
            info.degenerate = true;
            return (out, info);
        }
    };
    let n = fs.dim();
    let pht = &fs.p * inn.h.transpose();
    // K = P Hᵀ S⁻¹ via Sᵀ Kᵀ = H P.
    let mut k = DMatrix::zeros(n, MEAS_DIM);
    for r in 0..n {
        let row = Vector6::from_fn(|j, _| pht[(r, j)]);
        let sol = chol.solve(&row);
        for j in 0..MEAS_DIM {
            k[(r, j)] = sol[j];
        }
    }
    let alpha = DVector::from_column_slice(inn.alpha.as_slice());
    let mut dx = &k * &alpha;

    if cfg.constrained {
        let bound = 1.0 - cfg.box_margin;
        let prior = [fs.xhat.sigma.sigma1, fs.xhat.sigma.sigma2, fs.sigma3];
        let m = match fs.param {
            P::Minimal => 2,
            P::Redundant => 3,
        };
        for i in 0..m {
            let idx = P::SIGMA + i;
            let step = dx[idx];
            let post = prior[i] + step;
            if step != 0.0 && post.abs() > bound {
                let beta = ((step.signum() * bound - prior[i]) / step).clamp(0.0, 1.0);
                dx[idx] *= beta;
                k.row_mut(idx).scale_mut(beta);
                info.projected[i] = true;
            }
        }
    }

    let kh = &k * &inn.h;
    let ikh = DMatrix::identity(n, n) - kh;
    out.p = if info.projected.iter().any(|p| *p) {
        let r = DMatrix::from_fn(MEAS_DIM, MEAS_DIM, |i, j| fs.r_hat[(i, j)]);
        &ikh * &fs.p * ikh.transpose() + &k * r * k.transpose()
    } else {
        &ikh * &fs.p
    };
    symmetrize(&mut out.p);

    let (x, s3) = retract(&fs.xhat, fs.sigma3, fs.param, &dx);
    out.xhat = x;
    out.sigma3 = s3;
    info.applied = true;

    let hdx = &inn.h * &dx;
    let e = inn.alpha - Vector6::from_fn(|i, _| hdx[i]);
    push_residual(&mut out, e, cfg.window);
    (out, info)
}

/// Records a post-update residual and advances `Σ` recursively: a growing
/// average until `w` residuals exist, then a sliding window of the last `w`.
pub fn push_residual(fs: &mut FilterState, e: Vector6<f64>, window: usize) {
    fs.residual_count += 1;
    let n = fs.residual_count as f64;
    let eet = e * e.transpose();
    fs.residual_window.push_back(e);
    if fs.residual_window.len() <= window {
        fs.sigma_innov = fs.sigma_innov * ((n - 1.0) / n) + eet / n;
    } else {
        let old = fs.residual_window.pop_front().expect("window is non-empty");
        fs.sigma_innov += (eet - old * old.transpose()) / window as f64;
    }
}

/// `R̂ = Σ + H P⁺ Hᵀ`, lifted by `λ_floor·I` if its spectrum dips below
/// `λ_floor`. `R̂` is left alone until `adapt_after` residuals exist or when
/// adaptation is disabled.
pub fn adapt_r(fs: &FilterState, cfg: &FilterConfig) -> FilterState {
    let mut out = fs.clone();
    if !cfg.adaptive || fs.residual_count == 0 || fs.residual_count < cfg.adapt_after {
        return out;
    }
    let h = fs.h_matrix();
    let hph = &h * &fs.p * h.transpose();
    let mut r = fs.sigma_innov + Matrix6::from_fn(|i, j| hph[(i, j)]);
    r = 0.5 * (r + r.transpose());
    if r.symmetric_eigenvalues().min() < cfg.lambda_floor {
        r += Matrix6::identity() * cfg.lambda_floor;
    }
    out.r_hat = r;
    out
}

/// Error state `x ⊖ x̂` in the filter's parameterization.
pub fn error_state(truth: &TargetState, est: &FilterState) -> DVector<f64> {
    let x = &est.xhat;
    let mut d = DVector::zeros(est.dim());
    let dq = truth.body.q.product(&x.body.q.inverse()).canonical();
    let dmu = x.mu.inverse().product(&truth.mu).canonical();
    let put = |d: &mut DVector<f64>, i: usize, v: Vector3<f64>| d.fixed_rows_mut::<3>(i).copy_from(&v);
    put(&mut d, P::Q, dq.vector());
    put(&mut d, P::OMEGA, truth.body.omega - x.body.omega);
    put(&mut d, P::RHO_O, truth.body.rho_o - x.body.rho_o);
    put(&mut d, P::RHO_O_DOT, truth.body.rho_o_dot - x.body.rho_o_dot);
    d[P::SIGMA] = truth.sigma.sigma1 - x.sigma.sigma1;
    d[P::SIGMA + 1] = truth.sigma.sigma2 - x.sigma.sigma2;
    if est.param == P::Redundant {
        d[P::SIGMA + 2] = truth.sigma.sigma3() - est.sigma3;
    }
    put(&mut d, est.param.varrho(), truth.varrho - x.varrho);
    put(&mut d, est.param.mu(), dmu.vector());
    d
}
