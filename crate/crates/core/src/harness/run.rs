//! One closed-loop scenario on integer plant ticks.

use std::io::Write;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::ScenarioConfig;
use crate::core_math::dynamics::{rk4_step, InertiaModel, ProcessInput};
use crate::core_math::pose::Pose;
use crate::core_math::quaternion::UnitQuaternion;
use crate::core_math::state::{Parameterization, TargetState};
use crate::error::Result;
use crate::estimator::{
    adapt_r, detect_fault, innovation, propagate, update, ConvergenceMonitor, FilterConfig, FilterState, Measurement,
};
use crate::guidance::{replan, solve_rendezvous, RendezvousProblem, RendezvousSolution};
use crate::registration::{icp_register, IcpConfig, IcpStatus, RegistrationResult};
use crate::sim::{render_scan, step_chaser, PointCloud, SurfaceModel, TruthPropagator};

const STREAM_TRUTH: u64 = 1;
const STREAM_SENSOR: u64 = 2;
const STREAM_ACQUISITION: u64 = 3;

/// SplitMix64 mix of `(seed, stream, index)` into an independent RNG seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FailureStage {
    /// The estimator never latched convergence.
    NoConvergence,
    /// No rendezvous solution was found after departure.
    Planning,
    /// The run ended before the planned intercept.
    Timeout,
    /// Intercept reached outside the capture envelope or speed limit.
    Capture,
    /// The estimator covariance lost symmetry or definiteness.
    Numerical,
}

impl FailureStage {
    pub fn label(self) -> &'static str {
        match self {
            FailureStage::NoConvergence => "no convergence",
            FailureStage::Planning => "planning",
            FailureStage::Timeout => "timeout",
            FailureStage::Capture => "capture",
            FailureStage::Numerical => "numerical",
        }
    }
}

/// Snapshot of the loop at one sensor epoch, after the planner tick.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub t: f64,
    pub truth: Pose,
    pub points: usize,
    pub icp: Option<Pose>,
    pub fit_error: f64,
    pub icp_status: IcpStatus,
    pub gamma: bool,
    /// Estimated grapple pose.
    pub estimate: Option<Pose>,
    pub omega: Vector3<f64>,
    pub sigma: [f64; 2],
    pub varrho: Vector3<f64>,
    pub p_trace: f64,
    pub parameter_trace: f64,
    pub r_trace: f64,
    pub converged: bool,
    pub blackout: bool,
    pub plan_tf: Option<f64>,
    pub plan_residual: Option<f64>,
    pub chaser_r: Vector3<f64>,
    pub chaser_r_dot: Vector3<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    /// First healthy registration.
    pub acquired_at: Option<f64>,
    pub converged_at: Option<f64>,
    pub departure_at: Option<f64>,
    pub occlusion_at: Option<f64>,
    pub intercept_at: Option<f64>,
    /// Intercept time predicted by the first plan.
    pub first_plan_tf: Option<f64>,
    /// `‖r − ρ‖` against the truth at intercept, m; NaN without intercept.
    pub position_error_at_capture: f64,
    /// `‖ṙ − ρ̇‖` at intercept, m/s; NaN without intercept.
    pub relative_speed_at_capture: f64,
    /// Grapple position error of the primary estimate extrapolated to intercept, m.
    pub prediction_error: Option<f64>,
    /// Same for the unconstrained redundant shadow filter.
    pub shadow_prediction_error: Option<f64>,
    pub success: bool,
    pub failure_stage: Option<FailureStage>,
    pub epochs: Vec<EpochRecord>,
    pub plan: Option<RendezvousSolution>,
}

impl RunReport {
    pub const CSV_HEADER: &'static str = "t,truth_x,truth_y,truth_z,truth_qx,truth_qy,truth_qz,truth_qw,\
points,icp_x,icp_y,icp_z,icp_qx,icp_qy,icp_qz,icp_qw,fit_error,icp_status,gamma,\
est_x,est_y,est_z,est_qx,est_qy,est_qz,est_qw,omega_x,omega_y,omega_z,sigma1,sigma2,\
varrho_x,varrho_y,varrho_z,p_trace,parameter_trace,r_trace,converged,blackout,plan_tf,plan_residual,\
chaser_x,chaser_y,chaser_z,chaser_vx,chaser_vy,chaser_vz";

    /// Per-epoch CSV. Missing values are written as `NaN`.
    pub fn write_epochs_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        let nan_pose = [f64::NAN; 7];
        let pose7 = |p: &Option<Pose>| match p {
            Some(p) => {
                let v = p.eta.vector();
                [p.rho.x, p.rho.y, p.rho.z, v.x, v.y, v.z, p.eta.scalar()]
            }
            None => nan_pose,
        };
        for e in &self.epochs {
            let mut f: Vec<String> = vec![e.t.to_string()];
            f.extend(pose7(&Some(e.truth)).iter().map(|x| x.to_string()));
            f.push(e.points.to_string());
            f.extend(pose7(&e.icp).iter().map(|x| x.to_string()));
            f.push(e.fit_error.to_string());
            f.push(format!("{:?}", e.icp_status).to_lowercase());
            f.push(u8::from(e.gamma).to_string());
            f.extend(pose7(&e.estimate).iter().map(|x| x.to_string()));
            f.extend(e.omega.iter().map(|x| x.to_string()));
            f.extend(e.sigma.iter().map(|x| x.to_string()));
            f.extend(e.varrho.iter().map(|x| x.to_string()));
            f.push(e.p_trace.to_string());
            f.push(e.parameter_trace.to_string());
            f.push(e.r_trace.to_string());
            f.push(u8::from(e.converged).to_string());
            f.push(u8::from(e.blackout).to_string());
            f.push(e.plan_tf.unwrap_or(f64::NAN).to_string());
            f.push(e.plan_residual.unwrap_or(f64::NAN).to_string());
            f.extend(e.chaser_r.iter().map(|x| x.to_string()));
            f.extend(e.chaser_r_dot.iter().map(|x| x.to_string()));
            writeln!(w, "{}", f.join(","))?;
        }
        Ok(())
    }

    pub fn epochs_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_epochs_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

fn unit_normal(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
        let n: f64 = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// True grapple pose perturbed by a fixed angle about a random axis and a
/// fixed offset in a random direction.
pub fn acquisition_pose(truth: &Pose, angle: f64, offset: f64, seed: u64) -> Pose {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = unit_normal(&mut rng);
    let dir = unit_normal(&mut rng);
    Pose::new(truth.rho + dir * offset, UnitQuaternion::from_axis_angle(&axis, angle).product(&truth.eta))
}

struct Estimator {
    fs: FilterState,
    cfg: FilterConfig,
}

impl Estimator {
    fn new(first: &(Pose, f64), pose: &Pose, t: f64, param: Parameterization, cfg: FilterConfig) -> Self {
        Self {
            fs: FilterState::from_fix_pair(&first.0, pose, t - first.1, t, param, &cfg),
            cfg,
        }
    }

    fn propagate_to(&mut self, t: f64) {
        let dt = t - self.fs.time;
        if dt > 0.0 {
            self.fs = propagate(&self.fs, dt, &self.cfg).state;
        }
    }

    /// Gate, update and adapt on one registration. Returns `γ`.
    fn process(&mut self, result: &RegistrationResult, eps_threshold: f64, t: f64) -> bool {
        let pose = result.pose();
        let z = Measurement::from_pose(&pose, true, t);
        let inn = innovation(&self.fs, &z);
        let gamma = detect_fault(result, &inn.alpha, &inn.s, eps_threshold, &self.cfg);
        let z = Measurement::from_pose(&pose, gamma, t);
        let (fs, info) = update(&self.fs, &z, &self.cfg);
        self.fs = if info.applied { adapt_r(&fs, &self.cfg) } else { fs };
        gamma
    }

    fn healthy(&self) -> bool {
        let scale = self.fs.p.amax().max(1.0);
        self.fs.xhat.is_valid() && self.fs.is_covariance_healthy(1e-9 * scale)
    }

    fn predicted_grapple_at(&self, t: f64) -> Vector3<f64> {
        self.fs.extrapolate(t - self.fs.time).grapple_position()
    }
}

/// Runs the scenario to intercept or to the end of its duration. Errors are
/// configuration errors only; loop failures are reported in the result.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate()?;
    let model = cfg.surface_model()?;
    let icp_cfg = cfg.icp_config(&model);
    run_with_model(cfg, &model, &icp_cfg)
}

pub fn run_with_model(cfg: &ScenarioConfig, model: &SurfaceModel, icp_cfg: &IcpConfig) -> Result<RunReport> {
    cfg.validate()?;
    icp_cfg.validate()?;
    let sensor = cfg.sensor_config();
    let plant_dt = 1.0 / cfg.rates.plant;
    let sensor_ticks = cfg.sensor_ticks();
    let planner_ticks = cfg.planner_ticks();
    let total_ticks = (cfg.duration * cfg.rates.plant).round() as usize;
    let mut truth = cfg.initial_target()?;
    let mut truth_prop = TruthPropagator::new(&cfg.process_noise(), derive_seed(cfg.seed, STREAM_TRUTH, 0));
    let (mut r, mut r_dot) = cfg.chaser_start();

    let mut report = RunReport {
        name: cfg.name.clone(),
        seed: cfg.seed,
        acquired_at: None,
        converged_at: None,
        departure_at: None,
        occlusion_at: None,
        intercept_at: None,
        first_plan_tf: None,
        position_error_at_capture: f64::NAN,
        relative_speed_at_capture: f64::NAN,
        prediction_error: None,
        shadow_prediction_error: None,
        success: false,
        failure_stage: None,
        epochs: Vec::new(),
        plan: None,
    };
    let mut first_fix: Option<(Pose, f64)> = None;
    let mut primary: Option<Estimator> = None;
    let mut shadow: Option<Estimator> = None;
    let mut monitor = ConvergenceMonitor::new();
    let mut plan: Option<RendezvousSolution> = None;

    for n in 0..=total_ticks {
        let t = n as f64 * plant_dt;

        if n % sensor_ticks == 0 {
            let epoch = (n / sensor_ticks) as u64;
            for est in [primary.as_mut(), shadow.as_mut()].into_iter().flatten() {
                est.propagate_to(t);
            }
            if report.occlusion_at.is_none() && cfg.terminal_blackout > 0.0 {
                if let Some(p) = &plan {
                    if t >= p.tf - cfg.terminal_blackout {
                        report.occlusion_at = Some(t);
                    }
                }
            }
            let blackout = report.occlusion_at.is_some();
            let truth_pose = Pose::new(truth.grapple_position(), truth.grapple_attitude());
            let cloud = if blackout {
                PointCloud::new(Vec::new(), t)
            } else {
                render_scan(model, &truth_pose, &sensor, &cfg.faults, t, derive_seed(cfg.seed, STREAM_SENSOR, epoch))
            };
            let seed_pose = match (&primary, &first_fix) {
                (Some(est), _) => est.fs.predicted_pose(),
                (None, Some((pose, _))) => *pose,
                (None, None) => acquisition_pose(
                    &truth_pose,
                    cfg.acquisition.angle_deg.to_radians(),
                    cfg.acquisition.offset,
                    derive_seed(cfg.seed, STREAM_ACQUISITION, epoch),
                ),
            };
            let result = icp_register(&cloud, model, &seed_pose, icp_cfg);

            let mut gamma = false;
            match primary.as_mut() {
                None => {
                    if result.healthy {
                        let fix = result.pose();
                        if let Some(first) = first_fix.take() {
                            primary = Some(Estimator::new(&first, &fix, t, Parameterization::Minimal, cfg.filter));
                            shadow = Some(Estimator::new(
                                &first,
                                &fix,
                                t,
                                Parameterization::Redundant,
                                cfg.filter.unconstrained(),
                            ));
                            report.acquired_at = Some(t);
                        } else {
                            first_fix = Some((fix, t));
                        }
                        gamma = true;
                    } else {
                        first_fix = None;
                    }
                }
                Some(est) => {
                    gamma = est.process(&result, icp_cfg.eps_threshold, t);
                    if let Some(sh) = shadow.as_mut() {
                        sh.process(&result, icp_cfg.eps_threshold, t);
                    }
                    if !est.healthy() {
                        report.failure_stage = Some(FailureStage::Numerical);
                        break;
                    }
                    if monitor.observe(&est.fs, t, &cfg.filter) && report.converged_at.is_none() {
                        report.converged_at = monitor.latched_at();
                    }
                }
            }

            if n % planner_ticks == 0 {
                if let (Some(latch), None) = (report.converged_at, report.departure_at) {
                    if t >= latch + cfg.departure_hold - 1e-9 {
                        report.departure_at = Some(t);
                    }
                }
                if let (Some(_), Some(est)) = (report.departure_at, primary.as_ref()) {
                    let problem = RendezvousProblem {
                        r0: r,
                        r0_dot: r_dot,
                        target: est.fs.xhat,
                        a_max: cfg.a_max,
                        t,
                    };
                    plan = match plan.take() {
                        None => solve_rendezvous(&problem, &cfg.solver).ok(),
                        Some(p) if p.tf - t > cfg.replan_freeze => Some(replan(&problem, &p, &cfg.solver)),
                        Some(p) => Some(p),
                    };
                    if report.first_plan_tf.is_none() {
                        report.first_plan_tf = plan.as_ref().map(|p| p.tf);
                    }
                }
            }

            let est = primary.as_ref().map(|e| &e.fs);
            report.epochs.push(EpochRecord {
                t,
                truth: truth_pose,
                points: cloud.len(),
                icp: (result.status != IcpStatus::Failed).then(|| result.pose()),
                fit_error: result.fit_error,
                icp_status: result.status,
                gamma,
                estimate: est.map(|f| f.predicted_pose()),
                omega: est.map_or(Vector3::repeat(f64::NAN), |f| f.xhat.body.omega),
                sigma: est.map_or([f64::NAN; 2], |f| f.xhat.sigma.as_array()),
                varrho: est.map_or(Vector3::repeat(f64::NAN), |f| f.xhat.varrho),
                p_trace: est.map_or(f64::NAN, |f| f.p.trace()),
                parameter_trace: est.map_or(f64::NAN, |f| f.parameter_trace()),
                r_trace: est.map_or(f64::NAN, |f| f.r_hat.trace()),
                converged: monitor.converged(),
                blackout,
                plan_tf: plan.as_ref().map(|p| p.tf),
                plan_residual: plan.as_ref().map(|p| p.residual),
                chaser_r: r,
                chaser_r_dot: r_dot,
            });
        }

        if n == total_ticks {
            break;
        }
        let t_next = (n + 1) as f64 * plant_dt;
        if let Some(p) = &plan {
            if p.tf <= t_next {
                let h = (p.tf - t).max(0.0);
                let u = p.control_at(t + 0.5 * h);
                (r, r_dot) = step_chaser(&r, &r_dot, &u, h, cfg.a_max)?;
                let body = rk4_step(&truth.body, &InertiaModel::minimal(truth.sigma), &ProcessInput::ZERO, h);
                let at_tf = TargetState { body, ..truth };
                capture(&mut report, cfg, p.tf, &r, &r_dot, &at_tf, primary.as_ref(), shadow.as_ref());
                break;
            }
            let u = p.control_at(t + 0.5 * plant_dt);
            (r, r_dot) = step_chaser(&r, &r_dot, &u, plant_dt, cfg.a_max)?;
        }
        truth = truth_prop.advance(&truth, plant_dt);
    }

    if report.intercept_at.is_none() && report.failure_stage.is_none() {
        report.failure_stage = Some(if report.converged_at.is_none() {
            FailureStage::NoConvergence
        } else if plan.is_none() {
            FailureStage::Planning
        } else {
            FailureStage::Timeout
        });
    }
    report.plan = plan;
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn capture(
    report: &mut RunReport,
    cfg: &ScenarioConfig,
    tf: f64,
    r: &Vector3<f64>,
    r_dot: &Vector3<f64>,
    truth: &TargetState,
    primary: Option<&Estimator>,
    shadow: Option<&Estimator>,
) {
    let rho = truth.grapple_position();
    report.intercept_at = Some(tf);
    report.position_error_at_capture = (r - rho).norm();
    report.relative_speed_at_capture = (r_dot - truth.grapple_velocity()).norm();
    report.prediction_error = primary.map(|e| (e.predicted_grapple_at(tf) - rho).norm());
    report.shadow_prediction_error = shadow.map(|e| (e.predicted_grapple_at(tf) - rho).norm());
    report.success = report.position_error_at_capture <= cfg.capture_envelope
        && report.relative_speed_at_capture <= cfg.capture_velocity_max;
    if !report.success {
        report.failure_stage = Some(FailureStage::Capture);
    }
}
