//! Time-optimal rendezvous of an acceleration-limited chaser with the
//! predicted grapple fixture.
//!
//! The costate is `λ = [c₁; p(s)]` with `p(s) = c₂ − c₁ s`, where `s` is
//! time elapsed since the plan epoch. The optimal input is
//! `u = −a_max p/‖p‖`. The unknowns `χ = (c₁, c₂, t_f)` are found by
//! driving a seven-component shooting residual to zero: terminal velocity
//! and position mismatch plus the free-final-time transversality condition
//! for a moving terminal point.

mod ephemeris;

pub use ephemeris::{grapple_kinematics, predict_grapple, Ephemeris, GrappleKinematics, EPHEMERIS_STEP};

use std::io::Write;

use nalgebra::{SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::core_math::dynamics::InertiaModel;
use crate::core_math::state::TargetState;
use crate::error::{Error, Result};

type V3 = Vector3<f64>;
type V7 = SVector<f64, 7>;
type M7 = SMatrix<f64, 7, 7>;

/// Boundary data of one planning problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RendezvousProblem {
    pub r0: V3,
    pub r0_dot: V3,
    pub target: TargetState,
    pub a_max: f64,
    pub t: f64,
}

impl RendezvousProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_max > 0.0 && self.a_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("a_max must be positive, got {}", self.a_max)));
        }
        let finite = self.r0.iter().chain(self.r0_dot.iter()).all(|x| x.is_finite()) && self.t.is_finite();
        if !finite || !self.target.is_valid() {
            return Err(Error::InvalidArgument("non-finite rendezvous problem".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Acceptance threshold on `e(χ)`.
    pub tolerance: f64,
    /// Iterations are continued below `tolerance` down to this level.
    pub inner_tolerance: f64,
    pub max_iterations: usize,
    /// Relative forward-difference step.
    pub fd_step: f64,
    /// Horizon guesses for the multi-start, s.
    pub horizons: Vec<f64>,
    /// Trajectory sampling step, s.
    pub sample_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            inner_tolerance: 1e-11,
            max_iterations: 200,
            fd_step: 1e-6,
            horizons: vec![5.0, 10.0, 20.0, 40.0],
            sample_step: 0.01,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("solver: {m}")));
        if !(self.tolerance > 0.0) || !(self.inner_tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.fd_step > 0.0 && self.fd_step < 1e-2) {
            return bad("fd_step must be in (0, 1e-2)");
        }
        if self.horizons.is_empty() || self.horizons.iter().any(|h| !(*h > 0.0)) {
            return bad("horizons must be positive and non-empty");
        }
        if !(self.sample_step > 0.0) {
            return bad("sample_step must be positive");
        }
        Ok(())
    }
}

/// Shooting unknowns. `tf` is absolute time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Chi {
    pub c1: V3,
    pub c2: V3,
    pub tf: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub r: V3,
    pub r_dot: V3,
    pub u: V3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RendezvousSolution {
    pub c1: V3,
    pub c2: V3,
    /// Plan epoch; costate time is measured from here.
    pub t: f64,
    pub tf: f64,
    pub residual: f64,
    pub a_max: f64,
    pub trajectory: Vec<TrajectorySample>,
    /// Multi-start index that produced the solution; `None` for warm starts
    /// and the coincident case.
    pub start_index: Option<usize>,
    pub iterations: usize,
}

impl RendezvousSolution {
    pub fn chi(&self) -> Chi {
        Chi {
            c1: self.c1,
            c2: self.c2,
            tf: self.tf,
        }
    }

    /// Commanded acceleration at absolute time `tau`; zero after `tf`.
    pub fn control_at(&self, tau: f64) -> V3 {
        if tau >= self.tf {
            return V3::zeros();
        }
        control_of(&self.c1, &self.c2, tau - self.t, self.a_max)
    }

    /// `H(s) = 1 + c₁ᵀṙ(s) − a_max‖p(s)‖` at every trajectory sample.
    pub fn hamiltonian_history(&self) -> Vec<f64> {
        self.trajectory
            .iter()
            .map(|s| 1.0 + self.c1.dot(&s.r_dot) - self.a_max * costate_p(&self.c1, &self.c2, s.t - self.t).norm())
            .collect()
    }

    /// Largest spread of the Hamiltonian across samples.
    pub fn hamiltonian_drift(&self) -> f64 {
        let h = self.hamiltonian_history();
        let lo = h.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if h.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }

    pub fn terminal_state(&self) -> Option<&TrajectorySample> {
        self.trajectory.last()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,r_x,r_y,r_z,r_dot_x,r_dot_y,r_dot_z,u_x,u_y,u_z,tf,residual")?;
        for s in &self.trajectory {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                s.t, s.r.x, s.r.y, s.r.z, s.r_dot.x, s.r_dot.y, s.r_dot.z, s.u.x, s.u.y, s.u.z, self.tf, self.residual
            )?;
        }
        Ok(())
    }
}

fn costate_p(c1: &V3, c2: &V3, s: f64) -> V3 {
    c2 - c1 * s
}

fn is_switch_point(p: &V3, c1: &V3, c2: &V3, s: f64) -> bool {
    let scale = c2.norm() + c1.norm() * s.abs();
    p.norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

fn control_sided(c1: &V3, c2: &V3, s: f64, a_max: f64, side: Side) -> V3 {
    let p = costate_p(c1, c2, s);
    if !is_switch_point(&p, c1, c2, s) {
        return -a_max * p / p.norm();
    }
    let n = c1.norm();
    if n == 0.0 {
        return V3::zeros();
    }
    // p(s ∓ ε) ≈ ±c₁ε near a zero crossing.
    match side {
        Side::Left => -a_max * c1 / n,
        Side::Right => a_max * c1 / n,
    }
}

/// `u(s) = −a_max p(s)/‖p(s)‖` with `s` measured from the plan epoch. At a
/// zero of `p` the left limit is returned. Returns zero only for the
/// degenerate `c₁ = c₂ = 0`.
pub fn control_of(c1: &V3, c2: &V3, s: f64, a_max: f64) -> V3 {
    control_sided(c1, c2, s, a_max, Side::Left)
}

/// Composite Simpson for `∫u ds` and `∫(T − s)u ds` over `[lo, hi]`.
fn simpson_piece(c1: &V3, c2: &V3, a: f64, big_t: f64, lo: f64, hi: f64, n: usize) -> (V3, V3) {
    let h = (hi - lo) / n as f64;
    let mut i1 = V3::zeros();
    let mut i2 = V3::zeros();
    for k in 0..=n {
        let s = lo + h * k as f64;
        let u = if k == 0 {
            control_sided(c1, c2, s, a, Side::Right)
        } else {
            control_sided(c1, c2, s, a, Side::Left)
        };
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        i1 += w * u;
        i2 += w * (big_t - s) * u;
    }
    (i1 * h / 3.0, i2 * h / 3.0)
}

/// `(∫₀ᵀ u ds, ∫₀ᵀ (T − s) u ds)` by composite Simpson, split at the
/// closest approach of `p` to zero so a sign flip falls on a piece boundary.
pub fn simpson_integrals(c1: &V3, c2: &V3, big_t: f64, a_max: f64, intervals: usize) -> (V3, V3) {
    if big_t <= 0.0 {
        return (V3::zeros(), V3::zeros());
    }
    let n1 = c1.norm_squared();
    let split = if n1 > 0.0 { c1.dot(c2) / n1 } else { -1.0 };
    if split > 0.0 && split < big_t {
        let (a1, a2) = simpson_piece(c1, c2, a_max, big_t, 0.0, split, intervals);
        let (b1, b2) = simpson_piece(c1, c2, a_max, big_t, split, big_t, intervals);
        (a1 + b1, a2 + b2)
    } else {
        simpson_piece(c1, c2, a_max, big_t, 0.0, big_t, intervals)
    }
}

/// `(∫₀ᵀ u ds, ∫₀ᵀ (T − s) u ds)` in closed form.
///
/// With `s* = c₁·c₂/‖c₁‖²`, `p* = p(s*)`, `k = ‖c₁‖`, `m = ‖p*‖` and
/// `w = s − s*`, `‖p‖ = √(m² + k²w²)` and
/// `∫p/‖p‖ dw = (p*/k) asinh(kw/m) − (c₁/k²)√(m² + k²w²)`,
/// `∫w p/‖p‖ dw = p*√(m² + k²w²)/k² − c₁(w√(m² + k²w²)/(2k²) − m² asinh(kw/m)/(2k³))`.
pub fn control_integrals(c1: &V3, c2: &V3, big_t: f64, a_max: f64) -> (V3, V3) {
    if big_t <= 0.0 {
        return (V3::zeros(), V3::zeros());
    }
    let k = c1.norm();
    if k == 0.0 {
        let n = c2.norm();
        if n == 0.0 {
            return (V3::zeros(), V3::zeros());
        }
        let u = -a_max * c2 / n;
        return (u * big_t, u * (0.5 * big_t * big_t));
    }
    let s_star = c1.dot(c2) / (k * k);
    let p_star = c2 - c1 * s_star;
    let m = p_star.norm();
    let k2 = k * k;
    // m·asinh(kw/m) → 0 as m → 0.
    let ash = |w: f64| if m > 0.0 { (k * w / m).asinh() } else { 0.0 };
    let root = |w: f64| (m * m + k2 * w * w).sqrt();
    let f1 = |w: f64| p_star * (ash(w) / k) - c1 * (root(w) / k2);
    let fw = |w: f64| p_star * (root(w) / k2) - c1 * (w * root(w) / (2.0 * k2) - m * m * ash(w) / (2.0 * k2 * k));
    let (w0, w1) = (-s_star, big_t - s_star);
    let j1 = f1(w1) - f1(w0);
    let jw = fw(w1) - fw(w0);
    // ∫(T − s)u ds = (T − s*)∫u dw − ∫w u dw.
    (-a_max * j1, -a_max * ((big_t - s_star) * j1 - jw))
}

struct Shooter<'a> {
    problem: &'a RendezvousProblem,
    ephemeris: Ephemeris,
}

impl<'a> Shooter<'a> {
    fn new(problem: &'a RendezvousProblem) -> Self {
        let model = InertiaModel::minimal(problem.target.sigma);
        Self {
            problem,
            ephemeris: Ephemeris::new(&problem.target, model, problem.t),
        }
    }

    fn residual_vector(&mut self, chi: &Chi) -> V7 {
        let pr = self.problem;
        let big_t = chi.tf - pr.t;
        let g = self.ephemeris.grapple_at(chi.tf);
        let (i1, i2) = control_integrals(&chi.c1, &chi.c2, big_t, pr.a_max);
        let dv = pr.r0_dot + i1 - g.velocity;
        let dr = pr.r0 + pr.r0_dot * big_t + i2 - g.position;
        let pf = costate_p(&chi.c1, &chi.c2, big_t);
        let trans = 1.0 - pr.a_max * pf.norm() - pf.dot(&g.acceleration);
        V7::from([dv.x, dv.y, dv.z, dr.x, dr.y, dr.z, trans])
    }
}

fn pack(chi: &Chi, t0: f64) -> V7 {
    V7::from([chi.c1.x, chi.c1.y, chi.c1.z, chi.c2.x, chi.c2.y, chi.c2.z, chi.tf - t0])
}

fn unpack(x: &V7, t0: f64) -> Chi {
    Chi {
        c1: V3::new(x[0], x[1], x[2]),
        c2: V3::new(x[3], x[4], x[5]),
        tf: t0 + x[6],
    }
}

/// `e(χ)`: norm of the stacked shooting residual.
pub fn shooting_residual(chi: &Chi, problem: &RendezvousProblem) -> f64 {
    shooting_residual_vector(chi, problem).norm()
}

pub fn shooting_residual_vector(chi: &Chi, problem: &RendezvousProblem) -> SVector<f64, 7> {
    Shooter::new(problem).residual_vector(chi)
}

struct LmOutcome {
    chi: Chi,
    residual: f64,
    iterations: usize,
}

fn levenberg_marquardt(sh: &mut Shooter<'_>, start: &Chi, cfg: &SolverConfig) -> LmOutcome {
    let t0 = sh.problem.t;
    let mut x = pack(start, t0);
    let mut f = sh.residual_vector(&unpack(&x, t0));
    let mut e = f.norm();
    let mut lambda = 1e-3;
    let mut it = 0;
    while it < cfg.max_iterations && e > cfg.inner_tolerance && e.is_finite() {
        it += 1;
        let mut jac = M7::zeros();
        for j in 0..7 {
            let h = cfg.fd_step * x[j].abs().max(1e-3);
            let mut xp = x;
            xp[j] += h;
            if j == 6 && xp[6] <= 0.0 {
                xp[6] = x[6] + h.abs();
            }
            let fp = sh.residual_vector(&unpack(&xp, t0));
            jac.set_column(j, &((fp - f) / (xp[j] - x[j])));
        }
        let jtj = jac.transpose() * jac;
        let g = jac.transpose() * f;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for d in 0..7 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-g)) else {
                lambda *= 10.0;
                continue;
            };
            let mut xn = x + step;
            if xn[6] <= 0.0 {
                xn[6] = 0.5 * x[6];
            }
            let fn_ = sh.residual_vector(&unpack(&xn, t0));
            let en = fn_.norm();
            if en.is_finite() && en < e {
                let tiny = step.norm() <= 1e-15 * (1.0 + x.norm());
                x = xn;
                f = fn_;
                e = en;
                lambda = (lambda / 3.0).max(1e-12);
                improved = !tiny;
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    LmOutcome {
        chi: unpack(&x, t0),
        residual: e,
        iterations: it,
    }
}

/// Starting guesses: for each horizon `T̂` and sign, `c₂ = ±d̂/a_max` with
/// `d̂` the unit vector to the grapple at `t + T̂`; once with `c₁ = 0`
/// (constant thrust) and once with `c₁` placing a switch at `T̂/2`.
pub fn multistart_guesses(problem: &RendezvousProblem, cfg: &SolverConfig) -> Vec<Chi> {
    let mut eph = Ephemeris::new(&problem.target, InertiaModel::minimal(problem.target.sigma), problem.t);
    let mut out = Vec::new();
    for &th in &cfg.horizons {
        let d = eph.grapple_at(problem.t + th).position - problem.r0;
        let dir = if d.norm() > 0.0 { d / d.norm() } else { V3::x() };
        for sign in [1.0, -1.0] {
            let c2 = sign * dir / problem.a_max;
            out.push(Chi {
                c1: V3::zeros(),
                c2,
                tf: problem.t + th,
            });
            out.push(Chi {
                c1: 2.0 * c2 / th,
                c2,
                tf: problem.t + th,
            });
        }
    }
    out
}

fn coincident(problem: &RendezvousProblem) -> bool {
    let p = problem.target.grapple_position();
    let v = problem.target.grapple_velocity();
    (p - problem.r0).norm() < 1e-9 && (v - problem.r0_dot).norm() < 1e-9
}

/// Exact chaser state after `h` seconds from `(r, v)` under the costate
/// control, starting `s` seconds after the plan epoch.
pub fn advance_chaser(r: &V3, v: &V3, chi: &Chi, s: f64, h: f64, a_max: f64) -> (V3, V3) {
    let c2 = costate_p(&chi.c1, &chi.c2, s);
    let (i1, i2) = control_integrals(&chi.c1, &c2, h, a_max);
    (r + v * h + i2, v + i1)
}

/// Chaser trajectory under the solved control, sampled every `step`
/// seconds and at `tf`.
pub fn sample_trajectory(problem: &RendezvousProblem, chi: &Chi, step: f64) -> Vec<TrajectorySample> {
    let mut r = problem.r0;
    let mut v = problem.r0_dot;
    let mut t = problem.t;
    let mut k = 0usize;
    let mut out = vec![TrajectorySample {
        t,
        r,
        r_dot: v,
        u: control_sided(&chi.c1, &chi.c2, 0.0, problem.a_max, Side::Right),
    }];
    while t < chi.tf {
        let next = (problem.t + (k + 1) as f64 * step).min(chi.tf);
        (r, v) = advance_chaser(&r, &v, chi, t - problem.t, next - t, problem.a_max);
        t = next;
        k += 1;
        out.push(TrajectorySample {
            t,
            r,
            r_dot: v,
            u: control_of(&chi.c1, &chi.c2, t - problem.t, problem.a_max),
        });
    }
    out
}

fn finish(problem: &RendezvousProblem, out: LmOutcome, start_index: Option<usize>, cfg: &SolverConfig) -> RendezvousSolution {
    RendezvousSolution {
        c1: out.chi.c1,
        c2: out.chi.c2,
        t: problem.t,
        tf: out.chi.tf,
        residual: out.residual,
        a_max: problem.a_max,
        trajectory: sample_trajectory(problem, &out.chi, cfg.sample_step),
        start_index,
        iterations: out.iterations,
    }
}

fn singular(chi: &Chi, problem: &RendezvousProblem) -> bool {
    let scale = 1.0 / problem.a_max;
    chi.c2.norm() + chi.c1.norm() * (chi.tf - problem.t) < 1e-9 * scale
}

/// Multi-start solve. Among converged starts the earliest `t_f` wins, ties
/// broken by start index.
pub fn solve_rendezvous(problem: &RendezvousProblem, cfg: &SolverConfig) -> Result<RendezvousSolution> {
    problem.validate()?;
    cfg.validate()?;
    if coincident(problem) {
        let chi = Chi {
            c1: V3::zeros(),
            c2: V3::zeros(),
            tf: problem.t,
        };
        return Ok(finish(
            problem,
            LmOutcome {
                chi,
                residual: 0.0,
                iterations: 0,
            },
            None,
            cfg,
        ));
    }
    let mut sh = Shooter::new(problem);
    let mut best: Option<(usize, LmOutcome)> = None;
    let mut best_residual = f64::INFINITY;
    for (i, start) in multistart_guesses(problem, cfg).iter().enumerate() {
        let out = levenberg_marquardt(&mut sh, start, cfg);
        best_residual = best_residual.min(out.residual);
        let ok = out.residual < cfg.tolerance && out.chi.tf > problem.t && !singular(&out.chi, problem);
        if !ok {
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, b)) => out.chi.tf < b.chi.tf - 1e-9,
        };
        if better {
            best = Some((i, out));
        }
    }
    match best {
        Some((i, out)) => Ok(finish(problem, out, Some(i), cfg)),
        None => Err(Error::SolverFailure { best_residual }),
    }
}

/// Re-solve warm-started from `previous` (its costate re-based to the new
/// epoch), then from the full multi-start. If both fail, `previous` is kept.
pub fn replan(problem: &RendezvousProblem, previous: &RendezvousSolution, cfg: &SolverConfig) -> RendezvousSolution {
    if problem.validate().is_err() || cfg.validate().is_err() {
        return previous.clone();
    }
    let shift = problem.t - previous.t;
    let warm = Chi {
        c1: previous.c1,
        c2: previous.c2 - previous.c1 * shift,
        tf: previous.tf,
    };
    if warm.tf > problem.t {
        let mut sh = Shooter::new(problem);
        let out = levenberg_marquardt(&mut sh, &warm, cfg);
        if out.residual < cfg.tolerance && out.chi.tf > problem.t && !singular(&out.chi, problem) {
            return finish(problem, out, None, cfg);
        }
    }
    solve_rendezvous(problem, cfg).unwrap_or_else(|_| previous.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_math::inertia::sigma_from_inertia;
    use crate::core_math::quaternion::UnitQuaternion;
    use crate::core_math::state::BodyState;
    use crate::sim::truth::{propagate_truth, ProcessNoise};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn stationary_target(at: V3) -> TargetState {
        TargetState {
            body: BodyState {
                q: UnitQuaternion::IDENTITY,
                omega: V3::zeros(),
                rho_o: at,
                rho_o_dot: V3::zeros(),
            },
            sigma: sigma_from_inertia(14.0, 10.0, 6.0).unwrap().minimal(),
            varrho: V3::zeros(),
            mu: UnitQuaternion::IDENTITY,
        }
    }

    fn tumbling_target() -> TargetState {
        TargetState {
            body: BodyState {
                q: UnitQuaternion::from_rotation_vector(&V3::new(0.2, -0.4, 0.7)),
                omega: V3::new(0.15, -0.18, -0.12),
                rho_o: V3::new(-0.4, 0.3, 1.2),
                rho_o_dot: V3::new(0.006, -0.004, 0.005),
            },
            sigma: sigma_from_inertia(14.0, 10.0, 6.0).unwrap().minimal(),
            varrho: V3::new(-0.15, 0.03, -0.05),
            mu: UnitQuaternion::from_rotation_vector(&V3::new(0.05, -0.08, 0.12)),
        }
    }

    fn problem_1d(d: f64, a: f64) -> RendezvousProblem {
        RendezvousProblem {
            r0: V3::zeros(),
            r0_dot: V3::zeros(),
            target: stationary_target(V3::new(d, 0.0, 0.0)),
            a_max: a,
            t: 0.0,
        }
    }

    fn tumbling_problem() -> RendezvousProblem {
        RendezvousProblem {
            r0: V3::new(0.2, -0.3, 0.0),
            r0_dot: V3::zeros(),
            target: tumbling_target(),
            a_max: 0.004,
            t: 3.0,
        }
    }

    fn double_integrator_time(d: f64, a: f64) -> f64 {
        2.0 * (d / a).sqrt()
    }

    #[test]
    fn constant_control_when_c1_zero() {
        let c2 = V3::new(0.0, 3.0, -4.0);
        for s in [0.0, 1.0, 17.0] {
            assert_relative_eq!(control_of(&V3::zeros(), &c2, s, 2.0), V3::new(0.0, -1.2, 1.6), epsilon = 1e-15);
        }
    }

    #[test]
    fn bang_bang_sign_flip() {
        let c1 = V3::new(-1.0, 0.0, 0.0);
        let c2 = V3::new(-1.0, 0.0, 0.0);
        assert_eq!(control_of(&c1, &c2, 0.5, 1.0), V3::new(1.0, 0.0, 0.0));
        assert_eq!(control_of(&c1, &c2, 1.5, 1.0), V3::new(-1.0, 0.0, 0.0));
        // Left limit at the switch.
        assert_eq!(control_of(&c1, &c2, 1.0, 1.0), V3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn analytic_1d_solution_has_small_residual() {
        let p = problem_1d(1.0, 1.0);
        let chi = Chi {
            c1: V3::new(-1.0, 0.0, 0.0),
            c2: V3::new(-1.0, 0.0, 0.0),
            tf: 2.0,
        };
        assert!(shooting_residual(&chi, &p) < 1e-6);
    }

    #[test]
    fn closed_form_integrals_match_simpson() {
        let cases = [
            (V3::new(0.3, -0.1, 0.2), V3::new(1.0, 0.5, -0.4), 9.0),
            (V3::new(0.0, 0.0, 0.0), V3::new(1.0, 0.5, -0.4), 3.0),
            (V3::new(-0.02, 0.05, 0.01), V3::new(0.4, 0.3, -0.2), 30.0),
            (V3::new(-1.0, 0.0, 0.0), V3::new(-1.0, 0.0, 0.0), 2.0),
        ];
        for (c1, c2, big_t) in cases {
            let (a1, a2) = control_integrals(&c1, &c2, big_t, 0.7);
            let (n1, n2) = simpson_integrals(&c1, &c2, big_t, 0.7, 2000);
            assert!((a1 - n1).norm() < 1e-9 * big_t, "{a1} {n1}");
            assert!((a2 - n2).norm() < 1e-9 * big_t * big_t, "{a2} {n2}");
        }
    }

    #[test]
    fn closed_form_integrals_match_fine_trajectory() {
        // Independent check by direct integration of ṙ = u at 1e5 steps.
        let (c1, c2, big_t, a) = (V3::new(0.2, 0.1, -0.3), V3::new(0.5, 0.5, -0.9), 6.0, 0.3);
        let n = 100_000;
        let h = big_t / n as f64;
        let (mut r, mut v) = (V3::zeros(), V3::zeros());
        for i in 0..n {
            let u = control_of(&c1, &c2, (i as f64 + 0.5) * h, a);
            r += v * h + 0.5 * u * h * h;
            v += u * h;
        }
        let (i1, i2) = control_integrals(&c1, &c2, big_t, a);
        assert!((v - i1).norm() < 1e-8);
        assert!((r - i2).norm() < 1e-8);
    }

    #[test]
    fn one_dimensional_minimum_time() {
        let cfg = SolverConfig::default();
        for (d, a) in [(1.0, 1.0), (0.8, 0.004), (2.5, 0.3)] {
            let sol = solve_rendezvous(&problem_1d(d, a), &cfg).unwrap();
            assert!((sol.tf - double_integrator_time(d, a)).abs() < 1e-4, "d={d} a={a} tf={}", sol.tf);
            let end = sol.terminal_state().unwrap();
            assert!((end.r - V3::new(d, 0.0, 0.0)).norm() < 1e-4);
        }
    }

    #[test]
    fn one_dimensional_off_axis_with_initial_velocity() {
        let dir = V3::new(1.0, 2.0, -2.0) / 3.0;
        let (d, a, v) = (0.5, 0.01, -0.02);
        let p = RendezvousProblem {
            r0: V3::zeros(),
            r0_dot: v * dir,
            target: stationary_target(d * dir),
            a_max: a,
            t: 1.0,
        };
        let sol = solve_rendezvous(&p, &SolverConfig::default()).unwrap();
        // Accelerate toward to peak speed V = √(ad + v²/2), then brake.
        let peak = (a * d + v * v / 2.0).sqrt();
        let t1 = (peak - v) / a;
        let t2 = peak / a;
        assert!((sol.tf - 1.0 - (t1 + t2)).abs() < 1e-4, "{} vs {}", sol.tf - 1.0, t1 + t2);
    }

    #[test]
    fn saturation_holds_at_every_sample() {
        let sol = solve_rendezvous(&tumbling_problem(), &SolverConfig::default()).unwrap();
        for s in &sol.trajectory {
            assert!((s.u.norm() - 0.004).abs() < 1e-12);
        }
    }

    #[test]
    fn tumbling_solution_matches_truth_terminal_state() {
        let p = tumbling_problem();
        let sol = solve_rendezvous(&p, &SolverConfig::default()).unwrap();
        assert!(sol.residual < 1e-6);
        assert!(sol.tf > p.t);
        let truth = propagate_truth(&p.target, sol.tf - p.t, &ProcessNoise::ZERO, 0);
        let end = sol.terminal_state().unwrap();
        assert!((end.r - truth.grapple_position()).norm() < 1e-4);
        assert!((end.r_dot - truth.grapple_velocity()).norm() < 1e-5);
        assert!(sol.hamiltonian_drift() < 1e-4, "drift {}", sol.hamiltonian_drift());
    }

    #[test]
    fn perturbing_tf_increases_residual() {
        let p = tumbling_problem();
        let sol = solve_rendezvous(&p, &SolverConfig::default()).unwrap();
        let e0 = shooting_residual(&sol.chi(), &p);
        for dt in [-0.1, 0.1] {
            let mut chi = sol.chi();
            chi.tf += dt;
            assert!(shooting_residual(&chi, &p) > e0);
        }
    }

    #[test]
    fn coincident_chaser_needs_no_time() {
        let x = tumbling_target();
        let p = RendezvousProblem {
            r0: x.grapple_position(),
            r0_dot: x.grapple_velocity(),
            target: x,
            a_max: 0.004,
            t: 2.0,
        };
        let sol = solve_rendezvous(&p, &SolverConfig::default()).unwrap();
        assert_eq!(sol.tf, 2.0);
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn replan_with_unchanged_estimate_keeps_chi() {
        let p = tumbling_problem();
        let cfg = SolverConfig::default();
        let sol = solve_rendezvous(&p, &cfg).unwrap();
        let again = replan(&p, &sol, &cfg);
        assert!((again.tf - sol.tf).abs() < 1e-6);
        assert!((again.c1 - sol.c1).norm() < 1e-4 * sol.c1.norm().max(1.0));
        assert!((again.c2 - sol.c2).norm() < 1e-4 * sol.c2.norm().max(1.0));
    }

    #[test]
    fn replan_along_flown_trajectory_is_consistent() {
        let p = tumbling_problem();
        let cfg = SolverConfig::default();
        let sol = solve_rendezvous(&p, &cfg).unwrap();
        let s = sol.trajectory[100];
        let target = propagate_truth(&p.target, s.t - p.t, &ProcessNoise::ZERO, 0);
        let p2 = RendezvousProblem {
            r0: s.r,
            r0_dot: s.r_dot,
            target,
            t: s.t,
            ..p
        };
        let again = replan(&p2, &sol, &cfg);
        assert!((again.tf - sol.tf).abs() < 1e-3, "{} vs {}", again.tf, sol.tf);
    }

    #[test]
    fn small_velocity_shift_moves_tf_continuously() {
        let p = tumbling_problem();
        let cfg = SolverConfig::default();
        let sol = solve_rendezvous(&p, &cfg).unwrap();
        let mut q = p;
        q.target.body.rho_o_dot += V3::new(0.001, 0.0, 0.0);
        let again = replan(&q, &sol, &cfg);
        assert!((again.tf - sol.tf).abs() < 1.0);
    }

    #[test]
    fn one_percent_perturbation_gives_small_drift() {
        let p = tumbling_problem();
        let cfg = SolverConfig::default();
        let sol = solve_rendezvous(&p, &cfg).unwrap();
        let mut q = p;
        q.target.body.rho_o *= 1.01;
        q.target.body.rho_o_dot *= 1.01;
        q.target.body.omega *= 1.01;
        let again = replan(&q, &sol, &cfg);
        let x0 = pack(&sol.chi(), p.t);
        let x1 = pack(&again.chi(), p.t);
        assert!((x1 - x0).norm() < 0.1 * x0.norm());
    }

    #[test]
    fn failed_replan_keeps_previous() {
        let p = tumbling_problem();
        let cfg = SolverConfig::default();
        let sol = solve_rendezvous(&p, &cfg).unwrap();
        let strict = SolverConfig {
            tolerance: 1e-300,
            inner_tolerance: 1e-300,
            max_iterations: 1,
            ..cfg
        };
        let mut q = p;
        q.t += 1.0;
        q.r0 += V3::new(0.05, 0.0, 0.0);
        assert_eq!(replan(&q, &sol, &strict), sol);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let sol = solve_rendezvous(&problem_1d(1.0, 1.0), &SolverConfig::default()).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap().split(',').count(), 12);
        assert_eq!(lines.count(), sol.trajectory.len());
    }

    #[test]
    fn rejects_non_positive_acceleration() {
        let mut p = problem_1d(1.0, 1.0);
        p.a_max = 0.0;
        assert!(matches!(solve_rendezvous(&p, &SolverConfig::default()), Err(Error::InvalidArgument(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn control_is_saturated(
            c1 in prop::array::uniform3(-10.0..10.0f64),
            c2 in prop::array::uniform3(-10.0..10.0f64),
            s in 0.0..50.0f64,
            a in 1e-4..2.0f64,
        ) {
            let c1 = V3::from(c1);
            let c2 = V3::from(c2);
            prop_assume!(c1.norm() + c2.norm() > 1e-6);
            let u = control_of(&c1, &c2, s, a);
            prop_assert!((u.norm() - a).abs() < 1e-12 * a.max(1.0));
        }

        #[test]
        fn one_dimensional_oracle(d in 0.05..3.0f64, a in 1e-3..1.0f64) {
            let sol = solve_rendezvous(&problem_1d(d, a), &SolverConfig::default()).unwrap();
            prop_assert!((sol.tf - double_integrator_time(d, a)).abs() < 1e-4);
        }
    }
}
