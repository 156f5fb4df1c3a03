//! Chaser end-effector as a double integrator `r̈ = u`.

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Slack on the acceleration bound for rounding in the planner.
pub const ACCEL_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ChaserState {
    pub r: Vector3<f64>,
    pub r_dot: Vector3<f64>,
}

/// Exact update with `u` held over `dt`.
pub fn step_chaser(
    r: &Vector3<f64>,
    r_dot: &Vector3<f64>,
    u: &Vector3<f64>,
    dt: f64,
    a_max: f64,
) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let un = u.norm();
    if !(un <= a_max + ACCEL_SLACK) {
        return Err(Error::InvalidArgument(format!(
            "commanded acceleration {un} exceeds bound {a_max}"
        )));
    }
    Ok((r + r_dot * dt + 0.5 * u * dt * dt, r_dot + u * dt))
}

impl ChaserState {
    pub fn step(&self, u: &Vector3<f64>, dt: f64, a_max: f64) -> Result<Self> {
        let (r, r_dot) = step_chaser(&self.r, &self.r_dot, u, dt, a_max)?;
        Ok(Self { r, r_dot })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coasting_is_straight_line() {
        let (r, v) = step_chaser(&Vector3::new(1.0, 2.0, 3.0), &Vector3::new(0.1, 0.0, -0.2), &Vector3::zeros(), 2.0, 1.0).unwrap();
        assert_eq!(r, Vector3::new(1.2, 2.0, 2.6));
        assert_eq!(v, Vector3::new(0.1, 0.0, -0.2));
    }

    #[test]
    fn unit_push() {
        let (r, v) = step_chaser(&Vector3::zeros(), &Vector3::zeros(), &Vector3::x(), 1.0, 1.0).unwrap();
        assert_eq!(r, Vector3::new(0.5, 0.0, 0.0));
        assert_eq!(v, Vector3::x());
    }

    #[test]
    fn bang_bang_rest_to_rest() {
        // t_f = 2 sqrt(d / a) for rest-to-rest over distance d.
        let (d, a) = (1.0, 1.0);
        let tf = 2.0 * (d / a as f64).sqrt();
        let n = 1000;
        let h = tf / n as f64;
        let mut s = ChaserState::default();
        for k in 0..n {
            let u = if k < n / 2 { Vector3::x() } else { -Vector3::x() } * a;
            s = s.step(&u, h, a).unwrap();
        }
        assert_relative_eq!(tf, 2.0);
        assert_relative_eq!(s.r, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(s.r_dot, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn over_limit_rejected() {
        assert!(step_chaser(&Vector3::zeros(), &Vector3::zeros(), &Vector3::new(1.0, 1.0, 0.0), 1.0, 1.0).is_err());
        assert!(step_chaser(&Vector3::zeros(), &Vector3::zeros(), &Vector3::new(f64::NAN, 0.0, 0.0), 1.0, 1.0).is_err());
    }
}
