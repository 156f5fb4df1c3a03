//! Dimensionless inertia ratios and the torque-free Euler equations written
//! in terms of the independent pair `(σ₁, σ₂)`.

use nalgebra::{Matrix3, Matrix3x2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominators below this are treated as singular.
pub const DENOMINATOR_TOLERANCE: f64 = 1e-12;

/// Independent inertia ratios `(σ₁, σ₂)`. `σ₃` is always derived, never stored.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SigmaParams {
    pub sigma1: f64,
    pub sigma2: f64,
}

/// All three ratios as computed directly from principal moments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertiaRatios {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
}

impl InertiaRatios {
    pub fn minimal(&self) -> SigmaParams {
        SigmaParams {
            sigma1: self.sigma1,
            sigma2: self.sigma2,
        }
    }

    /// `Γ(σ) = σ₁ + σ₂ + σ₃ + σ₁σ₂σ₃`.
    pub fn gamma(&self) -> f64 {
        gamma(self.sigma1, self.sigma2, self.sigma3)
    }
}

pub fn gamma(s1: f64, s2: f64, s3: f64) -> f64 {
    s1 + s2 + s3 + s1 * s2 * s3
}

impl SigmaParams {
    pub fn new(sigma1: f64, sigma2: f64) -> Self {
        Self { sigma1, sigma2 }
    }

    /// Validated constructor: both ratios strictly inside `(-1, 1)`.
    pub fn try_new(sigma1: f64, sigma2: f64) -> Result<Self> {
        let s = Self { sigma1, sigma2 };
        if s.is_valid() {
            Ok(s)
        } else {
            Err(Error::InvalidArgument(format!(
                "sigma ({sigma1}, {sigma2}) outside the open box (-1, 1)²"
            )))
        }
    }

    pub fn is_valid(&self) -> bool {
        self.sigma1.abs() < 1.0 && self.sigma2.abs() < 1.0
    }

    /// Unchecked `σ₃ = -(σ₁+σ₂)/(1+σ₁σ₂)`.
    pub fn sigma3(&self) -> f64 {
        -(self.sigma1 + self.sigma2) / (1.0 + self.sigma1 * self.sigma2)
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.sigma1, self.sigma2]
    }
}

/// `σ₁ = (Iyy−Izz)/Ixx`, `σ₂ = (Izz−Ixx)/Iyy`, `σ₃ = (Ixx−Iyy)/Izz`.
pub fn sigma_from_inertia(ixx: f64, iyy: f64, izz: f64) -> Result<InertiaRatios> {
    for (name, v) in [("Ixx", ixx), ("Iyy", iyy), ("Izz", izz)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!("{name} = {v} must be > 0")));
        }
    }
    if !(ixx + iyy > izz) {
        return Err(Error::InvalidArgument(format!(
            "triangle inequality Ixx + Iyy > Izz violated ({ixx} + {iyy} <= {izz})"
        )));
    }
    if !(iyy + izz > ixx) {
        return Err(Error::InvalidArgument(format!(
            "triangle inequality Iyy + Izz > Ixx violated ({iyy} + {izz} <= {ixx})"
        )));
    }
    if !(izz + ixx > iyy) {
        return Err(Error::InvalidArgument(format!(
            "triangle inequality Izz + Ixx > Iyy violated ({izz} + {ixx} <= {iyy})"
        )));
    }
    Ok(InertiaRatios {
        sigma1: (iyy - izz) / ixx,
        sigma2: (izz - ixx) / iyy,
        sigma3: (ixx - iyy) / izz,
    })
}

/// Third ratio from the constraint `Γ(σ) = 0`.
pub fn sigma3_of(sigma: &SigmaParams) -> Result<f64> {
    let den = 1.0 + sigma.sigma1 * sigma.sigma2;
    if den <= DENOMINATOR_TOLERANCE {
        return Err(Error::NumericDegenerate(format!(
            "1 + σ₁σ₂ = {den} for σ = ({}, {})",
            sigma.sigma1, sigma.sigma2
        )));
    }
    Ok(-(sigma.sigma1 + sigma.sigma2) / den)
}

/// Gyroscopic term `φ(ω, σ)` of `ω̇ = φ(ω, σ) + B(σ) ε_τ`.
pub fn euler_phi(omega: &Vector3<f64>, sigma: &SigmaParams) -> Vector3<f64> {
    euler_phi_full(omega, sigma.sigma1, sigma.sigma2, sigma.sigma3())
}

/// `φ` with an explicit third ratio (the non-minimal parameterization).
pub fn euler_phi_full(omega: &Vector3<f64>, s1: f64, s2: f64, s3: f64) -> Vector3<f64> {
    Vector3::new(
        s1 * omega.y * omega.z,
        s2 * omega.x * omega.z,
        s3 * omega.x * omega.y,
    )
}

/// `∂φ/∂ω`.
pub fn euler_phi_d_omega(omega: &Vector3<f64>, sigma: &SigmaParams) -> Matrix3<f64> {
    euler_phi_full_d_omega(omega, sigma.sigma1, sigma.sigma2, sigma.sigma3())
}

pub fn euler_phi_full_d_omega(omega: &Vector3<f64>, s1: f64, s2: f64, s3: f64) -> Matrix3<f64> {
    Matrix3::new(
        0.0,
        s1 * omega.z,
        s1 * omega.y,
        s2 * omega.z,
        0.0,
        s2 * omega.x,
        s3 * omega.y,
        s3 * omega.x,
        0.0,
    )
}

/// `∂φ/∂σ` for the minimal pair, including the dependence of `σ₃` on both.
pub fn euler_phi_d_sigma(omega: &Vector3<f64>, sigma: &SigmaParams) -> Matrix3x2<f64> {
    let (s1, s2) = (sigma.sigma1, sigma.sigma2);
    let den = (1.0 + s1 * s2).powi(2);
    let wxy = omega.x * omega.y;
    Matrix3x2::new(
        omega.y * omega.z,
        0.0,
        0.0,
        omega.x * omega.z,
        (s2 * s2 - 1.0) / den * wxy,
        (s1 * s1 - 1.0) / den * wxy,
    )
}

/// Diagonal of `B(σ)` without the singularity guard.
pub fn disturbance_gain_diag(sigma: &SigmaParams) -> Vector3<f64> {
    let (s1, s2) = (sigma.sigma1, sigma.sigma2);
    Vector3::new(
        1.0 + (2.0 + s1 * s2 + s1) / (1.0 - s2),
        1.0 + (2.0 + s1 * s2 - s2) / (1.0 + s1),
        1.0 + (2.0 + s1 - s2) / (1.0 + s1 * s2),
    )
}

/// Disturbance gain `B(σ)` mapping `ε_τ = τ / tr(I_c)` to angular acceleration.
/// For a physical body this equals `tr(I_c) · I_c⁻¹`.
pub fn disturbance_gain_b(sigma: &SigmaParams) -> Result<Matrix3<f64>> {
    let (s1, s2) = (sigma.sigma1, sigma.sigma2);
    for (label, den) in [
        ("1 - σ₂", 1.0 - s2),
        ("1 + σ₁", 1.0 + s1),
        ("1 + σ₁σ₂", 1.0 + s1 * s2),
    ] {
        if den <= DENOMINATOR_TOLERANCE {
            return Err(Error::NumericDegenerate(format!("{label} = {den}")));
        }
    }
    Ok(Matrix3::from_diagonal(&disturbance_gain_diag(sigma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Classical Euler equations, `I⁻¹(−ω × Iω)`.
    fn classical_euler(omega: &Vector3<f64>, inertia: &Vector3<f64>) -> Vector3<f64> {
        let i = Matrix3::from_diagonal(inertia);
        i.try_inverse().unwrap() * (-omega.cross(&(i * omega)))
    }

    #[test]
    fn analog_inertia_ratios() {
        let r = sigma_from_inertia(14.0, 10.0, 6.0).unwrap();
        assert!((r.sigma1 - 0.2857).abs() < 5e-4);
        assert!((r.sigma2 + 0.80).abs() < 5e-4);
        assert!((r.sigma3 - 0.6667).abs() < 5e-4);
        assert!(r.gamma().abs() < 1e-12);
    }

    #[test]
    fn sphere_and_flat_cases() {
        let r = sigma_from_inertia(5.0, 5.0, 5.0).unwrap();
        assert_eq!((r.sigma1, r.sigma2, r.sigma3), (0.0, 0.0, 0.0));
        let r = sigma_from_inertia(2.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(r.sigma1, 0.5);
        assert_relative_eq!(r.sigma2, -0.5);
        assert_relative_eq!(r.sigma3, 0.0);
    }

    #[test]
    fn inertia_errors_name_the_violation() {
        let e = sigma_from_inertia(0.0, 1.0, 1.0).unwrap_err();
        assert!(e.to_string().contains("Ixx"));
        let e = sigma_from_inertia(1.0, 1.0, 3.0).unwrap_err();
        assert!(e.to_string().contains("Ixx + Iyy > Izz"));
        let e = sigma_from_inertia(3.0, 1.0, 1.0).unwrap_err();
        assert!(e.to_string().contains("Iyy + Izz > Ixx"));
        let e = sigma_from_inertia(1.0, 3.0, 1.0).unwrap_err();
        assert!(e.to_string().contains("Izz + Ixx > Iyy"));
    }

    #[test]
    fn sigma3_values() {
        let s3 = sigma3_of(&SigmaParams::new(0.2857, -0.8)).unwrap();
        assert!((s3 - 0.6667).abs() < 5e-4);
        assert_eq!(sigma3_of(&SigmaParams::new(0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(sigma3_of(&SigmaParams::new(0.5, -0.5)).unwrap(), 0.0);
        assert!(matches!(
            sigma3_of(&SigmaParams::new(1.0, -1.0)),
            Err(Error::NumericDegenerate(_))
        ));
    }

    #[test]
    fn phi_zero_cases() {
        let s = SigmaParams::new(0.2857, -0.8);
        assert_eq!(euler_phi(&Vector3::zeros(), &s), Vector3::zeros());
        let w = Vector3::new(0.3, -0.1, 0.7);
        assert_eq!(euler_phi(&w, &SigmaParams::new(0.0, 0.0)), Vector3::zeros());
    }

    #[test]
    fn phi_matches_classical_euler() {
        let inertia = Vector3::new(14.0, 10.0, 6.0);
        let s = sigma_from_inertia(14.0, 10.0, 6.0).unwrap().minimal();
        let w = Vector3::new(0.15, -0.18, -0.12);
        assert_relative_eq!(
            euler_phi(&w, &s),
            classical_euler(&w, &inertia),
            epsilon = 1e-15
        );
    }

    #[test]
    fn disturbance_gain_oracles() {
        let b = disturbance_gain_b(&SigmaParams::new(0.0, 0.0)).unwrap();
        assert_relative_eq!(b, Matrix3::from_diagonal_element(3.0), epsilon = 1e-15);
        let s = sigma_from_inertia(14.0, 10.0, 6.0).unwrap().minimal();
        let b = disturbance_gain_b(&s).unwrap();
        let expected = Vector3::new(30.0 / 14.0, 3.0, 5.0);
        assert_relative_eq!(b.diagonal(), expected, epsilon = 1e-13);
        assert!(disturbance_gain_b(&SigmaParams::new(0.2, 1.0)).is_err());
    }

    proptest! {
        #[test]
        fn ratios_stay_in_box(a in 0.1..100.0f64, b in 0.1..100.0f64, c in 0.1..100.0f64) {
            prop_assume!(a + b > c && b + c > a && c + a > b);
            let r = sigma_from_inertia(a, b, c).unwrap();
            prop_assert!(r.sigma1.abs() < 1.0 && r.sigma2.abs() < 1.0 && r.sigma3.abs() < 1.0);
            prop_assert!(r.gamma().abs() < 1e-12);
            let s3 = sigma3_of(&r.minimal()).unwrap();
            prop_assert!((s3 - r.sigma3).abs() < 1e-12);
        }

        #[test]
        fn b_equals_trace_over_inertia(a in 0.1..100.0f64, b in 0.1..100.0f64, c in 0.1..100.0f64) {
            prop_assume!(a + b > c * 1.001 && b + c > a * 1.001 && c + a > b * 1.001);
            let s = sigma_from_inertia(a, b, c).unwrap().minimal();
            let gain = disturbance_gain_b(&s).unwrap().diagonal();
            let tr = a + b + c;
            let oracle = Vector3::new(tr / a, tr / b, tr / c);
            prop_assert!(((gain - oracle).abs().max() / oracle.max()) < 1e-9);
            prop_assert!(gain.min() > 0.0);
        }

        #[test]
        fn phi_matches_classical_for_random_bodies(
            a in 0.5..20.0f64, b in 0.5..20.0f64, c in 0.5..20.0f64,
            wx in -1.0..1.0f64, wy in -1.0..1.0f64, wz in -1.0..1.0f64,
        ) {
            prop_assume!(a + b > c && b + c > a && c + a > b);
            let s = sigma_from_inertia(a, b, c).unwrap().minimal();
            let w = Vector3::new(wx, wy, wz);
            let d = euler_phi(&w, &s) - classical_euler(&w, &Vector3::new(a, b, c));
            prop_assert!(d.norm() < 1e-12);
        }
    }
}
