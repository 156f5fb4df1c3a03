//! Scenario description, loaded from TOML.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::core_math::inertia::sigma_from_inertia;
use crate::core_math::quaternion::UnitQuaternion;
use crate::core_math::state::{BodyState, TargetState};
use crate::error::{Error, Result};
use crate::estimator::FilterConfig;
use crate::guidance::SolverConfig;
use crate::registration::IcpConfig;
use crate::sim::{FaultSchedule, ProcessNoise, SensorConfig, SurfaceModel};

/// Initial target motion and mass properties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    /// Principal moments `(I_xx, I_yy, I_zz)`, kg·m².
    pub inertia: [f64; 3],
    /// Grapple offset in {B}, m.
    pub varrho: [f64; 3],
    /// Rotation vector of `μ`, rad.
    pub mu_rotvec: [f64; 3],
    /// Rotation vector of the initial attitude `q`, rad.
    pub q_rotvec: [f64; 3],
    /// Body rates, rad/s.
    pub omega: [f64; 3],
    pub rho_o: [f64; 3],
    pub rho_o_dot: [f64; 3],
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            inertia: [14.0, 10.0, 6.0],
            varrho: [-0.15, 0.03, -0.05],
            mu_rotvec: [0.05, -0.08, 0.12],
            q_rotvec: [0.3, -0.2, 0.5],
            omega: [0.15, -0.18, -0.12],
            rho_o: [-0.4, 0.3, 1.2],
            rho_o_dot: [0.006, -0.004, 0.005],
        }
    }
}

/// Disturbance sample variances at the truth substep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// m²/s⁴.
    pub var_force: f64,
    /// rad²/s⁴.
    pub var_torque: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            var_force: 2e-6,
            var_torque: 3e-5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaserConfig {
    pub r0: [f64; 3],
    pub r0_dot: [f64; 3],
}

impl Default for ChaserConfig {
    fn default() -> Self {
        Self {
            r0: [0.6, -0.5, -3.6],
            r0_dot: [0.0; 3],
        }
    }
}

/// Loop rates, Hz. The plant rate must be an integer multiple of the other two.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesConfig {
    pub sensor: f64,
    pub planner: f64,
    pub plant: f64,
}

impl Default for RatesConfig {
    fn default() -> Self {
        Self {
            sensor: 2.0,
            planner: 1.0,
            plant: 100.0,
        }
    }
}

/// Perturbation of the first ICP seed away from the true pose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub angle_deg: f64,
    pub offset: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            angle_deg: 5.0,
            offset: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    /// s.
    pub duration: f64,
    /// m/s².
    pub a_max: f64,
    /// m.
    pub capture_envelope: f64,
    /// m/s.
    pub capture_velocity_max: f64,
    /// Wait between the convergence latch and departure, s.
    pub departure_hold: f64,
    /// Length of the vision blackout ending at the planned intercept, s.
    pub terminal_blackout: f64,
    /// No replanning once the planned intercept is closer than this, s.
    pub replan_freeze: f64,
    /// OBJ file, relative to the scenario file; the built-in mock-up if absent.
    pub model: Option<PathBuf>,
    pub target: TargetConfig,
    pub noise: NoiseConfig,
    pub chaser: ChaserConfig,
    pub rates: RatesConfig,
    pub acquisition: AcquisitionConfig,
    pub sensor: SensorConfig,
    /// Derived from the sensor noise and model resolution if absent.
    pub icp: Option<IcpConfig>,
    pub filter: FilterConfig,
    pub solver: SolverConfig,
    pub faults: FaultSchedule,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "analog".into(),
            seed: 1,
            duration: 150.0,
            a_max: 0.015,
            capture_envelope: 0.04,
            capture_velocity_max: 0.01,
            departure_hold: 5.0,
            terminal_blackout: 10.0,
            replan_freeze: 2.0,
            model: None,
            target: TargetConfig::default(),
            noise: NoiseConfig::default(),
            chaser: ChaserConfig::default(),
            rates: RatesConfig::default(),
            acquisition: AcquisitionConfig::default(),
            sensor: SensorConfig::default(),
            icp: None,
            filter: FilterConfig::default(),
            solver: SolverConfig::default(),
            faults: FaultSchedule::none(),
        }
    }
}

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::from(a)
}

fn ticks_per(plant: f64, rate: f64, what: &str) -> Result<usize> {
    let r = plant / rate;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-9 * r {
        return Err(Error::Config(format!(
            "plant rate {plant} Hz is not an integer multiple of the {what} rate {rate} Hz"
        )));
    }
    Ok(n as usize)
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a scenario; a relative `model` path is resolved against the
    /// scenario's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(m) = &cfg.model {
            if m.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.model = Some(base.join(m));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let r = &self.rates;
        if !(r.sensor > 0.0 && r.planner > 0.0 && r.plant > 0.0) || ![r.sensor, r.planner, r.plant].iter().all(|x| x.is_finite()) {
            return bad("rates must be positive and finite".into());
        }
        ticks_per(r.plant, r.sensor, "sensor")?;
        ticks_per(r.plant, r.planner, "planner")?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.a_max > 0.0 && self.a_max.is_finite()) {
            return bad(format!("a_max must be positive, got {}", self.a_max));
        }
        for (name, v) in [
            ("capture_envelope", self.capture_envelope),
            ("capture_velocity_max", self.capture_velocity_max),
            ("departure_hold", self.departure_hold),
            ("terminal_blackout", self.terminal_blackout),
            ("replan_freeze", self.replan_freeze),
            ("noise.var_force", self.noise.var_force),
            ("noise.var_torque", self.noise.var_torque),
            ("acquisition.angle_deg", self.acquisition.angle_deg),
            ("acquisition.offset", self.acquisition.offset),
        ] {
            if !(v >= 0.0) || v.is_nan() {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        let [ix, iy, iz] = self.target.inertia;
        sigma_from_inertia(ix, iy, iz).map_err(|e| Error::Config(format!("target.inertia: {e}")))?;
        let t = &self.target;
        let all = [t.varrho, t.mu_rotvec, t.q_rotvec, t.omega, t.rho_o, t.rho_o_dot, self.chaser.r0, self.chaser.r0_dot];
        if all.iter().flatten().any(|x| !x.is_finite()) {
            return bad("non-finite vector in scenario".into());
        }
        self.sensor.validate().map_err(|e| Error::Config(format!("sensor: {e}")))?;
        if let Some(icp) = &self.icp {
            icp.validate()?;
        }
        self.filter.validate().map_err(|e| Error::Config(format!("filter: {e}")))?;
        self.solver.validate()?;
        Ok(())
    }

    pub fn sensor_ticks(&self) -> usize {
        ticks_per(self.rates.plant, self.rates.sensor, "sensor").expect("validated")
    }

    pub fn planner_ticks(&self) -> usize {
        ticks_per(self.rates.plant, self.rates.planner, "planner").expect("validated")
    }

    /// Sensor settings with the scenario's sensor rate.
    pub fn sensor_config(&self) -> SensorConfig {
        SensorConfig {
            rate: self.rates.sensor,
            ..self.sensor
        }
    }

    pub fn initial_target(&self) -> Result<TargetState> {
        let t = &self.target;
        let [ix, iy, iz] = t.inertia;
        Ok(TargetState {
            body: BodyState {
                q: UnitQuaternion::from_rotation_vector(&v3(t.q_rotvec)),
                omega: v3(t.omega),
                rho_o: v3(t.rho_o),
                rho_o_dot: v3(t.rho_o_dot),
            },
            sigma: sigma_from_inertia(ix, iy, iz)?.minimal(),
            varrho: v3(t.varrho),
            mu: UnitQuaternion::from_rotation_vector(&v3(t.mu_rotvec)),
        })
    }

    pub fn process_noise(&self) -> ProcessNoise {
        ProcessNoise::isotropic(self.noise.var_force, self.noise.var_torque)
    }

    pub fn chaser_start(&self) -> (Vector3<f64>, Vector3<f64>) {
        (v3(self.chaser.r0), v3(self.chaser.r0_dot))
    }

    pub fn surface_model(&self) -> Result<SurfaceModel> {
        match &self.model {
            None => Ok(SurfaceModel::mockup()),
            Some(p) => SurfaceModel::load_obj(p).map_err(|e| Error::Config(format!("model {}: {e}", p.display()))),
        }
    }

    pub fn icp_config(&self, model: &SurfaceModel) -> IcpConfig {
        self.icp
            .unwrap_or_else(|| IcpConfig::for_sensor(self.sensor.noise_std, model.resolution()))
    }
}
