//! Synthetic range sensor. The sensor sits at the origin of {A} looking
//! along +z; returns are sampled on the visible model surface.

use nalgebra::Vector3;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::fault::{FaultMode, FaultSchedule};
use super::model::SurfaceModel;
use crate::core_math::pose::Pose;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    /// Points in the sensor frame {A}, m.
    pub points: Vec<Vector3<f64>>,
    pub timestamp: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, timestamp: f64) -> Self {
        Self { points, timestamp }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    /// Scan rate, Hz.
    pub rate: f64,
    /// Per-axis Gaussian noise, m.
    pub noise_std: f64,
    pub outlier_fraction: f64,
    /// Half-width of the cube around the target where outliers land, m.
    pub outlier_box: f64,
    pub max_points: usize,
    /// Half-angle of the viewing cone about +z, rad.
    pub fov_halfangle: f64,
    pub hidden_surface: bool,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            rate: 2.0,
            noise_std: 0.002,
            outlier_fraction: 0.0,
            outlier_box: 0.3,
            max_points: 250,
            fov_halfangle: 30f64.to_radians(),
            hidden_surface: true,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad(format!("sensor rate {} must be positive", self.rate));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std {} must be non-negative", self.noise_std));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad(format!("outlier_fraction {} must lie in [0, 1)", self.outlier_fraction));
        }
        if !(self.outlier_box >= 0.0 && self.outlier_box.is_finite()) {
            return bad(format!("outlier_box {} must be non-negative", self.outlier_box));
        }
        if !(self.fov_halfangle > 0.0 && self.fov_halfangle < std::f64::consts::FRAC_PI_2) {
            return bad(format!("fov_halfangle {} must lie in (0, pi/2)", self.fov_halfangle));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.rate
    }
}

/// A scan together with its pre-noise samples, for diagnostics and tests.
#[derive(Clone, Debug, Default)]
pub struct ScanDetail {
    pub cloud: PointCloud,
    /// Noise-free surface samples in {A}; `None` where an outlier replaced it.
    pub clean: Vec<Option<Vector3<f64>>>,
    /// Outward unit normal at each clean sample (zero for point models).
    pub normals: Vec<Vector3<f64>>,
}

fn in_fov(p: &Vector3<f64>, half_angle: f64) -> bool {
    p.z > 0.0 && p.xy().norm() <= p.z * half_angle.tan()
}

pub fn render_scan(
    model: &SurfaceModel,
    pose: &Pose,
    cfg: &SensorConfig,
    fault: &FaultSchedule,
    t: f64,
    seed: u64,
) -> PointCloud {
    render_scan_detailed(model, pose, cfg, fault, t, seed).cloud
}

/// `pose` maps model coordinates {C} into {A}.
pub fn render_scan_detailed(
    model: &SurfaceModel,
    pose: &Pose,
    cfg: &SensorConfig,
    fault: &FaultSchedule,
    t: f64,
    seed: u64,
) -> ScanDetail {
    let noise_mult = match fault.active(t) {
        Some(FaultMode::Blackout) => {
            return ScanDetail {
                cloud: PointCloud::new(Vec::new(), t),
                ..Default::default()
            }
        }
        Some(FaultMode::Degraded { noise_multiplier }) => noise_multiplier,
        None => 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut clean, normals) = if model.has_faces() {
        sample_faces(model, pose, cfg, &mut rng)
    } else {
        sample_vertices(model, pose, cfg, &mut rng)
    };

    let sigma = cfg.noise_std * noise_mult;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut points: Vec<Vector3<f64>> = clean
        .iter()
        .map(|p| {
            let p = p.expect("all samples clean before outliers");
            if sigma > 0.0 {
                p + sigma * Vector3::from_fn(|_, _| normal.sample(&mut rng))
            } else {
                p
            }
        })
        .collect();

    let n_out = (cfg.outlier_fraction * points.len() as f64).round() as usize;
    if n_out > 0 {
        let b = cfg.outlier_box;
        for i in sample_indices(&mut rng, points.len(), n_out) {
            points[i] = pose.rho + Vector3::from_fn(|_, _| rng.random_range(-b..=b));
            clean[i] = None;
        }
    }
    ScanDetail {
        cloud: PointCloud::new(points, t),
        clean,
        normals,
    }
}

type Samples = (Vec<Option<Vector3<f64>>>, Vec<Vector3<f64>>);

fn sample_faces(model: &SurfaceModel, pose: &Pose, cfg: &SensorConfig, rng: &mut ChaCha8Rng) -> Samples {
    let mut tris = Vec::new();
    let mut weights = Vec::new();
    for i in 0..model.faces().len() {
        let [a, b, c] = model.triangle(i).map(|v| pose.transform_point(&v));
        let n = (b - a).cross(&(c - a));
        if n.norm() == 0.0 {
            continue;
        }
        // On a plane `n·p` is constant, so this tests every point of the face.
        if cfg.hidden_surface && n.dot(&a) >= 0.0 {
            continue;
        }
        tris.push((a, b, c, n.normalize()));
        weights.push(n.norm());
    }
    let mut pts = Vec::new();
    let mut normals = Vec::new();
    if tris.is_empty() {
        return (pts, normals);
    }
    let pick = WeightedIndex::new(&weights).expect("positive areas");
    for _ in 0..cfg.max_points {
        let (a, b, c, n) = tris[pick.sample(rng)];
        let r1: f64 = rng.random::<f64>().sqrt();
        let r2: f64 = rng.random();
        let p = a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2);
        if in_fov(&p, cfg.fov_halfangle) {
            pts.push(Some(p));
            normals.push(n);
        }
    }
    (pts, normals)
}

fn sample_vertices(model: &SurfaceModel, pose: &Pose, cfg: &SensorConfig, rng: &mut ChaCha8Rng) -> Samples {
    let nv = model.vertices().len();
    let mut idx: Vec<usize> = if nv <= cfg.max_points {
        (0..nv).collect()
    } else {
        sample_indices(rng, nv, cfg.max_points).into_vec()
    };
    idx.sort_unstable();
    let pts: Vec<Option<Vector3<f64>>> = idx
        .into_iter()
        .map(|i| pose.transform_point(&model.vertices()[i]))
        .filter(|p| in_fov(p, cfg.fov_halfangle))
        .map(Some)
        .collect();
    let normals = vec![Vector3::zeros(); pts.len()];
    (pts, normals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_math::quaternion::UnitQuaternion;
    use crate::sim::fault::FaultWindow;

    fn pose() -> Pose {
        Pose::new(
            Vector3::new(-0.1, 0.05, 1.2),
            UnitQuaternion::from_rotation_vector(&Vector3::new(0.4, -0.9, 0.3)),
        )
    }

    fn quiet() -> SensorConfig {
        SensorConfig { noise_std: 0.0, outlier_fraction: 0.0, ..Default::default() }
    }

    #[test]
    fn noise_free_points_lie_on_surface() {
        let m = SurfaceModel::mockup();
        let p = pose();
        let cloud = render_scan(&m, &p, &quiet(), &FaultSchedule::none(), 0.0, 3);
        assert!(cloud.len() > 200);
        let inv = p.inverse();
        for c in &cloud.points {
            let hit = m.closest_brute_force(&inv.transform_point(c));
            assert!(hit.dist_sq.sqrt() < 1e-12);
        }
    }

    #[test]
    fn point_model_returns_vertices() {
        let m = SurfaceModel::new(SurfaceModel::mockup().vertices().to_vec(), vec![]).unwrap();
        let p = pose();
        let cloud = render_scan(&m, &p, &quiet(), &FaultSchedule::none(), 0.0, 3);
        assert_eq!(cloud.len(), 18);
        for c in &cloud.points {
            let local = p.inverse().transform_point(c);
            assert!(m.vertices().iter().any(|v| (v - local).norm() < 1e-12));
        }
    }

    #[test]
    fn hidden_faces_are_culled() {
        let m = SurfaceModel::mockup();
        for seed in 0..20 {
            let p = Pose::new(
                Vector3::new(0.0, 0.0, 1.0),
                UnitQuaternion::from_rotation_vector(&Vector3::new(seed as f64 * 0.3, -0.2 * seed as f64, 1.0)),
            );
            let d = render_scan_detailed(&m, &p, &quiet(), &FaultSchedule::none(), 0.0, seed);
            for (c, n) in d.clean.iter().zip(&d.normals) {
                assert!(n.dot(&c.unwrap()) < 0.0);
            }
        }
    }

    #[test]
    fn blackout_empties_and_degraded_inflates() {
        let m = SurfaceModel::mockup();
        let f = FaultSchedule::new(vec![
            FaultWindow { start: 1.0, end: 2.0, mode: FaultMode::Blackout },
            FaultWindow { start: 2.0, end: 3.0, mode: FaultMode::Degraded { noise_multiplier: 10.0 } },
        ])
        .unwrap();
        let cfg = SensorConfig::default();
        assert!(render_scan(&m, &pose(), &cfg, &f, 1.5, 0).is_empty());
        let spread = |t: f64| {
            let d = render_scan_detailed(&m, &pose(), &cfg, &f, t, 0);
            d.cloud.points.iter().zip(&d.clean).map(|(p, c)| (p - c.unwrap()).norm_squared()).sum::<f64>()
        };
        assert!(spread(2.5) > 50.0 * spread(0.5));
    }

    #[test]
    fn noise_std_is_realized() {
        let m = SurfaceModel::mockup();
        let cfg = SensorConfig { noise_std: 0.002, max_points: 2000, ..Default::default() };
        let mut sq = Vector3::zeros();
        let mut n = 0usize;
        let mut seed = 0;
        while n < 100_000 {
            let d = render_scan_detailed(&m, &pose(), &cfg, &FaultSchedule::none(), 0.0, seed);
            for (p, c) in d.cloud.points.iter().zip(&d.clean) {
                sq += (p - c.unwrap()).component_mul(&(p - c.unwrap()));
                n += 1;
            }
            seed += 1;
        }
        for i in 0..3 {
            let s = (sq[i] / n as f64).sqrt();
            assert!((s / 0.002 - 1.0).abs() < 0.05, "axis {i} std {s}");
        }
    }

    #[test]
    fn exact_outlier_count_inside_box() {
        let m = SurfaceModel::mockup();
        let cfg = SensorConfig { outlier_fraction: 0.1, noise_std: 0.0, ..Default::default() };
        let p = pose();
        let d = render_scan_detailed(&m, &p, &cfg, &FaultSchedule::none(), 0.0, 5);
        let k = d.clean.iter().filter(|c| c.is_none()).count();
        assert_eq!(k, (0.1 * d.cloud.len() as f64).round() as usize);
        for (pt, c) in d.cloud.points.iter().zip(&d.clean) {
            if c.is_none() {
                assert!((pt - p.rho).amax() <= cfg.outlier_box);
            }
        }
    }

    #[test]
    fn fov_limits_returns() {
        let m = SurfaceModel::mockup();
        let far_off = Pose::new(Vector3::new(2.0, 0.0, 1.0), UnitQuaternion::IDENTITY);
        assert!(render_scan(&m, &far_off, &quiet(), &FaultSchedule::none(), 0.0, 1).is_empty());
    }

    #[test]
    fn deterministic() {
        let m = SurfaceModel::mockup();
        let cfg = SensorConfig { outlier_fraction: 0.05, ..Default::default() };
        let a = render_scan(&m, &pose(), &cfg, &FaultSchedule::none(), 0.0, 77);
        let b = render_scan(&m, &pose(), &cfg, &FaultSchedule::none(), 0.0, 77);
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(SensorConfig::default().validate().is_ok());
        assert!(SensorConfig { rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(SensorConfig { outlier_fraction: 1.0, ..Default::default() }.validate().is_err());
    }
}
