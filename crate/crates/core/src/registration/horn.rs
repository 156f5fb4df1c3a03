//! Closed-form absolute orientation (Horn's unit-quaternion method).

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::core_math::pose::Pose;
use crate::core_math::quaternion::UnitQuaternion;
use crate::error::{Error, Result};

/// Relative tolerance for eigenvalue gaps and rank tests.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// Eigen-decomposition of a symmetric 4×4 matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matching eigenvectors as columns.
pub fn jacobi_eigen4(m: &Matrix4<f64>) -> (Vector4<f64>, Matrix4<f64>) {
    let mut a = *m;
    let mut v = Matrix4::identity();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..64 {
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * 1e-2 * scale || off == 0.0 {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..4 {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..4 {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..4 {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (Vector4::new(a[(0, 0)], a[(1, 1)], a[(2, 2)], a[(3, 3)]), v)
}

/// Horn's symmetric matrix from the cross-covariance `N = Σ c'ᵢ d'ᵢᵀ`.
/// Its dominant eigenvector, scalar first, is the optimal rotation.
pub fn horn_matrix(n: &Matrix3<f64>) -> Matrix4<f64> {
    let tr = n.trace();
    let d = Vector3::new(n[(1, 2)] - n[(2, 1)], n[(2, 0)] - n[(0, 2)], n[(0, 1)] - n[(1, 0)]);
    let mut m = Matrix4::zeros();
    m[(0, 0)] = tr;
    for i in 0..3 {
        m[(0, i + 1)] = d[i];
        m[(i + 1, 0)] = d[i];
    }
    let lower = n + n.transpose() - Matrix3::identity() * tr;
    m.fixed_view_mut::<3, 3>(1, 1).copy_from(&lower);
    m
}

/// Mean of `‖A(η) cᵢ + ρ − dᵢ‖²`.
pub fn alignment_error(pose: &Pose, cloud: &[Vector3<f64>], model: &[Vector3<f64>]) -> f64 {
    let r = pose.eta.rotation_matrix();
    cloud
        .iter()
        .zip(model)
        .map(|(c, d)| (r * c + pose.rho - d).norm_squared())
        .sum::<f64>()
        / cloud.len() as f64
}

/// Rigid transform `(ρ, η)` minimizing the mean of `‖A(η) cᵢ + ρ − dᵢ‖²`
/// over paired points, and that minimum.
pub fn horn_align(cloud: &[Vector3<f64>], model: &[Vector3<f64>]) -> Result<(Pose, f64)> {
    if cloud.len() != model.len() {
        return Err(Error::InvalidArgument(format!(
            "{} cloud points paired with {} model points",
            cloud.len(),
            model.len()
        )));
    }
    if cloud.len() < 3 {
        return Err(Error::DegenerateAlignment(format!("{} pairs, need at least 3", cloud.len())));
    }
    let k = cloud.len() as f64;
    let c_bar = cloud.iter().sum::<Vector3<f64>>() / k;
    let d_bar = model.iter().sum::<Vector3<f64>>() / k;
    let mut n = Matrix3::zeros();
    for (c, d) in cloud.iter().zip(model) {
        n += (c - c_bar) * (d - d_bar).transpose();
    }

    let sv = n.singular_values();
    let smax = sv.max();
    let mut sorted = [sv[0], sv[1], sv[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    if smax == 0.0 || sorted[1] <= DEGENERACY_TOLERANCE * smax {
        return Err(Error::DegenerateAlignment("collinear or coincident correspondences".into()));
    }

    let m = horn_matrix(&n);
    let (vals, vecs) = jacobi_eigen4(&m);
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let gap = vals[order[0]] - vals[order[1]];
    let scale = vals.amax().max(f64::MIN_POSITIVE);
    if gap < DEGENERACY_TOLERANCE * scale {
        return Err(Error::DegenerateAlignment(format!("eigenvalue gap {gap:e} relative to {scale:e}")));
    }
    let e = vecs.column(order[0]);
    let eta = UnitQuaternion::normalize(Vector3::new(e[1], e[2], e[3]), e[0]).canonical();
    let rho = d_bar - eta.rotation_matrix() * c_bar;
    let pose = Pose::new(rho, eta);
    Ok((pose, alignment_error(&pose, cloud, model)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| Vector3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)))
            .collect()
    }

    fn rand_quat(rng: &mut ChaCha8Rng) -> UnitQuaternion {
        let v = Vector4::from_fn(|_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        UnitQuaternion::from_vector4(&v)
    }

    #[test]
    fn identity_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = rand_points(&mut rng, 20);
        let (pose, eps) = horn_align(&p, &p).unwrap();
        assert_relative_eq!(pose.eta.angle(), 0.0, epsilon = 1e-7);
        assert!(pose.eta.scalar() >= 0.0);
        assert_relative_eq!(pose.rho, Vector3::zeros(), epsilon = 1e-12);
        assert!(eps < 1e-25);
    }

    #[test]
    fn recovers_known_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let c = rand_points(&mut rng, 30);
            let truth = Pose::new(Vector3::new(rng.random_range(-1.0..1.0), 0.3, 1.2), rand_quat(&mut rng));
            let d: Vec<_> = c.iter().map(|p| truth.transform_point(p)).collect();
            let (pose, eps) = horn_align(&c, &d).unwrap();
            let (dt, da) = pose.error_to(&truth);
            assert!(dt < 1e-10 && da < 1e-7, "dt {dt} da {da}");
            assert!(pose.eta.rotation_matrix().relative_eq(&truth.eta.rotation_matrix(), 1e-10, 1e-10));
            assert!(eps < 1e-20);
            assert!(pose.eta.scalar() >= 0.0);
        }
    }

    #[test]
    fn jacobi_matches_library_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let a = nalgebra::Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let m = a + a.transpose();
            let (vals, vecs) = jacobi_eigen4(&m);
            let mut ours: Vec<f64> = vals.iter().copied().collect();
            let mut lib: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
            ours.sort_by(f64::total_cmp);
            lib.sort_by(f64::total_cmp);
            for (x, y) in ours.iter().zip(&lib) {
                assert_relative_eq!(x, y, epsilon = 1e-12);
            }
            assert_relative_eq!(vecs.transpose() * vecs, Matrix4::identity(), epsilon = 1e-12);
            assert_relative_eq!(m * vecs, vecs * Matrix4::from_diagonal(&vals), epsilon = 1e-12);
        }
    }

    #[test]
    fn maximizes_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let c = rand_points(&mut rng, 10);
            let d = rand_points(&mut rng, 10);
            let cb = c.iter().sum::<Vector3<f64>>() / 10.0;
            let db = d.iter().sum::<Vector3<f64>>() / 10.0;
            let n: Matrix3<f64> = c.iter().zip(&d).map(|(a, b)| (a - cb) * (b - db).transpose()).sum();
            let m = horn_matrix(&n);
            let (pose, _) = horn_align(&c, &d).unwrap();
            let e = pose.eta;
            let x = Vector4::new(e.scalar(), e.vector().x, e.vector().y, e.vector().z);
            let lmax = SymmetricEigen::new(m).eigenvalues.max();
            assert_relative_eq!((x.transpose() * m * x)[0], lmax, epsilon = 1e-12);
        }
    }

    #[test]
    fn no_random_rotation_beats_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let c = rand_points(&mut rng, 8);
            let d = rand_points(&mut rng, 8);
            let (pose, eps) = horn_align(&c, &d).unwrap();
            let db = d.iter().sum::<Vector3<f64>>() / 8.0;
            let cb = c.iter().sum::<Vector3<f64>>() / 8.0;
            for _ in 0..10_000 {
                let eta = rand_quat(&mut rng);
                // Optimal translation for a fixed rotation.
                let trial = Pose::new(db - eta.rotation_matrix() * cb, eta);
                assert!(alignment_error(&trial, &c, &d) >= eps - 1e-12);
            }
            assert!(alignment_error(&pose, &c, &d) >= 0.0);
        }
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let line: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(horn_align(&line, &line), Err(Error::DegenerateAlignment(_))));
        let two = vec![Vector3::zeros(), Vector3::x()];
        assert!(horn_align(&two, &two).is_err());
        let same = vec![Vector3::new(1.0, 2.0, 3.0); 6];
        assert!(horn_align(&same, &same).is_err());
    }

    proptest! {
        #[test]
        fn residual_not_above_identity_guess(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = rand_points(&mut rng, 6);
            let d = rand_points(&mut rng, 6);
            if let Ok((_, eps)) = horn_align(&c, &d) {
                let cb = c.iter().sum::<Vector3<f64>>() / 6.0;
                let db = d.iter().sum::<Vector3<f64>>() / 6.0;
                let ident = Pose::new(db - cb, UnitQuaternion::IDENTITY);
                prop_assert!(eps <= alignment_error(&ident, &c, &d) + 1e-15);
            }
        }
    }
}
