//! Prediction-seeded ICP against a surface model: closest-point search,
//! Horn's closed-form alignment and the iteration that produces the
//! registration health flag.

pub mod horn;
pub mod icp;
pub mod spatial;

pub use horn::{horn_align, jacobi_eigen4};
pub use icp::{
    find_correspondences, icp_register, initial_pose_from_prediction, Correspondence, IcpConfig,
    IcpStatus, RegistrationResult,
};
pub use spatial::{closest_point_on_triangle, ClosestHit, ClosestPointIndex};
