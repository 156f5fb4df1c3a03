//! Simulated world: ground-truth target motion, surface model, range
//! sensor with injected faults, and the chaser plant.

pub mod chaser;
pub mod fault;
pub mod model;
pub mod sensor;
pub mod truth;

pub use chaser::{step_chaser, ChaserState};
pub use fault::{FaultMode, FaultSchedule, FaultWindow};
pub use model::SurfaceModel;
pub use sensor::{render_scan, render_scan_detailed, PointCloud, ScanDetail, SensorConfig};
pub use truth::{propagate_truth, ProcessNoise, TruthPropagator, TRUTH_STEP};
