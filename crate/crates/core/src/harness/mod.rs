//! Scenario configuration, the rate-scheduled closed loop, batch runs and
//! the occlusion-margin search.

pub mod batch;
pub mod config;
pub mod run;

pub use batch::{occlusion_margin, run_batch, run_batch_reports, seed_sweep, BatchRow, BatchTable, MarginResult};
pub use config::{
    AcquisitionConfig, ChaserConfig, NoiseConfig, RatesConfig, ScenarioConfig, TargetConfig,
};
pub use run::{acquisition_pose, derive_seed, run_scenario, run_with_model, EpochRecord, FailureStage, RunReport};
