//! Parallel batches and the occlusion-margin search.

use std::fmt;

use rayon::prelude::*;

use super::config::ScenarioConfig;
use super::run::{run_scenario, FailureStage, RunReport};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BatchRow {
    pub case: usize,
    pub name: String,
    pub seed: u64,
    /// m; NaN without intercept.
    pub position_error: f64,
    /// m/s; NaN without intercept.
    pub velocity_error: f64,
    pub prediction_error: Option<f64>,
    pub shadow_prediction_error: Option<f64>,
    pub success: bool,
    pub failure_stage: Option<FailureStage>,
}

/// Per-case capture errors plus averages over intercepted cases.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchTable {
    pub rows: Vec<BatchRow>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.filter(|v| v.is_finite()).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl BatchTable {
    pub fn mean_position_error(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.position_error))
    }

    pub fn mean_velocity_error(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.velocity_error))
    }

    pub fn success_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.success).count() as f64 / self.rows.len() as f64
    }

    pub fn mean_prediction_error(&self) -> f64 {
        mean(self.rows.iter().filter_map(|r| r.prediction_error))
    }

    pub fn mean_shadow_prediction_error(&self) -> f64 {
        mean(self.rows.iter().filter_map(|r| r.shadow_prediction_error))
    }
}

impl fmt::Display for BatchTable {
    /// CSV with errors in cm and mm/s and a closing average row.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "case,name,seed,position_error_cm,velocity_error_mm_s,success,failure_stage")?;
        for r in &self.rows {
            writeln!(
                f,
                "{},{},{},{},{},{},{}",
                r.case,
                r.name,
                r.seed,
                r.position_error * 100.0,
                r.velocity_error * 1000.0,
                u8::from(r.success),
                r.failure_stage.map_or("", |s| s.label())
            )?;
        }
        writeln!(
            f,
            "average,,,{},{},{},",
            self.mean_position_error() * 100.0,
            self.mean_velocity_error() * 1000.0,
            self.success_rate()
        )
    }
}

fn row(case: usize, rep: &RunReport) -> BatchRow {
    BatchRow {
        case,
        name: rep.name.clone(),
        seed: rep.seed,
        position_error: rep.position_error_at_capture,
        velocity_error: rep.relative_speed_at_capture,
        prediction_error: rep.prediction_error,
        shadow_prediction_error: rep.shadow_prediction_error,
        success: rep.success,
        failure_stage: rep.failure_stage,
    }
}

/// Copies of `cfg` with the given seeds.
pub fn seed_sweep(cfg: &ScenarioConfig, seeds: impl IntoIterator<Item = u64>) -> Vec<ScenarioConfig> {
    seeds
        .into_iter()
        .map(|seed| ScenarioConfig { seed, ..cfg.clone() })
        .collect()
}

/// Runs every scenario, in parallel on `jobs` workers (rayon's default when
/// `None`). Rows are in input order, numbered from 1.
pub fn run_batch(cfgs: &[ScenarioConfig], jobs: Option<usize>) -> Result<BatchTable> {
    Ok(run_batch_reports(cfgs, jobs)?
        .iter()
        .enumerate()
        .map(|(i, r)| row(i + 1, r))
        .collect::<Vec<_>>()
        .into())
}

pub fn run_batch_reports(cfgs: &[ScenarioConfig], jobs: Option<usize>) -> Result<Vec<RunReport>> {
    if cfgs.is_empty() {
        return Err(Error::InvalidArgument("batch needs at least one scenario".into()));
    }
    for c in cfgs {
        c.validate()?;
    }
    let work = || cfgs.par_iter().map(run_scenario).collect::<Result<Vec<_>>>();
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

impl From<Vec<BatchRow>> for BatchTable {
    fn from(rows: Vec<BatchRow>) -> Self {
        Self { rows }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginResult {
    /// Longest terminal blackout found to keep the capture error within the envelope, s.
    pub margin: f64,
    /// `(blackout, position error)` for every run, in evaluation order.
    pub probes: Vec<(f64, f64)>,
}

/// Bisects the terminal blackout length on `[0, duration]` down to
/// `resolution` seconds. Zero if even the unoccluded run misses the envelope.
pub fn occlusion_margin(cfg: &ScenarioConfig, envelope: f64, resolution: f64) -> Result<MarginResult> {
    cfg.validate()?;
    if !(envelope >= 0.0) || !(resolution > 0.0) {
        return Err(Error::Config(format!(
            "envelope {envelope} must be non-negative and resolution {resolution} positive"
        )));
    }
    let mut probes = Vec::new();
    let mut within = |blackout: f64| -> Result<bool> {
        let rep = run_scenario(&ScenarioConfig {
            terminal_blackout: blackout,
            ..cfg.clone()
        })?;
        let e = rep.position_error_at_capture;
        probes.push((blackout, e));
        Ok(rep.intercept_at.is_some() && e <= envelope)
    };
    if !within(0.0)? {
        return Ok(MarginResult { margin: 0.0, probes });
    }
    let (mut lo, mut hi) = (0.0, cfg.duration);
    if within(hi)? {
        return Ok(MarginResult { margin: hi, probes });
    }
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if within(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MarginResult { margin: lo, probes })
}
