//! Injected vision-system faults over half-open time windows `[start, end)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FaultMode {
    /// No returns at all.
    Blackout,
    /// Sensor noise scaled by `noise_multiplier`.
    Degraded { noise_multiplier: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultWindow {
    pub start: f64,
    pub end: f64,
    #[serde(flatten)]
    pub mode: FaultMode,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FaultWindow>", into = "Vec<FaultWindow>")]
pub struct FaultSchedule {
    windows: Vec<FaultWindow>,
}

impl FaultSchedule {
    pub fn none() -> Self {
        Self::default()
    }

    /// Validates and sorts the windows by start time.
    pub fn new(mut windows: Vec<FaultWindow>) -> Result<Self> {
        for w in &windows {
            if !(w.start.is_finite() && w.end.is_finite() && w.start < w.end) {
                return Err(Error::Config(format!(
                    "fault window [{}, {}) must have finite start < end",
                    w.start, w.end
                )));
            }
            if let FaultMode::Degraded { noise_multiplier } = w.mode {
                if !(noise_multiplier.is_finite() && noise_multiplier >= 0.0) {
                    return Err(Error::Config(format!(
                        "noise multiplier {noise_multiplier} must be finite and non-negative"
                    )));
                }
            }
        }
        windows.sort_by(|a, b| a.start.total_cmp(&b.start));
        for pair in windows.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(Error::Config(format!(
                    "fault windows [{}, {}) and [{}, {}) overlap",
                    pair[0].start, pair[0].end, pair[1].start, pair[1].end
                )));
            }
        }
        Ok(Self { windows })
    }

    pub fn blackout(start: f64, end: f64) -> Result<Self> {
        Self::new(vec![FaultWindow { start, end, mode: FaultMode::Blackout }])
    }

    pub fn windows(&self) -> &[FaultWindow] {
        &self.windows
    }

    pub fn active(&self, t: f64) -> Option<FaultMode> {
        self.windows
            .iter()
            .find(|w| w.start <= t && t < w.end)
            .map(|w| w.mode)
    }

    pub fn is_blackout(&self, t: f64) -> bool {
        matches!(self.active(t), Some(FaultMode::Blackout))
    }

    /// Adds a window, keeping the schedule valid.
    pub fn with(&self, w: FaultWindow) -> Result<Self> {
        let mut all = self.windows.clone();
        all.push(w);
        Self::new(all)
    }
}

impl TryFrom<Vec<FaultWindow>> for FaultSchedule {
    type Error = Error;

    fn try_from(w: Vec<FaultWindow>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<FaultSchedule> for Vec<FaultWindow> {
    fn from(s: FaultSchedule) -> Self {
        s.windows
    }
}
