//! Entry points that wire the detector, pilot, bus and simulator together:
//! offline replay over a frame directory, headless closed-loop simulation,
//! and a served loop for the operator console.

mod replay;
mod serve;
mod sim;

pub use replay::{list_frames, run_replay, run_replay_with};
pub use serve::{serve, ServeHandle, ServeOptions};
pub use sim::{run_sim, run_sim_with, SimLoop, TickReport};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::flow::FlowParams;
use crate::pilot::PilotConfig;

/// File-configurable part of a run (the `--config` JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub detector: DetectorConfig,
    pub flow: FlowParams,
    pub pilot: PilotConfig,
    /// Sim-time limit per closed-loop run, s.
    pub timeout_s: f64,
    /// Width of the ground-truth corridor used for scoring, m.
    pub corridor_width: f64,
    /// Ground-truth look-ahead, m.
    pub horizon: f64,
    /// Collision sphere radius around the drone, m.
    pub body_radius: f64,
    /// Record wall-clock processing times. Off keeps metrics reproducible.
    pub report_timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            detector: DetectorConfig::default(),
            flow: FlowParams::default(),
            pilot: PilotConfig::default(),
            timeout_s: 120.0,
            corridor_width: 1.0,
            horizon: 15.0,
            body_radius: 0.25,
            report_timing: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.flow.validate()?;
        self.pilot.validate()?;
        let positive = [self.timeout_s, self.corridor_width, self.horizon];
        if positive.iter().any(|v| !(*v > 0.0)) || !(self.body_radius >= 0.0) {
            return Err(Error::Config(
                "timeout_s, corridor_width and horizon must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Why a closed-loop run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GoalReached,
    Collision,
    Timeout,
    ReplayComplete,
}

impl Termination {
    /// Process exit code for the CLI.
    pub fn exit_code(self) -> i32 {
        match self {
            Termination::GoalReached | Termination::ReplayComplete => 0,
            Termination::Collision => 2,
            Termination::Timeout => 3,
        }
    }
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub termination: Termination,
    pub frames_processed: u64,
    pub mean_frame_ms: f64,
    pub p95_frame_ms: f64,
    pub signals_emitted: u64,
    /// Ground-truth distance at the first correct nonzero signal, m.
    pub detection_lead_m: Option<f64>,
    pub false_positive_frames: u64,
    pub collisions: u64,
    pub min_clearance_m: Option<f64>,
    pub goal_reached: bool,
    pub sim_time_s: f64,
}

impl Metrics {
    pub fn false_positive_rate(&self) -> f64 {
        if self.frames_processed == 0 {
            0.0
        } else {
            self.false_positive_frames as f64 / self.frames_processed as f64
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// Running frame-time statistics.
#[derive(Debug, Default, Clone)]
pub(crate) struct Timings {
    samples: Vec<f64>,
}

impl Timings {
    pub(crate) fn push(&mut self, ms: f64) {
        self.samples.push(ms);
    }

    pub(crate) fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Nearest-rank 95th percentile.
    pub(crate) fn p95(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let mut s = self.samples.clone();
        s.sort_by(f64::total_cmp);
        let rank = (0.95 * s.len() as f64).ceil() as usize;
        s[rank.clamp(1, s.len()) - 1]
    }
}
