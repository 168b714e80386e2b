//! Two-frame obstacle detector: downscale, dense flow, semi-dense lattice
//! sampling, five vertical regions, and a persistence-checked left/right
//! decision.

mod decide;
mod regions;

pub use decide::{decide, region_sign};
pub use regions::{make_grid, regionize, sample_and_discard};

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowEstimator, FlowField, FlowParams};
use crate::image::{gaussian_blur, resize, Image};

/// Number of vertical regions: far-left, near-left, center, near-right,
/// far-right.
pub const REGIONS: usize = 5;

/// Working width at which `magnitude_threshold` is expressed.
pub const REFERENCE_WIDTH: f64 = 320.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionStat {
    Mean,
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub work_width: usize,
    pub work_height: usize,
    pub grid_step: usize,
    /// Sampled vectors longer than this (px) are treated as mismatches.
    pub discard_max_mag: f64,
    pub roi_enabled: bool,
    /// Fraction of image columns, centered, kept when `roi_enabled`.
    pub roi_fraction: f64,
    pub stat: RegionStat,
    pub history_len: usize,
    pub persistence_min: usize,
    /// Threshold on the winning region statistic, in px at a 320-px working
    /// width; scaled linearly for other widths.
    pub magnitude_threshold: f64,
    pub sharpen_enabled: bool,
    pub sharpen_amount: f64,
    pub sharpen_sigma: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            work_width: 320,
            work_height: 240,
            grid_step: 8,
            discard_max_mag: 8.0,
            roi_enabled: false,
            roi_fraction: 0.25,
            stat: RegionStat::Median,
            history_len: 5,
            persistence_min: 3,
            magnitude_threshold: 1.5,
            sharpen_enabled: false,
            sharpen_amount: 1.0,
            sharpen_sigma: 1.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.work_width == 0 || self.work_height == 0 {
            return bad("work dimensions must be nonzero");
        }
        if self.grid_step < 2 {
            return bad("grid_step must be >= 2");
        }
        if !(self.roi_fraction > 0.0 && self.roi_fraction <= 1.0) {
            return bad("roi_fraction must lie in (0, 1]");
        }
        if self.history_len == 0 || self.persistence_min > self.history_len {
            return bad("persistence_min must not exceed history_len");
        }
        if !(self.magnitude_threshold > 0.0) {
            return bad("magnitude_threshold must be positive");
        }
        if !(self.discard_max_mag > 0.0) {
            return bad("discard_max_mag must be positive");
        }
        Ok(())
    }

    pub fn effective_threshold(&self) -> f64 {
        self.magnitude_threshold * self.work_width as f64 / REFERENCE_WIDTH
    }
}

/// Lattice samples of one flow field.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFlow {
    pub points: Vec<(f64, f64)>,
    pub vectors: Vec<[f64; 2]>,
    pub kept: Vec<bool>,
}

impl SampledFlow {
    pub fn kept_count(&self) -> usize {
        self.kept.iter().filter(|k| **k).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub region_stat: [f64; REGIONS],
    pub region_count: [usize; REGIONS],
    pub argmax_region: usize,
    pub argmax_unique: bool,
    pub frame_seq: u64,
}

impl RegionReport {
    pub fn max_stat(&self) -> f64 {
        self.region_stat[self.argmax_region]
    }
}

/// Obstacle side: `-1` left half, `+1` right half, `0` nothing detected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionSignal {
    pub value: i8,
    pub region: Option<usize>,
    pub stat_at_max: f64,
}

impl DetectionSignal {
    pub const NONE: DetectionSignal = DetectionSignal {
        value: 0,
        region: None,
        stat_at_max: 0.0,
    };

    pub fn is_obstacle(&self) -> bool {
        self.value != 0
    }
}

/// One JSON-lines telemetry record per processed frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTelemetry {
    pub frame_seq: u64,
    pub regions: [f64; REGIONS],
    pub argmax: usize,
    pub signal: i8,
    pub kept: usize,
    pub proc_ms: f64,
}

/// Everything `detect` produces for one frame pair.
#[derive(Debug, Clone)]
pub struct Detection {
    pub signal: DetectionSignal,
    pub report: RegionReport,
    pub flow: FlowField,
    pub kept: usize,
    pub proc_ms: f64,
}

impl Detection {
    pub fn telemetry(&self, with_timing: bool) -> FrameTelemetry {
        FrameTelemetry {
            frame_seq: self.report.frame_seq,
            regions: self.report.region_stat,
            argmax: self.report.argmax_region,
            signal: self.signal.value,
            kept: self.kept,
            proc_ms: if with_timing { self.proc_ms } else { 0.0 },
        }
    }
}

/// Downscales to the working size and optionally applies an unsharp mask.
pub fn preprocess(frame: &Image, cfg: &DetectorConfig) -> Result<Image> {
    let img = resize(frame, cfg.work_width, cfg.work_height)?;
    if !cfg.sharpen_enabled {
        return Ok(img);
    }
    let blurred = gaussian_blur(&img, cfg.sharpen_sigma);
    let amount = cfg.sharpen_amount;
    Ok(Image::from_fn(img.width(), img.height(), |x, y| {
        let v = img.get(x, y);
        (v + amount * (v - blurred.get(x, y))).clamp(0.0, 1.0)
    }))
}

/// Stateful detector: rolling report history plus the flow estimator's cached
/// expansion of the last frame.
#[derive(Debug, Clone)]
pub struct Detector {
    cfg: DetectorConfig,
    estimator: FlowEstimator,
    grid: Vec<(f64, f64)>,
    history: VecDeque<RegionReport>,
    last_frame: Option<Image>,
    frame_seq: u64,
}

impl Detector {
    pub fn new(cfg: DetectorConfig, flow: FlowParams) -> Result<Self> {
        cfg.validate()?;
        let grid = make_grid(cfg.work_width, cfg.work_height, cfg.grid_step);
        Ok(Self {
            estimator: FlowEstimator::new(flow)?,
            grid,
            history: VecDeque::with_capacity(cfg.history_len),
            last_frame: None,
            frame_seq: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn history(&self) -> impl Iterator<Item = &RegionReport> {
        self.history.iter()
    }

    /// Clears history and the cached previous frame.
    pub fn reset(&mut self) {
        self.history.clear();
        self.estimator.reset();
        self.last_frame = None;
    }

    /// Streaming entry point: feeds the next camera frame and returns the
    /// detection for (previous, current), or `None` on the first frame.
    pub fn push(&mut self, frame: &Image) -> Result<Option<Detection>> {
        let start = Instant::now();
        let work = preprocess(frame, &self.cfg)?;
        let flow = self.estimator.push(&work)?;
        self.last_frame = Some(work);
        let Some(flow) = flow else {
            return Ok(None);
        };
        Ok(Some(self.finish(flow, start)))
    }

    /// Detection for an explicit frame pair. Equivalent to pushing `prev` then
    /// `curr`; `prev` is not re-expanded when it was the last frame seen.
    pub fn detect(&mut self, prev: &Image, curr: &Image) -> Result<Detection> {
        if prev.dims() != curr.dims() {
            return Err(Error::DimensionMismatch {
                left: prev.dims(),
                right: curr.dims(),
            });
        }
        let start = Instant::now();
        let prev_work = preprocess(prev, &self.cfg)?;
        if self.last_frame.as_ref() != Some(&prev_work) {
            self.estimator.reset();
            self.estimator.push(&prev_work)?;
        }
        let work = preprocess(curr, &self.cfg)?;
        let flow = self.estimator.push(&work)?.expect("previous frame pushed");
        self.last_frame = Some(work);
        Ok(self.finish(flow, start))
    }

    fn finish(&mut self, flow: FlowField, start: Instant) -> Detection {
        let sampled = sample_and_discard(&flow, &self.grid, &self.cfg);
        let mut report = regionize(&sampled, self.cfg.work_width, &self.cfg);
        self.frame_seq += 1;
        report.frame_seq = self.frame_seq;
        if self.history.len() == self.cfg.history_len {
            self.history.pop_front();
        }
        self.history.push_back(report.clone());
        let signal = decide(self.history.make_contiguous(), &self.cfg);
        Detection {
            signal,
            report,
            flow,
            kept: sampled.kept_count(),
            proc_ms: start.elapsed().as_secs_f64() * 1e3,
        }
    }
}
