use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Metrics, RunConfig, Termination, Timings};
use crate::detector::Detector;
use crate::error::{Error, Result};
use crate::image::Image;

/// PGM/PNG files in `dir`, sorted lexicographically by file name.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Frame {
        path: dir.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut frames = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("pgm" | "png")) && path.is_file() {
            frames.push(path);
        }
    }
    frames.sort();
    Ok(frames)
}

/// Runs the detector over consecutive frame pairs of a directory.
pub fn run_replay(dir: &Path, cfg: &RunConfig) -> Result<Metrics> {
    run_replay_with(dir, cfg, None)
}

/// [`run_replay`] writing one JSON-lines telemetry record per frame pair.
///
/// Replay has no ground truth, so lead distance is absent and no frame is
/// counted as a false positive.
pub fn run_replay_with(dir: &Path, cfg: &RunConfig, mut telemetry: Option<&mut dyn Write>) -> Result<Metrics> {
    cfg.validate()?;
    let frames = list_frames(dir)?;
    if frames.len() < 2 {
        return Err(Error::Frame {
            path: dir.to_path_buf(),
            reason: format!("need at least 2 frames, found {}", frames.len()),
        });
    }
    let mut detector = Detector::new(cfg.detector.clone(), cfg.flow.clone())?;
    let mut timings = Timings::default();
    let mut processed = 0u64;
    let mut signals = 0u64;
    for path in &frames {
        let image = Image::load(path)?;
        let Some(det) = detector.push(&image)? else {
            continue;
        };
        processed += 1;
        if det.signal.is_obstacle() {
            signals += 1;
        }
        let record = det.telemetry(cfg.report_timing);
        timings.push(record.proc_ms);
        if let Some(out) = telemetry.as_deref_mut() {
            serde_json::to_writer(&mut *out, &record)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(Metrics {
        termination: Termination::ReplayComplete,
        frames_processed: processed,
        mean_frame_ms: timings.mean(),
        p95_frame_ms: timings.p95(),
        signals_emitted: signals,
        detection_lead_m: None,
        false_positive_frames: 0,
        collisions: 0,
        min_clearance_m: None,
        goal_reached: false,
        sim_time_s: 0.0,
    })
}
