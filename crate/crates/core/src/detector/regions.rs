use super::{DetectorConfig, RegionReport, RegionStat, SampledFlow, REGIONS};
use crate::flow::FlowField;

/// Symmetric point lattice with spacing `step`, centered in the image.
///
/// Coordinates are continuous with pixel `i` spanning `[i, i + 1)`, so the
/// lattice is mirror-symmetric about `width / 2`. A step larger than the
/// smaller image side yields the single center point.
pub fn make_grid(width: usize, height: usize, step: usize) -> Vec<(f64, f64)> {
    if step > width.min(height) {
        return vec![(width as f64 / 2.0, height as f64 / 2.0)];
    }
    let axis = |len: usize| -> Vec<f64> {
        let n = len / step;
        let margin = (len as f64 - (step * (n - 1)) as f64) / 2.0;
        (0..n).map(|k| margin + (k * step) as f64).collect()
    };
    let xs = axis(width);
    let ys = axis(height);
    ys.iter()
        .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
        .collect()
}

/// Reads the flow at each lattice point (bilinear between pixel centers) and
/// keeps it when every contributing pixel is valid and its Euclidean length
/// is at most `discard_max_mag`.
pub fn sample_and_discard(flow: &FlowField, points: &[(f64, f64)], cfg: &DetectorConfig) -> SampledFlow {
    let mut vectors = Vec::with_capacity(points.len());
    let mut kept = Vec::with_capacity(points.len());
    for &(px, py) in points {
        let (v, valid) = sample(flow, px - 0.5, py - 0.5);
        let mag = (v[0] * v[0] + v[1] * v[1]).sqrt();
        vectors.push(v);
        kept.push(valid && mag.is_finite() && mag <= cfg.discard_max_mag);
    }
    SampledFlow {
        points: points.to_vec(),
        vectors,
        kept,
    }
}

fn sample(flow: &FlowField, x: f64, y: f64) -> ([f64; 2], bool) {
    let (w, h) = (flow.width, flow.height);
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
    let taps = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x1, y0, fx * (1.0 - fy)),
        (x0, y1, (1.0 - fx) * fy),
        (x1, y1, fx * fy),
    ];
    let mut v = [0.0; 2];
    let mut valid = true;
    for (tx, ty, wgt) in taps {
        valid &= flow.is_valid(tx, ty);
        let d = flow.at(tx, ty);
        v[0] += wgt * d[0];
        v[1] += wgt * d[1];
    }
    (v, valid)
}

/// Assigns kept samples to five equal column bands (of the full width, or of
/// the centered ROI band) and summarizes each band's flow magnitudes.
pub fn regionize(s: &SampledFlow, width: usize, cfg: &DetectorConfig) -> RegionReport {
    let w = width as f64;
    let (lo, hi) = if cfg.roi_enabled {
        let half = cfg.roi_fraction * w / 2.0;
        (w / 2.0 - half, w / 2.0 + half)
    } else {
        (0.0, w)
    };
    let band = (hi - lo) / REGIONS as f64;

    let mut mags: [Vec<f64>; REGIONS] = Default::default();
    for ((&(x, _), v), &keep) in s.points.iter().zip(&s.vectors).zip(&s.kept) {
        if !keep || x < lo || x > hi {
            continue;
        }
        let idx = (((x - lo) / band).floor() as usize).min(REGIONS - 1);
        mags[idx].push((v[0] * v[0] + v[1] * v[1]).sqrt());
    }

    let mut region_stat = [0.0; REGIONS];
    let mut region_count = [0; REGIONS];
    for (i, m) in mags.iter_mut().enumerate() {
        region_count[i] = m.len();
        region_stat[i] = match cfg.stat {
            RegionStat::Mean => mean(m),
            RegionStat::Median => median(m),
        };
    }

    let mut argmax_region = 0;
    for i in 1..REGIONS {
        if region_stat[i] > region_stat[argmax_region] {
            argmax_region = i;
        }
    }
    let best = region_stat[argmax_region];
    let argmax_unique = region_stat
        .iter()
        .enumerate()
        .all(|(i, &v)| i == argmax_region || v != best);

    RegionReport {
        region_stat,
        region_count,
        argmax_region,
        argmax_unique,
        frame_seq: 0,
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Median; the average of the two central values for even counts.
fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
