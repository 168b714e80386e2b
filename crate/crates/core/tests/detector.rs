mod common;

use common::{approach_frames, small_camera, small_detector, smooth_texture};
use flowpilot::detector::{decide, make_grid, regionize, DetectorConfig, RegionReport, SampledFlow, Detector, REGIONS};
use flowpilot::flow::FlowParams;
use flowpilot::sim::{ground_truth, render, Obstacle, Pose, World};
use flowpilot::Image;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn signals(frames: &[Image], cfg: &DetectorConfig) -> Vec<i8> {
    let mut det = Detector::new(cfg.clone(), FlowParams::default()).unwrap();
    frames
        .iter()
        .filter_map(|f| det.push(f).unwrap())
        .map(|d| d.signal.value)
        .collect()
}

#[test]
fn static_scene_is_silent() {
    let frame = smooth_texture(160, 120, 2.0, 8);
    let frames = vec![frame; 10];
    assert!(signals(&frames, &small_detector()).iter().all(|s| *s == 0));
}

#[test]
fn mirrored_approaches_negate_the_signal() {
    for seed in 100..104 {
        let (a, b) = approach_frames(seed, 10, &small_camera());
        let sa = signals(&a, &small_detector());
        let sb = signals(&b, &small_detector());
        assert!(sa.iter().any(|s| *s != 0), "seed {seed}: no detection");
        let negated: Vec<i8> = sa.iter().map(|s| -s).collect();
        assert_eq!(sb, negated, "seed {seed}");
    }
}

#[test]
fn repeated_runs_are_bit_identical() {
    let (a, _) = approach_frames(7, 8, &small_camera());
    let run = || {
        let mut det = Detector::new(small_detector(), FlowParams::default()).unwrap();
        a.iter()
            .filter_map(|f| det.push(f).unwrap())
            .map(|d| (d.signal.value, d.report.region_stat.map(f64::to_bits)))
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn left_trunk_is_flagged_left_with_margin() {
    let trunk = Obstacle {
        center_x: 7.5,
        center_y: -0.3,
        radius: 0.5,
        height: 8.0,
        texture_contrast: 0.35,
    };
    let world = World::new(vec![trunk], 21).unwrap();
    let cam = small_camera();
    let mut det = Detector::new(small_detector(), FlowParams::default()).unwrap();
    let mut first = None;
    for k in 0..100 {
        let pose = Pose::at(k as f64 / 15.0, 0.0, 2.0);
        if let Some(d) = det.push(&render(&world, &pose, &cam)).unwrap() {
            if d.signal.value != 0 {
                first = Some((d.signal.value, pose));
                break;
            }
        }
    }
    let (value, pose) = first.expect("trunk never detected");
    assert_eq!(value, -1);
    let gt = ground_truth(&world, &pose, 1.0, 15.0);
    assert!(gt.distance.unwrap() >= 2.0, "detected at {:?}", gt.distance);
}

fn random_samples(rng: &mut ChaCha8Rng, width: usize, n: usize) -> SampledFlow {
    let points: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(0.0..width as f64), rng.random_range(0.0..100.0)))
        .collect();
    let vectors = (0..n)
        .map(|_| [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)])
        .collect();
    let kept = (0..n).map(|_| rng.random::<f64>() < 0.8).collect();
    SampledFlow { points, vectors, kept }
}

fn report_with(argmax: usize, stat: f64, rng: &mut ChaCha8Rng) -> RegionReport {
    let mut region_stat = [0.0; REGIONS];
    for (i, s) in region_stat.iter_mut().enumerate() {
        if i != argmax {
            *s = rng.random_range(0.0..stat * 0.9);
        }
    }
    region_stat[argmax] = stat;
    RegionReport {
        region_stat,
        region_count: [10; REGIONS],
        argmax_region: argmax,
        argmax_unique: true,
        frame_seq: 0,
    }
}

#[test]
fn single_frame_spikes_never_fire() {
    let cfg = DetectorConfig::default();
    let tau = cfg.effective_threshold();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let spike_region = rng.random_range(0..REGIONS);
        let spike_at = rng.random_range(0..12);
        let mut history = Vec::new();
        for k in 0..12 {
            let r = if k == spike_at {
                report_with(spike_region, rng.random_range(tau..10.0 * tau), &mut rng)
            } else {
                let other = (spike_region + rng.random_range(1..REGIONS)) % REGIONS;
                report_with(other, rng.random_range(0.05..0.99) * tau, &mut rng)
            };
            history.push(r);
            let from = history.len().saturating_sub(cfg.history_len);
            assert_eq!(decide(&history[from..], &cfg).value, 0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regions_partition_kept_points(seed in any::<u64>(), n in 0usize..400) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_samples(&mut rng, 320, n);
        let r = regionize(&s, 320, &DetectorConfig::default());
        prop_assert_eq!(r.region_count.iter().sum::<usize>(), s.kept_count());
        for (i, count) in r.region_count.iter().enumerate() {
            let expected = s.points.iter().zip(&s.kept)
                .filter(|((x, _), k)| **k && ((x / 64.0).floor() as usize).min(4) == i)
                .count();
            prop_assert_eq!(*count, expected);
        }
    }

    #[test]
    fn scaling_magnitudes_preserves_the_decision(seed in any::<u64>(), k in -4i32..5) {
        let lambda = 2f64.powi(k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = DetectorConfig::default();
        let scaled_cfg = DetectorConfig {
            magnitude_threshold: cfg.magnitude_threshold * lambda,
            ..cfg.clone()
        };
        let (mut plain, mut scaled) = (Vec::new(), Vec::new());
        for _ in 0..8 {
            let s = random_samples(&mut rng, 320, 200);
            let mut t = s.clone();
            for v in &mut t.vectors {
                *v = [v[0] * lambda, v[1] * lambda];
            }
            let a = regionize(&s, 320, &cfg);
            let b = regionize(&t, 320, &cfg);
            prop_assert_eq!(a.argmax_region, b.argmax_region);
            plain.push(a);
            scaled.push(b);
            let from = plain.len().saturating_sub(cfg.history_len);
            prop_assert_eq!(
                decide(&plain[from..], &cfg).value,
                decide(&scaled[from..], &scaled_cfg).value
            );
        }
    }
}

#[test]
fn grid_is_mirror_symmetric() {
    let grid = make_grid(320, 240, 8);
    for &(x, y) in &grid {
        assert!(grid.iter().any(|&(u, v)| (u - (320.0 - x)).abs() < 1e-12 && v == y));
    }
}
