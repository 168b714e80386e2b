#![allow(dead_code)]

use flowpilot::detector::DetectorConfig;
use flowpilot::flow::{FlowField, PolyCoeffs, Sym2};
use flowpilot::image::{gaussian_blur, gaussian_kernel};
use flowpilot::sim::{render, CameraModel, Obstacle, Pose, Scenario, World};
use flowpilot::Image;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_image(w: usize, h: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(w, h, |_, _| rng.random::<f64>())
}

/// White noise low-passed to a correlation length of a few pixels, stretched
/// back to roughly unit contrast.
pub fn smooth_texture(w: usize, h: usize, sigma: f64, seed: u64) -> Image {
    let blurred = gaussian_blur(&random_image(w, h, seed), sigma);
    let mean = blurred.data().iter().sum::<f64>() / blurred.data().len() as f64;
    let var = blurred
        .data()
        .iter()
        .map(|v| (v - mean).powi(2))
        .sum::<f64>()
        / blurred.data().len() as f64;
    let gain = 0.18 / var.sqrt();
    blurred.map(|v| (0.5 + gain * (v - mean)).clamp(0.0, 1.0))
}

/// Per-pixel weighted least squares over the basis {1, x, y, x^2, y^2, xy}
/// with applicability k(dx) k(dy), solved with a dense LU factorization.
pub fn dense_poly_fit(img: &Image, x0: usize, y0: usize, sigma: f64, radius: usize) -> PolyCoeffs {
    let k = gaussian_kernel(sigma, radius);
    let r = radius as i64;
    let mut ata = DMatrix::<f64>::zeros(6, 6);
    let mut atb = DVector::<f64>::zeros(6);
    for dy in -r..=r {
        for dx in -r..=r {
            let w = k[(dx + r) as usize] * k[(dy + r) as usize];
            let (fx, fy) = (dx as f64, dy as f64);
            let basis = [1.0, fx, fy, fx * fx, fy * fy, fx * fy];
            let v = img.get((x0 as i64 + dx) as usize, (y0 as i64 + dy) as usize);
            for i in 0..6 {
                atb[i] += w * basis[i] * v;
                for j in 0..6 {
                    ata[(i, j)] += w * basis[i] * basis[j];
                }
            }
        }
    }
    let sol = ata.lu().solve(&atb).expect("nonsingular fit");
    PolyCoeffs {
        a: Sym2::new(sol[3], 0.5 * sol[5], sol[4]),
        b: [sol[1], sol[2]],
        c: sol[0],
    }
}

/// Median endpoint error against a constant displacement, over pixels at
/// least `margin` away from the border.
pub fn median_endpoint_error(flow: &FlowField, truth: [f64; 2], margin: usize) -> f64 {
    let mut errs = Vec::new();
    for y in margin..flow.height - margin {
        for x in margin..flow.width - margin {
            let d = flow.at(x, y);
            errs.push(((d[0] - truth[0]).powi(2) + (d[1] - truth[1]).powi(2)).sqrt());
        }
    }
    errs.sort_by(f64::total_cmp);
    errs[errs.len() / 2]
}

/// Camera frames of a forward approach toward one randomly placed trunk,
/// plus the same approach in the mirrored world.
pub fn approach_frames(seed: u64, frames: usize, cam: &CameraModel) -> (Vec<Image>, Vec<Image>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = rng.random_range(0.3..1.0);
    let range = rng.random_range(3.0..6.0);
    let trunk = Obstacle {
        center_x: range + radius,
        center_y: rng.random_range(0.25..0.9) * if rng.random::<bool>() { 1.0 } else { -1.0 },
        radius,
        height: 8.0,
        texture_contrast: rng.random_range(0.25..0.45),
    };
    let world = World::new(vec![trunk], seed).expect("valid world");
    let mirrored = Scenario {
        obstacles: world.obstacles.clone(),
        seed,
        ..Scenario::default()
    }
    .mirrored()
    .world()
    .expect("valid world");
    let step = rng.random_range(0.1..0.2);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for k in 0..frames {
        let pose = Pose::at(k as f64 * step, 0.0, 2.0);
        a.push(render(&world, &pose, cam));
        b.push(render(&mirrored, &pose, cam));
    }
    (a, b)
}

pub fn small_camera() -> CameraModel {
    CameraModel {
        width: 160,
        height: 120,
        ..CameraModel::default()
    }
}

pub fn small_detector() -> DetectorConfig {
    DetectorConfig {
        work_width: 160,
        work_height: 120,
        ..DetectorConfig::default()
    }
}
