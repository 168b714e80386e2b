use super::{CameraModel, Obstacle, Pose, World};
use crate::image::Image;

/// What a camera ray hit first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hit {
    Sky,
    Ground,
    Obstacle(usize),
}

/// Raycasts one grayscale frame. Deterministic in `(world, pose, cam)`.
///
/// Rays leave pixel centers, so column `i` and `width - 1 - i` are exact
/// mirror images. Procedural texture is keyed to world coordinates and faded
/// towards its mean as the pixel footprint outgrows each octave.
pub fn render(world: &World, pose: &Pose, cam: &CameraModel) -> Image {
    let tracer = Tracer::new(world, pose, cam);
    let mut data = Vec::with_capacity(cam.width * cam.height);
    for j in 0..cam.height {
        for i in 0..cam.width {
            data.push(tracer.trace(i, j).0);
        }
    }
    Image::new(cam.width, cam.height, data).expect("renderer produces finite samples")
}

/// Per-pixel hit labels, row-major.
pub fn render_hits(world: &World, pose: &Pose, cam: &CameraModel) -> Vec<Hit> {
    let tracer = Tracer::new(world, pose, cam);
    let mut out = Vec::with_capacity(cam.width * cam.height);
    for j in 0..cam.height {
        for i in 0..cam.width {
            out.push(tracer.trace(i, j).1);
        }
    }
    out
}

struct Tracer<'a> {
    world: &'a World,
    origin: [f64; 3],
    heading: [f64; 2],
    right: [f64; 2],
    focal: f64,
    half_w: f64,
    half_h: f64,
}

impl<'a> Tracer<'a> {
    fn new(world: &'a World, pose: &Pose, cam: &CameraModel) -> Self {
        Self {
            world,
            origin: [pose.x, pose.y, pose.z],
            heading: pose.heading(),
            right: pose.right(),
            focal: cam.focal(),
            half_w: cam.width as f64 / 2.0,
            half_h: cam.height as f64 / 2.0,
        }
    }

    fn trace(&self, i: usize, j: usize) -> (f64, Hit) {
        let r = (i as f64 + 0.5 - self.half_w) / self.focal;
        let u = -(j as f64 + 0.5 - self.half_h) / self.focal;
        let dir = [
            self.heading[0] + r * self.right[0],
            self.heading[1] + r * self.right[1],
            u,
        ];
        let dir_len = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        // world length covered by one pixel per unit of ray parameter
        let px_scale = dir_len / self.focal;

        let mut best_t = f64::INFINITY;
        let mut hit = Hit::Sky;
        if dir[2] < 0.0 {
            best_t = -self.origin[2] / dir[2];
            hit = Hit::Ground;
        }
        for (k, o) in self.world.obstacles.iter().enumerate() {
            if let Some(t) = intersect_cylinder(self.origin, dir, o) {
                if t < best_t {
                    best_t = t;
                    hit = Hit::Obstacle(k);
                }
            }
        }

        let value = match hit {
            Hit::Sky => self.world.sky_value - 0.2 * u.clamp(0.0, 2.0),
            Hit::Ground => {
                let px = self.origin[0] + best_t * dir[0];
                let py = self.origin[1] + best_t * dir[1];
                // footprint stretched by the grazing angle
                let grazing = (-dir[2] / dir_len).max(1e-6);
                let footprint = best_t * px_scale / grazing;
                self.ground_value(px, py, footprint)
            }
            Hit::Obstacle(k) => {
                let o = &self.world.obstacles[k];
                let p = [
                    self.origin[0] + best_t * dir[0],
                    self.origin[1] + best_t * dir[1],
                    self.origin[2] + best_t * dir[2],
                ];
                self.obstacle_value(k, o, p, dir, best_t * px_scale)
            }
        };
        (value.clamp(0.0, 1.0), hit)
    }

    fn ground_value(&self, x: f64, y: f64, footprint: f64) -> f64 {
        let g = &self.world.ground;
        let y = if self.world.mirrored { -y } else { y };
        let seed = self.world.ground_texture_seed;
        0.5 + g.contrast * fbm(x, y, g.feature_size, g.feature_size, g.octaves, footprint, seed)
    }

    fn obstacle_value(&self, k: usize, o: &Obstacle, p: [f64; 3], dir: [f64; 3], footprint: f64) -> f64 {
        let nx = (p[0] - o.center_x) / o.radius;
        let ny = (p[1] - o.center_y) / o.radius;
        let mut angle = ny.atan2(nx);
        if self.world.mirrored {
            angle = -angle;
        }
        let arc = angle * o.radius;
        let seed = self.world.ground_texture_seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(k as u64 + 1));
        // bark: narrow vertical streaks
        let tex = fbm(arc, p[2], 0.12, 0.5, 3, footprint, seed);
        // light from behind the camera, above the horizon
        let d_len = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt().max(1e-12);
        let facing = (-(nx * dir[0] + ny * dir[1]) / d_len).max(0.0);
        let base = 0.3 + 0.15 * facing;
        base + o.texture_contrast * tex
    }
}

/// Nearest positive ray parameter where the ray enters the cylinder wall.
fn intersect_cylinder(origin: [f64; 3], dir: [f64; 3], o: &Obstacle) -> Option<f64> {
    let ox = origin[0] - o.center_x;
    let oy = origin[1] - o.center_y;
    let a = dir[0] * dir[0] + dir[1] * dir[1];
    if a == 0.0 {
        return None;
    }
    let b = ox * dir[0] + oy * dir[1];
    let c = ox * ox + oy * oy - o.radius * o.radius;
    let disc = b * b - a * c;
    if disc < 0.0 || c < 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / a;
    if t <= 0.0 {
        return None;
    }
    let z = origin[2] + t * dir[2];
    (0.0..=o.height).contains(&z).then_some(t)
}

/// Fractal value noise in `[-1, 1]` with anisotropic base wavelengths. Each
/// octave is faded out once the footprint approaches its wavelength.
fn fbm(x: f64, y: f64, wave_x: f64, wave_y: f64, octaves: u32, footprint: f64, seed: u64) -> f64 {
    let mut sum = 0.0;
    let mut norm = 0.0;
    let mut amp = 1.0;
    let (mut wx, mut wy) = (wave_x, wave_y);
    for oct in 0..octaves {
        let ratio = wx.min(wy) / footprint.max(1e-9);
        let fade = smoothstep(1.5, 4.0, ratio);
        let s = seed.wrapping_add(u64::from(oct).wrapping_mul(0x632b_e59b_d9b4_e019));
        sum += amp * fade * value_noise(x / wx, y / wy, s);
        norm += amp;
        amp *= 0.55;
        wx *= 0.5;
        wy *= 0.5;
    }
    sum / norm * 1.6
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn value_noise(x: f64, y: f64, seed: u64) -> f64 {
    let xf = fast_floor(x);
    let yf = fast_floor(y);
    let (ix, iy) = (xf as i64, yf as i64);
    let tx = x - xf;
    let ty = y - yf;
    let sx = tx * tx * (3.0 - 2.0 * tx);
    let sy = ty * ty * (3.0 - 2.0 * ty);
    let v00 = lattice(ix, iy, seed);
    let v10 = lattice(ix + 1, iy, seed);
    let v01 = lattice(ix, iy + 1, seed);
    let v11 = lattice(ix + 1, iy + 1, seed);
    let top = v00 + (v10 - v00) * sx;
    let bottom = v01 + (v11 - v01) * sx;
    top + (bottom - top) * sy
}

#[inline]
fn fast_floor(v: f64) -> f64 {
    let t = v as i64 as f64;
    if t > v {
        t - 1.0
    } else {
        t
    }
}

/// Hash of a lattice point to `[-1, 1]` (splitmix64 finalizer).
fn lattice(ix: i64, iy: i64, seed: u64) -> f64 {
    let mut z = seed
        ^ (ix as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (iy as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}
