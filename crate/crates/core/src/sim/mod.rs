//! Deterministic synthetic environment for closed-loop runs: textured
//! cylinders on a textured ground plane, a pinhole front camera, first-order
//! velocity response and a seeded wind perturbation.

mod dynamics;
mod render;
mod scenario;
mod truth;

pub use dynamics::{step_dynamics, DynamicsConfig, WindState};
pub use render::{render, render_hits, Hit};
pub use scenario::Scenario;
pub use truth::{clearance, ground_truth, GroundTruth, TruthSide};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vertical textured cylinder standing on the ground (a trunk or a bin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    #[serde(default = "default_height")]
    pub height: f64,
    #[serde(default = "default_contrast")]
    pub texture_contrast: f64,
}

fn default_height() -> f64 {
    6.0
}

fn default_contrast() -> f64 {
    0.35
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindParams {
    /// Stationary standard deviation of each horizontal component, m/s.
    pub std: f64,
    /// Ornstein-Uhlenbeck correlation time, s.
    pub corr_time: f64,
}

impl Default for WindParams {
    fn default() -> Self {
        Self {
            std: 0.0,
            corr_time: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundParams {
    pub contrast: f64,
    /// Wavelength of the coarsest texture octave, m.
    pub feature_size: f64,
    pub octaves: u32,
}

impl Default for GroundParams {
    fn default() -> Self {
        Self {
            contrast: 0.25,
            feature_size: 0.6,
            octaves: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    /// Diagonal field of view, degrees.
    pub fov_diagonal: f64,
    pub fps: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            fov_diagonal: 92.0,
            fps: 30.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::Config("camera must be at least 8x8".into()));
        }
        if !(self.fov_diagonal > 10.0 && self.fov_diagonal < 170.0) {
            return Err(Error::Config("fov_diagonal must lie in (10, 170)".into()));
        }
        if !(self.fps > 0.0) {
            return Err(Error::Config("fps must be positive".into()));
        }
        Ok(())
    }

    /// Focal length in pixels: half the diagonal over `tan(fov / 2)`.
    pub fn focal(&self) -> f64 {
        let diag = ((self.width * self.width + self.height * self.height) as f64).sqrt();
        (diag / 2.0) / (self.fov_diagonal.to_radians() / 2.0).tan()
    }
}

/// Drone pose in the world frame: `x` forward (initial heading), `y` right,
/// `z` up. `vel` is the realized velocity after lag and wind.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub vel: [f64; 3],
}

impl Pose {
    pub fn at(x: f64, y: f64, z: f64) -> Self {
        Self {
            x,
            y,
            z,
            ..Default::default()
        }
    }

    pub fn heading(&self) -> [f64; 2] {
        [self.yaw.cos(), self.yaw.sin()]
    }

    pub fn right(&self) -> [f64; 2] {
        [-self.yaw.sin(), self.yaw.cos()]
    }
}

/// Immutable scene description.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub obstacles: Vec<Obstacle>,
    pub ground_texture_seed: u64,
    pub ground: GroundParams,
    pub sky_value: f64,
    pub wind: WindParams,
    pub bounds: f64,
    /// Mirror all procedural texture about the `y = 0` plane.
    pub mirrored: bool,
}

impl World {
    pub fn new(obstacles: Vec<Obstacle>, seed: u64) -> Result<Self> {
        let world = Self {
            obstacles,
            ground_texture_seed: seed,
            ground: GroundParams::default(),
            sky_value: 0.8,
            wind: WindParams::default(),
            bounds: 200.0,
            mirrored: false,
        };
        world.validate()?;
        Ok(world)
    }

    pub fn empty(seed: u64) -> Self {
        Self::new(Vec::new(), seed).expect("empty world is valid")
    }

    pub fn validate(&self) -> Result<()> {
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0 && o.height > 0.0) {
                return Err(Error::Scenario(format!(
                    "obstacle {i}: radius and height must be positive"
                )));
            }
            for (j, p) in self.obstacles.iter().enumerate().skip(i + 1) {
                let d = (o.center_x - p.center_x).hypot(o.center_y - p.center_y);
                if d < o.radius + p.radius {
                    return Err(Error::Scenario(format!("obstacles {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }
}
