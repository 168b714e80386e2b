use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CameraModel, DynamicsConfig, GroundParams, Obstacle, WindParams, World};
use crate::error::{Error, Result};
use crate::pilot::PilotConfig;

/// A closed-loop run description, loaded from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub wind: WindParams,
    #[serde(default)]
    pub camera: CameraModel,
    /// Partial `PilotConfig` merged over the run configuration.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub pilot: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_distance: Option<f64>,
    #[serde(default)]
    pub ground: GroundParams,
    #[serde(default = "default_sky")]
    pub sky_value: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_bounds")]
    pub bounds: f64,
    #[serde(default)]
    pub mirrored: bool,
}

fn default_sky() -> f64 {
    0.8
}

fn default_tau() -> f64 {
    0.3
}

fn default_bounds() -> f64 {
    200.0
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: String::new(),
            seed: 0,
            obstacles: Vec::new(),
            wind: WindParams::default(),
            camera: CameraModel::default(),
            pilot: Value::Null,
            goal_distance: None,
            ground: GroundParams::default(),
            sky_value: default_sky(),
            tau: default_tau(),
            bounds: default_bounds(),
            mirrored: false,
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Scenario(m) => Error::Scenario(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        if !(self.tau > 0.0) {
            return Err(Error::Scenario("tau must be positive".into()));
        }
        if !(self.wind.std >= 0.0 && self.wind.corr_time > 0.0) {
            return Err(Error::Scenario("wind std must be >= 0 and corr_time > 0".into()));
        }
        if let Some(g) = self.goal_distance {
            if !(g > 0.0) {
                return Err(Error::Scenario("goal_distance must be positive".into()));
            }
        }
        if !(self.pilot.is_null() || self.pilot.is_object()) {
            return Err(Error::Scenario("pilot overrides must be an object".into()));
        }
        self.world().map(|_| ())
    }

    pub fn world(&self) -> Result<World> {
        let world = World {
            obstacles: self.obstacles.clone(),
            ground_texture_seed: self.seed,
            ground: self.ground,
            sky_value: self.sky_value,
            wind: self.wind,
            bounds: self.bounds,
            mirrored: self.mirrored,
        };
        world.validate()?;
        Ok(world)
    }

    /// `base` with this scenario's pilot overrides and goal applied.
    pub fn pilot_config(&self, base: &PilotConfig) -> Result<PilotConfig> {
        let mut merged = serde_json::to_value(base)?;
        if let (Value::Object(dst), Value::Object(src)) = (&mut merged, &self.pilot) {
            for (k, v) in src {
                dst.insert(k.clone(), v.clone());
            }
        }
        let mut cfg: PilotConfig =
            serde_json::from_value(merged).map_err(|e| Error::Scenario(format!("pilot: {e}")))?;
        if let Some(g) = self.goal_distance {
            cfg.goal_distance = g;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dynamics_config(&self, pilot: &PilotConfig) -> DynamicsConfig {
        DynamicsConfig {
            tau: self.tau,
            altitude_hold: pilot.takeoff_altitude,
        }
    }

    /// The scenario reflected about `y = 0`, texture and wind included.
    pub fn mirrored(&self) -> Self {
        let mut m = self.clone();
        for o in &mut m.obstacles {
            o.center_y = -o.center_y;
        }
        m.mirrored = !self.mirrored;
        m
    }
}
