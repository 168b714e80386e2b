use serde::{Deserialize, Serialize};

use super::{Pose, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthSide {
    Left,
    Right,
    Center,
}

impl TruthSide {
    /// Detector signal that points at this side (center accepts either).
    pub fn matches_signal(self, value: i8) -> bool {
        match self {
            TruthSide::Left => value < 0,
            TruthSide::Right => value > 0,
            TruthSide::Center => value != 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub obstacle_in_corridor: bool,
    pub side: Option<TruthSide>,
    /// Forward distance to the obstacle's near face, m.
    pub distance: Option<f64>,
    pub obstacle: Option<usize>,
}

impl GroundTruth {
    pub const CLEAR: GroundTruth = GroundTruth {
        obstacle_in_corridor: false,
        side: None,
        distance: None,
        obstacle: None,
    };
}

/// Nearest obstacle ahead whose lateral offset from the body forward axis is
/// at most `corridor_width / 2 + radius` and whose near face lies within
/// `horizon`. Obstacles taller than the drone's altitude only.
pub fn ground_truth(world: &World, pose: &Pose, corridor_width: f64, horizon: f64) -> GroundTruth {
    let heading = pose.heading();
    let right = pose.right();
    let mut best = GroundTruth::CLEAR;
    for (k, o) in world.obstacles.iter().enumerate() {
        if o.height < pose.z {
            continue;
        }
        let dx = o.center_x - pose.x;
        let dy = o.center_y - pose.y;
        let forward = dx * heading[0] + dy * heading[1];
        let lateral = dx * right[0] + dy * right[1];
        let distance = forward - o.radius;
        if distance <= 0.0 || distance > horizon || lateral.abs() > corridor_width / 2.0 + o.radius {
            continue;
        }
        if best.distance.is_some_and(|d| d <= distance) {
            continue;
        }
        let side = if lateral.abs() <= o.radius / 2.0 {
            TruthSide::Center
        } else if lateral < 0.0 {
            TruthSide::Left
        } else {
            TruthSide::Right
        };
        best = GroundTruth {
            obstacle_in_corridor: true,
            side: Some(side),
            distance: Some(distance),
            obstacle: Some(k),
        };
    }
    best
}

/// Smallest gap between a sphere of `body_radius` at the pose and any
/// obstacle, m. `None` for an empty world.
pub fn clearance(world: &World, pose: &Pose, body_radius: f64) -> Option<f64> {
    world
        .obstacles
        .iter()
        .map(|o| {
            let horizontal = ((pose.x - o.center_x).hypot(pose.y - o.center_y) - o.radius).max(0.0);
            let vertical = (pose.z - o.height).max(0.0);
            horizontal.hypot(vertical) - body_radius
        })
        .reduce(f64::min)
}
