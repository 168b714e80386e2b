use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Pose, WindParams};
use crate::pilot::TwistCommand;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsConfig {
    /// Velocity response time constant, s.
    pub tau: f64,
    /// Altitude ceiling held by the simulated autopilot, m.
    pub altitude_hold: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            tau: 0.3,
            altitude_hold: 1.5,
        }
    }
}

/// Seeded Ornstein-Uhlenbeck horizontal wind. The norm is clamped to three
/// standard deviations.
#[derive(Debug, Clone)]
pub struct WindState {
    params: WindParams,
    rng: ChaCha8Rng,
    v: [f64; 2],
    mirrored: bool,
}

impl WindState {
    pub fn new(params: WindParams, seed: u64) -> Self {
        Self {
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            v: [0.0; 2],
            mirrored: false,
        }
    }

    /// Same noise stream reflected about `y = 0`.
    pub fn mirrored(mut self, mirrored: bool) -> Self {
        self.mirrored = mirrored;
        self
    }

    pub fn params(&self) -> &WindParams {
        &self.params
    }

    /// Current wind velocity in the world frame, m/s.
    pub fn velocity(&self) -> [f64; 2] {
        if self.mirrored {
            [self.v[0], -self.v[1]]
        } else {
            self.v
        }
    }

    pub fn advance(&mut self, dt: f64) {
        let sigma = self.params.std;
        if sigma <= 0.0 {
            return;
        }
        let a = (-dt / self.params.corr_time.max(1e-9)).exp();
        let k = sigma * (1.0 - a * a).sqrt();
        for c in &mut self.v {
            let n: f64 = StandardNormal.sample(&mut self.rng);
            *c = a * *c + k * n;
        }
        let norm = self.v[0].hypot(self.v[1]);
        let cap = 3.0 * sigma;
        if norm > cap {
            self.v[0] *= cap / norm;
            self.v[1] *= cap / norm;
        }
    }
}

/// Advances the pose by `dt` under body-frame command `cmd`.
///
/// The air-relative velocity lags the command with time constant `tau`; the
/// wind is added on top and the position integrates the sum. Altitude is
/// clamped to `[0, altitude_hold]`.
pub fn step_dynamics(
    pose: &Pose,
    cmd: &TwistCommand,
    dt: f64,
    wind: &mut WindState,
    cfg: &DynamicsConfig,
) -> Pose {
    let k = 1.0 - (-dt / cfg.tau).exp();
    let w0 = wind.velocity();
    let air = [pose.vel[0] - w0[0], pose.vel[1] - w0[1], pose.vel[2]];

    let yaw = pose.yaw + cmd.angular_z * dt;
    let (s, c) = yaw.sin_cos();
    let target = [
        c * cmd.linear_x - s * cmd.linear_y,
        s * cmd.linear_x + c * cmd.linear_y,
        cmd.linear_z,
    ];
    let air = [
        air[0] + (target[0] - air[0]) * k,
        air[1] + (target[1] - air[1]) * k,
        air[2] + (target[2] - air[2]) * k,
    ];
    wind.advance(dt);
    let w1 = wind.velocity();
    let vel = [air[0] + w1[0], air[1] + w1[1], air[2]];

    let mut z = pose.z + vel[2] * dt;
    let mut vz = vel[2];
    if z >= cfg.altitude_hold {
        z = cfg.altitude_hold;
        vz = vz.min(0.0);
    } else if z <= 0.0 {
        z = 0.0;
        vz = vz.max(0.0);
    }
    Pose {
        x: pose.x + vel[0] * dt,
        y: pose.y + vel[1] * dt,
        z,
        yaw,
        vel: [vel[0], vel[1], vz],
    }
}
