//! Reactive flight controller: take off, look for obstacles, fly forward,
//! side-step away from a detected obstacle, and yield to the operator's
//! joystick at any time.

use serde::{Deserialize, Serialize};

use crate::detector::DetectionSignal;
use crate::error::{Error, Result};

/// Slack when comparing accumulated tick durations.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HoverReason {
    Override,
    Waiting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FlightMode {
    Grounded,
    TakingOff,
    Detecting,
    FlyingForward,
    Sideways { direction: Side, elapsed: f64 },
    Hovering { reason: HoverReason },
    Landing,
}

impl FlightMode {
    pub fn is_airborne(&self) -> bool {
        !matches!(self, FlightMode::Grounded)
    }

    pub fn name(&self) -> &'static str {
        match self {
            FlightMode::Grounded => "grounded",
            FlightMode::TakingOff => "taking_off",
            FlightMode::Detecting => "detecting",
            FlightMode::FlyingForward => "flying_forward",
            FlightMode::Sideways { .. } => "sideways",
            FlightMode::Hovering { .. } => "hovering",
            FlightMode::Landing => "landing",
        }
    }
}

/// Velocity setpoint: `+linear_x` forward, `+linear_y` right, `+linear_z` up,
/// `+angular_z` turn right.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TwistCommand {
    pub linear_x: f64,
    pub linear_y: f64,
    pub linear_z: f64,
    pub angular_z: f64,
}

impl TwistCommand {
    pub const ZERO: TwistCommand = TwistCommand {
        linear_x: 0.0,
        linear_y: 0.0,
        linear_z: 0.0,
        angular_z: 0.0,
    };

    pub fn forward(v: f64) -> Self {
        Self {
            linear_x: v,
            ..Self::ZERO
        }
    }

    pub fn lateral(v: f64) -> Self {
        Self {
            linear_y: v,
            ..Self::ZERO
        }
    }

    pub fn vertical(v: f64) -> Self {
        Self {
            linear_z: v,
            ..Self::ZERO
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    pub fn clamped(&self, max_linear: f64, max_angular: f64) -> Self {
        Self {
            linear_x: self.linear_x.clamp(-max_linear, max_linear),
            linear_y: self.linear_y.clamp(-max_linear, max_linear),
            linear_z: self.linear_z.clamp(-max_linear, max_linear),
            angular_z: self.angular_z.clamp(-max_angular, max_angular),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PilotConfig {
    pub v_forward: f64,
    pub v_side: f64,
    pub side_duration: f64,
    pub goal_distance: f64,
    pub takeoff_altitude: f64,
    pub control_rate: f64,
    pub climb_rate: f64,
    pub descent_rate: f64,
    pub max_linear: f64,
    pub max_angular: f64,
    /// Hover and wait at the goal instead of landing.
    pub hover_at_goal: bool,
}

impl Default for PilotConfig {
    fn default() -> Self {
        Self {
            v_forward: 1.0,
            v_side: 1.2,
            side_duration: 1.0,
            goal_distance: 20.0,
            takeoff_altitude: 1.5,
            control_rate: 15.0,
            climb_rate: 0.75,
            descent_rate: 0.5,
            max_linear: 2.0,
            max_angular: 1.5,
            hover_at_goal: false,
        }
    }
}

impl PilotConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.v_forward,
            self.v_side,
            self.side_duration,
            self.goal_distance,
            self.control_rate,
            self.climb_rate,
            self.descent_rate,
            self.max_linear,
            self.max_angular,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("pilot parameters must be positive".into()));
        }
        if !(1.0..=4.0).contains(&self.takeoff_altitude) {
            return Err(Error::Config("takeoff_altitude must lie in [1, 4] m".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.control_rate
    }
}

/// Position estimate integrated from commanded velocities (yaw fixed at 0).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NavEstimate {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub traveled_forward: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LifecycleAction {
    Takeoff,
    Land,
    Reset,
}

/// One control tick. Pure in all its inputs.
///
/// `override_cmd` is the operator's latched joystick twist; `Some` preempts
/// autonomy immediately and `None` on a `Hovering(Override)` machine means
/// the operator released control.
pub fn step(
    mode: FlightMode,
    signal: &DetectionSignal,
    nav: &NavEstimate,
    override_cmd: Option<&TwistCommand>,
    dt: f64,
    cfg: &PilotConfig,
) -> (FlightMode, TwistCommand) {
    use FlightMode::*;

    let side_step = |value: i8| {
        // obstacle on the right -> fly left, and vice versa
        let (direction, vy) = if value > 0 {
            (Side::Left, -cfg.v_side)
        } else {
            (Side::Right, cfg.v_side)
        };
        (
            Sideways {
                direction,
                elapsed: dt.min(cfg.side_duration),
            },
            TwistCommand::lateral(vy),
        )
    };

    let (next, cmd) = match (mode, override_cmd) {
        (Grounded, _) => (Grounded, TwistCommand::ZERO),
        (_, Some(manual)) => (
            Hovering {
                reason: HoverReason::Override,
            },
            *manual,
        ),
        (
            Hovering {
                reason: HoverReason::Override,
            },
            None,
        ) => (Detecting, TwistCommand::ZERO),
        (
            Hovering {
                reason: HoverReason::Waiting,
            },
            None,
        ) => (mode, TwistCommand::ZERO),
        (TakingOff, None) => {
            if nav.z >= cfg.takeoff_altitude - TIME_EPS {
                (Detecting, TwistCommand::ZERO)
            } else {
                (TakingOff, TwistCommand::vertical(cfg.climb_rate))
            }
        }
        (Landing, None) => {
            if nav.z <= 0.0 {
                (Grounded, TwistCommand::ZERO)
            } else {
                (Landing, TwistCommand::vertical(-cfg.descent_rate))
            }
        }
        (Detecting, None) => {
            if signal.is_obstacle() {
                side_step(signal.value)
            } else {
                (FlyingForward, TwistCommand::forward(cfg.v_forward))
            }
        }
        (FlyingForward, None) => {
            if nav.traveled_forward >= cfg.goal_distance {
                if cfg.hover_at_goal {
                    (
                        Hovering {
                            reason: HoverReason::Waiting,
                        },
                        TwistCommand::ZERO,
                    )
                } else {
                    (Landing, TwistCommand::vertical(-cfg.descent_rate))
                }
            } else if signal.is_obstacle() {
                side_step(signal.value)
            } else {
                (FlyingForward, TwistCommand::forward(cfg.v_forward))
            }
        }
        (Sideways { direction, elapsed }, None) => {
            if elapsed >= cfg.side_duration - TIME_EPS {
                (Detecting, TwistCommand::ZERO)
            } else {
                let vy = match direction {
                    Side::Left => -cfg.v_side,
                    Side::Right => cfg.v_side,
                };
                (
                    Sideways {
                        direction,
                        elapsed: (elapsed + dt).min(cfg.side_duration),
                    },
                    TwistCommand::lateral(vy),
                )
            }
        }
    };
    (next, cmd.clamped(cfg.max_linear, cfg.max_angular))
}

/// Integrates commanded body velocities; altitude is floored at zero.
pub fn dead_reckon(nav: &NavEstimate, cmd: &TwistCommand, dt: f64) -> NavEstimate {
    NavEstimate {
        x: nav.x + cmd.linear_x * dt,
        y: nav.y + cmd.linear_y * dt,
        z: (nav.z + cmd.linear_z * dt).max(0.0),
        traveled_forward: nav.traveled_forward + cmd.linear_x.max(0.0) * dt,
        t: nav.t + dt,
    }
}

/// Takeoff/land/reset requests. Takeoff is only honored on the ground, land
/// only in the air; reset always returns to `Grounded`.
pub fn lifecycle(action: LifecycleAction, mode: FlightMode) -> FlightMode {
    match action {
        LifecycleAction::Takeoff if mode == FlightMode::Grounded => FlightMode::TakingOff,
        LifecycleAction::Takeoff => mode,
        LifecycleAction::Land if mode.is_airborne() => FlightMode::Landing,
        LifecycleAction::Land => mode,
        LifecycleAction::Reset => FlightMode::Grounded,
    }
}

/// Convenience owner of the machine state and its dead-reckoned position.
#[derive(Debug, Clone, PartialEq)]
pub struct Pilot {
    cfg: PilotConfig,
    mode: FlightMode,
    nav: NavEstimate,
}

impl Pilot {
    pub fn new(cfg: PilotConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            mode: FlightMode::Grounded,
            nav: NavEstimate::default(),
        })
    }

    /// Starts in `mode` (useful to script traces from mid-flight).
    pub fn with_mode(cfg: PilotConfig, mode: FlightMode) -> Result<Self> {
        let mut p = Self::new(cfg)?;
        p.mode = mode;
        Ok(p)
    }

    pub fn mode(&self) -> FlightMode {
        self.mode
    }

    pub fn nav(&self) -> &NavEstimate {
        &self.nav
    }

    pub fn config(&self) -> &PilotConfig {
        &self.cfg
    }

    pub fn lifecycle(&mut self, action: LifecycleAction) {
        self.mode = lifecycle(action, self.mode);
        if action == LifecycleAction::Reset {
            self.nav = NavEstimate::default();
        }
    }

    /// Advances one control period. `altitude`, when known (simulator or
    /// navdata), replaces the dead-reckoned height before deciding.
    pub fn tick(
        &mut self,
        signal: &DetectionSignal,
        override_cmd: Option<&TwistCommand>,
        altitude: Option<f64>,
    ) -> TwistCommand {
        let dt = self.cfg.dt();
        if let Some(z) = altitude {
            self.nav.z = z;
        }
        let (mode, cmd) = step(self.mode, signal, &self.nav, override_cmd, dt, &self.cfg);
        self.mode = mode;
        self.nav = dead_reckon(&self.nav, &cmd, dt);
        cmd
    }
}
