use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use super::{Metrics, RunConfig, Termination, Timings};
use crate::bus::{self, Bus, BusMessage, NavData, Subscription};
use crate::detector::{DetectionSignal, Detector, RegionReport};
use crate::error::Result;
use crate::image::Image;
use crate::pilot::{FlightMode, HoverReason, LifecycleAction, Pilot, TwistCommand};
use crate::sim::{
    clearance, ground_truth, render, step_dynamics, CameraModel, DynamicsConfig, GroundTruth, Pose,
    Scenario, WindState, World,
};

/// Battery drain while airborne, percent per second.
const BATTERY_DRAIN: f64 = 0.14;

/// Mixed into the scenario seed for the wind stream.
const WIND_SEED_SALT: u64 = 0x5e_ed0f_a1e5;

/// What happened during one control tick.
#[derive(Debug, Clone, Serialize)]
pub struct TickReport {
    pub tick: u64,
    pub t: f64,
    /// Mode after the tick.
    pub mode: FlightMode,
    pub cmd: TwistCommand,
    /// Pose the frame was rendered from.
    pub pose: Pose,
    pub signal: DetectionSignal,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<RegionReport>,
    pub truth: GroundTruth,
    pub clearance: Option<f64>,
    pub battery: f64,
    pub proc_ms: f64,
    #[serde(skip)]
    pub frame: Option<Arc<Image>>,
}

/// Closed loop over the bus: camera → detector → pilot → dynamics, one tick
/// per control period of sim time.
pub struct SimLoop {
    cfg: RunConfig,
    world: World,
    camera: CameraModel,
    dynamics: DynamicsConfig,
    start: Pose,
    wind_seed: u64,
    mirrored: bool,

    bus: Bus,
    detector: Detector,
    pilot: Pilot,
    pose: Pose,
    wind: WindState,
    battery: f64,
    tick: u64,
    frame_seq: u64,
    override_latch: Option<TwistCommand>,
    signal: DetectionSignal,
    render_always: bool,
    was_sideways: bool,

    lifecycle_subs: [(LifecycleAction, Subscription); 3],
    override_sub: Subscription,
    frame_sub: Subscription,
    signal_sub: Subscription,
    cmd_sub: Subscription,
}

impl SimLoop {
    pub fn new(scenario: &Scenario, cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        scenario.validate()?;
        let mut cfg = cfg.clone();
        cfg.pilot = scenario.pilot_config(&cfg.pilot)?;
        let world = scenario.world()?;
        let dynamics = scenario.dynamics_config(&cfg.pilot);
        let wind_seed = scenario.seed ^ WIND_SEED_SALT;
        let bus = Bus::new();
        let lifecycle_subs = [
            (LifecycleAction::Takeoff, bus.subscribe(bus::TAKEOFF)?),
            (LifecycleAction::Land, bus.subscribe(bus::LAND)?),
            (LifecycleAction::Reset, bus.subscribe(bus::RESET)?),
        ];
        let start = Pose::default();
        Ok(Self {
            detector: Detector::new(cfg.detector.clone(), cfg.flow.clone())?,
            pilot: Pilot::new(cfg.pilot.clone())?,
            override_sub: bus.subscribe(bus::JOY_OVERRIDE)?,
            frame_sub: bus.subscribe(bus::FRONT_IMAGE)?,
            signal_sub: bus.subscribe(bus::OBSTACLE_SIGNAL)?,
            cmd_sub: bus.subscribe(bus::CMD_VEL)?,
            lifecycle_subs,
            wind: WindState::new(world.wind, wind_seed).mirrored(world.mirrored),
            mirrored: world.mirrored,
            camera: scenario.camera,
            world,
            dynamics,
            start,
            wind_seed,
            bus,
            pose: start,
            battery: 100.0,
            tick: 0,
            frame_seq: 0,
            override_latch: None,
            signal: DetectionSignal::NONE,
            render_always: false,
            was_sideways: false,
            cfg,
        })
    }

    /// Render a camera frame every tick, even on the ground (served mode).
    pub fn set_render_always(&mut self, on: bool) {
        self.render_always = on;
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn mode(&self) -> FlightMode {
        self.pilot.mode()
    }

    pub fn battery(&self) -> f64 {
        self.battery
    }

    pub fn dt(&self) -> f64 {
        self.cfg.pilot.dt()
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt()
    }

    fn reset(&mut self) {
        self.pose = self.start;
        self.wind = WindState::new(self.world.wind, self.wind_seed).mirrored(self.mirrored);
        self.detector.reset();
        self.override_latch = None;
        self.signal = DetectionSignal::NONE;
        self.was_sideways = false;
    }

    fn detecting(mode: FlightMode) -> bool {
        matches!(
            mode,
            FlightMode::Detecting
                | FlightMode::FlyingForward
                | FlightMode::Sideways { .. }
                | FlightMode::Hovering { .. }
        )
    }

    /// Advances one control period.
    pub fn step(&mut self) -> Result<TickReport> {
        let dt = self.dt();
        let t = self.time();

        let requested: Vec<LifecycleAction> = self
            .lifecycle_subs
            .iter()
            .filter(|(_, sub)| !sub.drain().is_empty())
            .map(|(action, _)| *action)
            .collect();
        for action in requested {
            self.pilot.lifecycle(action);
            if action == LifecycleAction::Reset {
                self.reset();
            }
        }
        for env in self.override_sub.drain() {
            if let BusMessage::Override(cmd) = env.msg {
                self.override_latch = cmd;
            }
        }

        let mode = self.pilot.mode();
        let detecting = Self::detecting(mode);
        let sideways = matches!(mode, FlightMode::Sideways { .. });
        if self.was_sideways && !sideways {
            // flow seen while side-stepping is ego-motion, not evidence
            self.detector.reset();
        }
        self.was_sideways = sideways;
        let rendered_from = self.pose;
        let mut frame = None;
        if detecting || self.render_always {
            let image = Arc::new(render(&self.world, &self.pose, &self.camera));
            self.frame_seq += 1;
            self.bus.publish(
                bus::FRONT_IMAGE,
                BusMessage::Frame {
                    image: image.clone(),
                    seq: self.frame_seq,
                    stamp: t,
                },
            )?;
            frame = Some(image);
        }

        // detector node
        let latest_frame = self.frame_sub.latest();
        let mut report = None;
        let mut proc_ms = 0.0;
        let mut signal = DetectionSignal::NONE;
        if detecting {
            if let Some(BusMessage::Frame { image, .. }) = latest_frame.map(|e| e.msg) {
                if let Some(det) = self.detector.push(&image)? {
                    signal = det.signal;
                    proc_ms = det.proc_ms;
                    report = Some(det.report);
                }
            }
        } else {
            self.detector.reset();
        }
        self.bus.publish(bus::OBSTACLE_SIGNAL, BusMessage::Signal(signal))?;
        self.bus.pump(t)?;

        // pilot node
        if let Some(BusMessage::Signal(s)) = self.signal_sub.latest().map(|e| e.msg) {
            self.signal = s;
        }
        let cmd = self.pilot.tick(&self.signal, self.override_latch.as_ref(), Some(self.pose.z));
        self.bus.publish(bus::CMD_VEL, BusMessage::Twist(cmd))?;

        // drone driver
        let applied = match self.cmd_sub.latest().map(|e| e.msg) {
            Some(BusMessage::Twist(c)) => c,
            _ => TwistCommand::ZERO,
        };
        if self.pilot.mode() == FlightMode::Grounded {
            self.pose.vel = [0.0; 3];
        } else {
            self.pose = step_dynamics(&self.pose, &applied, dt, &mut self.wind, &self.dynamics);
            self.battery = (self.battery - BATTERY_DRAIN * dt).max(0.0);
        }
        self.bus.publish(
            bus::NAVDATA,
            BusMessage::Nav(NavData::new(self.pilot.mode(), self.pose.z, self.battery, t)),
        )?;

        self.tick += 1;
        Ok(TickReport {
            tick: self.tick,
            t,
            mode: self.pilot.mode(),
            cmd,
            pose: rendered_from,
            signal,
            report,
            truth: ground_truth(&self.world, &rendered_from, self.cfg.corridor_width, self.cfg.horizon),
            clearance: clearance(&self.world, &self.pose, self.cfg.body_radius),
            battery: self.battery,
            proc_ms: if self.cfg.report_timing { proc_ms } else { 0.0 },
            frame,
        })
    }
}

/// One JSON-lines record per tick.
#[derive(Serialize)]
struct TickLine<'a> {
    tick: u64,
    t: f64,
    mode: &'a str,
    cmd: &'a TwistCommand,
    x: f64,
    y: f64,
    z: f64,
    signal: i8,
    #[serde(skip_serializing_if = "Option::is_none")]
    regions: Option<&'a [f64; 5]>,
    in_corridor: bool,
    proc_ms: f64,
}

/// Headless closed-loop run to goal, collision or timeout.
pub fn run_sim(scenario: &Scenario, cfg: &RunConfig) -> Result<Metrics> {
    run_sim_with(scenario, cfg, None, |_| {})
}

/// [`run_sim`] with optional JSON-lines telemetry and a per-tick observer.
pub fn run_sim_with(
    scenario: &Scenario,
    cfg: &RunConfig,
    mut telemetry: Option<&mut dyn Write>,
    mut observe: impl FnMut(&TickReport),
) -> Result<Metrics> {
    let mut sim = SimLoop::new(scenario, cfg)?;
    sim.bus().publish(bus::TAKEOFF, BusMessage::Empty)?;

    let mut timings = Timings::default();
    let mut frames = 0u64;
    let mut signals = 0u64;
    let mut false_positives = 0u64;
    let mut lead = None;
    let mut min_clearance: Option<f64> = None;
    let timeout_ticks = (sim.config().timeout_s / sim.dt()).ceil() as u64;
    let termination = loop {
        let before = sim.mode();
        let r = sim.step()?;
        observe(&r);
        if let Some(out) = telemetry.as_deref_mut() {
            let line = TickLine {
                tick: r.tick,
                t: r.t,
                mode: r.mode.name(),
                cmd: &r.cmd,
                x: r.pose.x,
                y: r.pose.y,
                z: r.pose.z,
                signal: r.signal.value,
                regions: r.report.as_ref().map(|rep| &rep.region_stat),
                in_corridor: r.truth.obstacle_in_corridor,
                proc_ms: r.proc_ms,
            };
            serde_json::to_writer(&mut *out, &line)?;
            out.write_all(b"\n")?;
        }
        if r.report.is_some() {
            frames += 1;
            timings.push(r.proc_ms);
            if r.signal.is_obstacle() {
                signals += 1;
                if !r.truth.obstacle_in_corridor {
                    false_positives += 1;
                } else if lead.is_none()
                    && r.truth.side.is_some_and(|s| s.matches_signal(r.signal.value))
                {
                    lead = r.truth.distance;
                }
            }
        }
        if let Some(c) = r.clearance {
            min_clearance = Some(min_clearance.map_or(c, |m| m.min(c)));
            if c <= 0.0 {
                break Termination::Collision;
            }
        }
        let at_goal = before == FlightMode::FlyingForward
            && matches!(
                r.mode,
                FlightMode::Landing
                    | FlightMode::Hovering {
                        reason: HoverReason::Waiting
                    }
            );
        if at_goal {
            break Termination::GoalReached;
        }
        if r.tick >= timeout_ticks {
            break Termination::Timeout;
        }
    };
    Ok(Metrics {
        termination,
        frames_processed: frames,
        mean_frame_ms: timings.mean(),
        p95_frame_ms: timings.p95(),
        signals_emitted: signals,
        detection_lead_m: lead,
        false_positive_frames: false_positives,
        collisions: u64::from(termination == Termination::Collision),
        min_clearance_m: min_clearance,
        goal_reached: termination == Termination::GoalReached,
        sim_time_s: sim.time(),
    })
}
