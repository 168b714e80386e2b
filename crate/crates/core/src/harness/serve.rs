use std::collections::VecDeque;
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};
use tungstenite::{Message, WebSocket};

use super::{RunConfig, SimLoop, TickReport};
use crate::bus::{self, Bus, BusMessage};
use crate::error::{Error, Result};
use crate::pilot::TwistCommand;
use crate::sim::Scenario;

/// Outgoing events buffered per client before the oldest frame is dropped.
const OUTBOX_BOUND: usize = 64;
/// How long a session blocks on its socket before flushing queued events.
const POLL: Duration = Duration::from_millis(5);
const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub scenario: Scenario,
    pub config: RunConfig,
    pub host: String,
    /// 0 picks a free port.
    pub port: u16,
}

impl ServeOptions {
    pub fn new(scenario: Scenario, config: RunConfig, port: u16) -> Self {
        Self {
            scenario,
            config,
            host: "127.0.0.1".into(),
            port,
        }
    }
}

/// A running server. Dropping it does not stop it; call [`ServeHandle::shutdown`].
pub struct ServeHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    sim: JoinHandle<Result<()>>,
    acceptor: JoinHandle<()>,
}

impl ServeHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(&self) {
        self.shutdown.store(true, Ordering::SeqCst);
    }

    /// Waits for the server to stop and returns the simulation thread's outcome.
    pub fn join(self) -> Result<()> {
        let res = self
            .sim
            .join()
            .unwrap_or_else(|_| Err(Error::Io(std::io::Error::other("simulation thread panicked"))));
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = self.acceptor.join();
        res
    }
}

/// A client's pending events. Frames are dropped oldest-first when full;
/// state and info events are never dropped.
#[derive(Default)]
struct Outbox {
    queue: Mutex<VecDeque<(bool, String)>>,
}

impl Outbox {
    fn push(&self, is_frame: bool, text: String) {
        let mut q = self.queue.lock().expect("outbox poisoned");
        if q.len() >= OUTBOX_BOUND {
            if let Some(pos) = q.iter().position(|(f, _)| *f) {
                q.remove(pos);
            }
        }
        q.push_back((is_frame, text));
    }

    fn take(&self) -> Vec<String> {
        self.queue
            .lock()
            .expect("outbox poisoned")
            .drain(..)
            .map(|(_, t)| t)
            .collect()
    }
}

#[derive(Default)]
struct Shared {
    clients: Mutex<Vec<Arc<Outbox>>>,
    last_state: Mutex<Option<String>>,
}

impl Shared {
    fn broadcast(&self, is_frame: bool, text: &str) {
        for c in self.clients.lock().expect("client list poisoned").iter() {
            c.push(is_frame, text.to_owned());
        }
    }
}

/// Starts the served loop: the simulator ticks on the wall clock and every
/// connected console receives frame and state events.
pub fn serve(opts: ServeOptions) -> Result<ServeHandle> {
    let mut config = opts.config.clone();
    config.report_timing = true;
    let mut sim = SimLoop::new(&opts.scenario, &config)?;
    sim.set_render_always(true);

    let listener = TcpListener::bind((opts.host.as_str(), opts.port))?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;

    let shutdown = Arc::new(AtomicBool::new(false));
    let shared = Arc::new(Shared::default());
    *shared.last_state.lock().expect("state poisoned") = Some(state_event(&sim, None, [0.0; 5], 0.0));

    let acceptor = {
        let shutdown = shutdown.clone();
        let shared = shared.clone();
        let bus = sim.bus().clone();
        let limits = (config.pilot.max_linear, config.pilot.max_angular);
        std::thread::spawn(move || accept_loop(listener, shutdown, shared, bus, limits))
    };
    let sim = {
        let shutdown = shutdown.clone();
        std::thread::spawn(move || sim_loop(sim, shutdown, shared))
    };
    Ok(ServeHandle {
        addr,
        shutdown,
        sim,
        acceptor,
    })
}

fn sim_loop(mut sim: SimLoop, shutdown: Arc<AtomicBool>, shared: Arc<Shared>) -> Result<()> {
    let period = Duration::from_secs_f64(sim.dt());
    let mut next = Instant::now();
    let mut regions = [0.0; 5];
    let mut colliding = false;
    while !shutdown.load(Ordering::SeqCst) {
        let r = match sim.step() {
            Ok(r) => r,
            Err(e) => {
                shutdown.store(true, Ordering::SeqCst);
                return Err(e);
            }
        };
        if let Some(rep) = &r.report {
            regions = rep.region_stat;
        }
        if let Some(frame) = &r.frame {
            let png = base64::engine::general_purpose::STANDARD.encode(frame.encode_png()?);
            let event = json!({"type": "frame", "seq": r.tick, "t": r.t, "png": png});
            shared.broadcast(true, &event.to_string());
        }
        let state = state_event(&sim, Some(&r), regions, r.proc_ms);
        shared.broadcast(false, &state);
        *shared.last_state.lock().expect("state poisoned") = Some(state);

        let hit = r.clearance.is_some_and(|c| c <= 0.0);
        if hit && !colliding {
            shared.broadcast(false, &info_event(&format!("collision at t={:.2}s", r.t)));
        }
        colliding = hit;

        next += period;
        let now = Instant::now();
        if next > now {
            std::thread::sleep(next - now);
        } else if now - next > period {
            // fell behind; skip ticks instead of bursting
            next = now;
        }
    }
    Ok(())
}

fn state_event(sim: &SimLoop, r: Option<&TickReport>, regions: [f64; 5], proc_ms: f64) -> String {
    let pose = sim.pose();
    let cmd = r.map_or(TwistCommand::ZERO, |r| r.cmd);
    let signal = r.map_or(0, |r| r.signal.value);
    json!({
        "type": "state",
        "mode": sim.mode().name(),
        "signal": signal,
        "regions": regions,
        "pose": {"x": pose.x, "y": pose.y, "z": pose.z, "yaw": pose.yaw},
        "battery": sim.battery(),
        "proc_ms": proc_ms,
        "t": sim.time(),
        "cmd": {"x": cmd.linear_x, "y": cmd.linear_y, "z": cmd.linear_z, "yaw": cmd.angular_z},
    })
    .to_string()
}

fn info_event(text: &str) -> String {
    json!({"type": "info", "text": text}).to_string()
}

fn accept_loop(
    listener: TcpListener,
    shutdown: Arc<AtomicBool>,
    shared: Arc<Shared>,
    bus: Bus,
    limits: (f64, f64),
) {
    let mut sessions = Vec::new();
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let shutdown = shutdown.clone();
                let shared = shared.clone();
                let bus = bus.clone();
                sessions.push(std::thread::spawn(move || {
                    let _ = session(stream, shutdown, shared, bus, limits);
                }));
            }
            // WouldBlock, or a transient accept failure
            Err(_) => std::thread::sleep(Duration::from_millis(20)),
        }
        sessions.retain(|s| !s.is_finished());
    }
    for s in sessions {
        let _ = s.join();
    }
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ClientMessage {
    Lifecycle {
        action: String,
    },
    Override {
        #[serde(default)]
        x: f64,
        #[serde(default)]
        y: f64,
        #[serde(default)]
        z: f64,
        #[serde(default)]
        yaw: f64,
    },
    Release,
}

/// Normalized stick values scaled to physical limits.
fn scaled_override(x: f64, y: f64, z: f64, yaw: f64, (max_linear, max_angular): (f64, f64)) -> TwistCommand {
    let n = |v: f64| if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 };
    TwistCommand {
        linear_x: n(x) * max_linear,
        linear_y: n(y) * max_linear,
        linear_z: n(z) * max_linear,
        angular_z: n(yaw) * max_angular,
    }
}

/// Applies one client text message. Returns an info reply for anything
/// that was ignored, and whether the client took control.
fn handle_client_text(text: &str, bus: &Bus, limits: (f64, f64)) -> Result<(Option<String>, bool)> {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => return Ok((Some(info_event(&format!("ignored malformed message: {e}"))), false)),
    };
    let kind = value.get("type").and_then(Value::as_str).unwrap_or("").to_owned();
    if !matches!(kind.as_str(), "lifecycle" | "override" | "release") {
        return Ok((Some(info_event(&format!("ignored unknown message type '{kind}'"))), false));
    }
    let msg: ClientMessage = match serde_json::from_value(value) {
        Ok(m) => m,
        Err(e) => return Ok((Some(info_event(&format!("ignored malformed {kind} message: {e}"))), false)),
    };
    match msg {
        ClientMessage::Lifecycle { action } => {
            let topic = match action.as_str() {
                "takeoff" => bus::TAKEOFF,
                "land" => bus::LAND,
                "reset" => bus::RESET,
                other => return Ok((Some(info_event(&format!("ignored unknown lifecycle action '{other}'"))), false)),
            };
            bus.publish(topic, BusMessage::Empty)?;
        }
        ClientMessage::Override { x, y, z, yaw } => {
            let cmd = scaled_override(x, y, z, yaw, limits);
            bus.publish(bus::JOY_OVERRIDE, BusMessage::Override(Some(cmd)))?;
        }
        ClientMessage::Release => bus.publish(bus::JOY_OVERRIDE, BusMessage::Override(None))?,
    }
    Ok((None, true))
}

fn session(
    stream: TcpStream,
    shutdown: Arc<AtomicBool>,
    shared: Arc<Shared>,
    bus: Bus,
    limits: (f64, f64),
) -> Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT))?;
    let mut ws = tungstenite::accept(stream).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    ws.get_ref().set_read_timeout(Some(POLL))?;

    let outbox = Arc::new(Outbox::default());
    if let Some(state) = shared.last_state.lock().expect("state poisoned").clone() {
        outbox.push(false, state);
    }
    shared.clients.lock().expect("client list poisoned").push(outbox.clone());

    let mut controlling = false;
    let res = run_session(&mut ws, &outbox, &shutdown, &bus, limits, &mut controlling);

    shared
        .clients
        .lock()
        .expect("client list poisoned")
        .retain(|c| !Arc::ptr_eq(c, &outbox));
    if controlling && !shutdown.load(Ordering::SeqCst) {
        // hover rather than keep flying a command nobody is watching
        bus.publish(bus::JOY_OVERRIDE, BusMessage::Override(Some(TwistCommand::ZERO)))?;
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    res
}

fn run_session(
    ws: &mut WebSocket<TcpStream>,
    outbox: &Outbox,
    shutdown: &AtomicBool,
    bus: &Bus,
    limits: (f64, f64),
    controlling: &mut bool,
) -> Result<()> {
    let ws_err = |e: tungstenite::Error| Error::Io(std::io::Error::other(e.to_string()));
    while !shutdown.load(Ordering::SeqCst) {
        for text in outbox.take() {
            ws.send(Message::text(text)).map_err(ws_err)?;
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                let (reply, took_control) = handle_client_text(text.as_str(), bus, limits)?;
                *controlling |= took_control;
                if let Some(reply) = reply {
                    outbox.push(false, reply);
                }
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => break,
            Err(e) => return Err(ws_err(e)),
        }
    }
    Ok(())
}
