//! In-process stand-in for the drone driver's topic layer.
//!
//! Topics are created on first use. `RealTime` topics hand every published
//! message to the current subscribers immediately; `FixedRate` topics keep
//! only the latest value and re-emit it from [`Bus::pump`] at their rate.
//! Time is the simulation clock passed to `pump`, never the wall clock.

use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::Serialize;

use crate::detector::DetectionSignal;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::pilot::{FlightMode, TwistCommand};

pub const TAKEOFF: &str = "ardrone/takeoff";
pub const LAND: &str = "ardrone/land";
pub const RESET: &str = "ardrone/reset";
pub const CMD_VEL: &str = "cmd_vel";
pub const NAVDATA: &str = "ardrone/navdata";
pub const FRONT_IMAGE: &str = "ardrone/front/image_raw";
pub const OBSTACLE_SIGNAL: &str = "obstacle/signal";
pub const JOY_OVERRIDE: &str = "joy/override";

/// Rate of the navdata and detector-signal topics.
pub const NAVDATA_RATE_HZ: f64 = 15.0;

/// Per-subscriber queue bound; the oldest message is dropped on overflow.
pub const QUEUE_BOUND: usize = 64;

const RATE_EPS: f64 = 1e-9;

/// Validated `/`-separated topic path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TopicName(String);

impl TopicName {
    pub fn new(path: &str) -> Result<Self> {
        if path.is_empty() || path.split('/').any(str::is_empty) {
            return Err(Error::Config(format!("invalid topic name {path:?}")));
        }
        Ok(Self(path.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NavData {
    pub state: String,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub altitude: f64,
    pub battery: f64,
    pub timestamp: f64,
}

impl NavData {
    pub fn new(mode: FlightMode, altitude: f64, battery: f64, timestamp: f64) -> Self {
        Self {
            state: mode.name().to_string(),
            yaw: 0.0,
            pitch: 0.0,
            roll: 0.0,
            altitude: altitude.max(0.0),
            battery: battery.clamp(0.0, 100.0),
            timestamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BusMessage {
    Empty,
    Twist(TwistCommand),
    Nav(NavData),
    Frame {
        image: Arc<Image>,
        seq: u64,
        stamp: f64,
    },
    Signal(DetectionSignal),
    /// `Some` latches a manual twist, `None` hands control back.
    Override(Option<TwistCommand>),
}

impl BusMessage {
    fn kind(&self) -> &'static str {
        match self {
            BusMessage::Empty => "empty",
            BusMessage::Twist(_) => "twist",
            BusMessage::Nav(_) => "nav",
            BusMessage::Frame { .. } => "frame",
            BusMessage::Signal(_) => "signal",
            BusMessage::Override(_) => "override",
        }
    }
}

/// A delivered message with its sim-time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub topic: TopicName,
    pub stamp: f64,
    pub msg: BusMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeliveryMode {
    RealTime,
    FixedRate { hz: f64 },
}

#[derive(Debug, Default)]
struct Queue {
    items: VecDeque<Envelope>,
    dropped: u64,
    closed: bool,
}

type SharedQueue = Arc<Mutex<Queue>>;

struct Topic {
    mode: DeliveryMode,
    subscribers: Vec<(u64, SharedQueue)>,
    latest: Option<BusMessage>,
    next_due: Option<f64>,
    published: u64,
    delivered: u64,
}

impl Topic {
    fn new(mode: DeliveryMode) -> Self {
        Self {
            mode,
            subscribers: Vec::new(),
            latest: None,
            next_due: None,
            published: 0,
            delivered: 0,
        }
    }

    fn deliver(&mut self, env: Envelope) {
        self.subscribers.retain(|(_, q)| !lock(q).closed);
        for (_, q) in &self.subscribers {
            let mut q = lock(q);
            if q.items.len() >= QUEUE_BOUND {
                q.items.pop_front();
                q.dropped += 1;
            }
            q.items.push_back(env.clone());
        }
        self.delivered += self.subscribers.len() as u64;
    }
}

struct Inner {
    topics: BTreeMap<TopicName, Topic>,
    now: f64,
    next_sub: u64,
}

/// Shared handle; clones refer to the same bus.
#[derive(Clone)]
pub struct Bus {
    inner: Arc<Mutex<Inner>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Default for Bus {
    fn default() -> Self {
        Self::new()
    }
}

impl Bus {
    /// An empty bus with navdata and the detector signal preconfigured at
    /// 15 Hz fixed rate.
    pub fn new() -> Self {
        let bus = Self {
            inner: Arc::new(Mutex::new(Inner {
                topics: BTreeMap::new(),
                now: 0.0,
                next_sub: 0,
            })),
        };
        for name in [NAVDATA, OBSTACLE_SIGNAL] {
            bus.set_mode(name, DeliveryMode::FixedRate { hz: NAVDATA_RATE_HZ })
                .expect("static topic config");
        }
        bus
    }

    pub fn now(&self) -> f64 {
        lock(&self.inner).now
    }

    pub fn set_mode(&self, topic: &str, mode: DeliveryMode) -> Result<()> {
        if let DeliveryMode::FixedRate { hz } = mode {
            if !(hz > 0.0) {
                return Err(Error::Config(format!("rate must be positive, got {hz}")));
            }
        }
        let name = TopicName::new(topic)?;
        let mut inner = lock(&self.inner);
        inner
            .topics
            .entry(name)
            .and_modify(|t| t.mode = mode)
            .or_insert_with(|| Topic::new(mode));
        Ok(())
    }

    pub fn publish(&self, topic: &str, msg: BusMessage) -> Result<()> {
        let name = TopicName::new(topic)?;
        let mut inner = lock(&self.inner);
        let stamp = inner.now;
        let t = inner
            .topics
            .entry(name.clone())
            .or_insert_with(|| Topic::new(DeliveryMode::RealTime));
        t.published += 1;
        match t.mode {
            DeliveryMode::RealTime => t.deliver(Envelope {
                topic: name,
                stamp,
                msg,
            }),
            DeliveryMode::FixedRate { .. } => t.latest = Some(msg),
        }
        Ok(())
    }

    pub fn subscribe(&self, topic: &str) -> Result<Subscription> {
        let name = TopicName::new(topic)?;
        let queue: SharedQueue = Arc::default();
        let mut inner = lock(&self.inner);
        let id = inner.next_sub;
        inner.next_sub += 1;
        inner
            .topics
            .entry(name.clone())
            .or_insert_with(|| Topic::new(DeliveryMode::RealTime))
            .subscribers
            .push((id, queue.clone()));
        Ok(Subscription {
            topic: name,
            queue,
        })
    }

    /// Advances the sim clock and lets every due fixed-rate topic emit its
    /// latest value.
    pub fn pump(&self, now: f64) -> Result<()> {
        let mut inner = lock(&self.inner);
        if now < inner.now {
            return Err(Error::TimeRegression {
                now,
                last: inner.now,
            });
        }
        inner.now = now;
        let names: Vec<TopicName> = inner.topics.keys().cloned().collect();
        for name in names {
            let t = inner.topics.get_mut(&name).expect("listed topic");
            let DeliveryMode::FixedRate { hz } = t.mode else {
                continue;
            };
            let Some(msg) = t.latest.clone() else {
                continue;
            };
            let period = 1.0 / hz;
            let due = t.next_due.is_none_or(|d| now >= d - RATE_EPS);
            if !due {
                continue;
            }
            t.next_due = Some(match t.next_due {
                // stay on the period grid unless we fell a whole period behind
                Some(d) if now - d < period => d + period,
                _ => now + period,
            });
            t.deliver(Envelope {
                topic: name,
                stamp: now,
                msg,
            });
        }
        Ok(())
    }

    /// Topic diagnostics for the console, keyed by topic name.
    pub fn introspect(&self) -> BTreeMap<String, TopicInfo> {
        let inner = lock(&self.inner);
        inner
            .topics
            .iter()
            .map(|(name, t)| {
                let subscribers = t.subscribers.iter().filter(|(_, q)| !lock(q).closed).count();
                (
                    name.as_str().to_string(),
                    TopicInfo {
                        mode: t.mode,
                        subscribers,
                        published: t.published,
                        delivered: t.delivered,
                        latest_kind: t.latest.as_ref().map(BusMessage::kind),
                    },
                )
            })
            .collect()
    }

    pub fn introspect_json(&self) -> String {
        serde_json::to_string(&self.introspect()).expect("plain data serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicInfo {
    pub mode: DeliveryMode,
    pub subscribers: usize,
    pub published: u64,
    pub delivered: u64,
    pub latest_kind: Option<&'static str>,
}

/// Receiving end of one subscription. Dropping it (or calling
/// [`unsubscribe`](Self::unsubscribe)) stops delivery.
pub struct Subscription {
    topic: TopicName,
    queue: SharedQueue,
}

impl Subscription {
    pub fn topic(&self) -> &TopicName {
        &self.topic
    }

    pub fn try_recv(&self) -> Option<Envelope> {
        lock(&self.queue).items.pop_front()
    }

    pub fn drain(&self) -> Vec<Envelope> {
        lock(&self.queue).items.drain(..).collect()
    }

    /// Most recent pending message, discarding older ones.
    pub fn latest(&self) -> Option<Envelope> {
        lock(&self.queue).items.drain(..).next_back()
    }

    pub fn dropped(&self) -> u64 {
        lock(&self.queue).dropped
    }

    pub fn unsubscribe(self) {}
}

impl Iterator for &Subscription {
    type Item = Envelope;

    fn next(&mut self) -> Option<Envelope> {
        self.try_recv()
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        let mut q = lock(&self.queue);
        q.closed = true;
        q.items.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topic_names() {
        assert!(TopicName::new("ardrone/takeoff").is_ok());
        assert!(TopicName::new("cmd_vel").is_ok());
        assert!(TopicName::new("").is_err());
        assert!(TopicName::new("a//b").is_err());
        assert!(TopicName::new("/a").is_err());
    }

    #[test]
    fn realtime_delivery() {
        let bus = Bus::new();
        let sub = bus.subscribe(TAKEOFF).unwrap();
        bus.publish(TAKEOFF, BusMessage::Empty).unwrap();
        let got = sub.drain();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].msg, BusMessage::Empty);
    }

    #[test]
    fn no_subscribers_is_fine() {
        let bus = Bus::new();
        bus.publish(LAND, BusMessage::Empty).unwrap();
        assert_eq!(bus.introspect()[LAND].published, 1);
    }

    #[test]
    fn no_replay_for_late_subscribers() {
        let bus = Bus::new();
        bus.publish(CMD_VEL, BusMessage::Twist(TwistCommand::forward(1.0))).unwrap();
        let sub = bus.subscribe(CMD_VEL).unwrap();
        assert!(sub.try_recv().is_none());
    }

    #[test]
    fn two_subscribers_both_receive() {
        let bus = Bus::new();
        let a = bus.subscribe(CMD_VEL).unwrap();
        let b = bus.subscribe(CMD_VEL).unwrap();
        for v in [1.0, 2.0] {
            bus.publish(CMD_VEL, BusMessage::Twist(TwistCommand::forward(v))).unwrap();
        }
        assert_eq!(a.drain().len(), 2);
        assert_eq!(b.drain().len(), 2);
    }

    #[test]
    fn unsubscribe_stops_delivery() {
        let bus = Bus::new();
        let a = bus.subscribe(RESET).unwrap();
        a.unsubscribe();
        bus.publish(RESET, BusMessage::Empty).unwrap();
        assert_eq!(bus.introspect()[RESET].subscribers, 0);
        assert_eq!(bus.introspect()[RESET].delivered, 0);
    }

    #[test]
    fn fixed_rate_keeps_latest() {
        let bus = Bus::new();
        let sub = bus.subscribe(NAVDATA).unwrap();
        for v in 1..=3 {
            bus.publish(NAVDATA, BusMessage::Nav(NavData::new(FlightMode::Detecting, 1.5, 90.0, v as f64)))
                .unwrap();
        }
        assert!(sub.try_recv().is_none());
        bus.pump(0.0).unwrap();
        let got = sub.drain();
        assert_eq!(got.len(), 1);
        let BusMessage::Nav(nav) = &got[0].msg else {
            panic!("expected navdata");
        };
        assert_eq!(nav.timestamp, 3.0);
    }

    #[test]
    fn fixed_rate_without_value_is_silent() {
        let bus = Bus::new();
        let sub = bus.subscribe(OBSTACLE_SIGNAL).unwrap();
        bus.pump(0.0).unwrap();
        bus.pump(1.0).unwrap();
        assert!(sub.try_recv().is_none());
    }

    #[test]
    fn silent_publisher_is_repeated() {
        let bus = Bus::new();
        let sub = bus.subscribe(OBSTACLE_SIGNAL).unwrap();
        bus.publish(OBSTACLE_SIGNAL, BusMessage::Signal(DetectionSignal::NONE)).unwrap();
        for k in 0..30 {
            bus.pump(k as f64 / 30.0).unwrap();
        }
        assert_eq!(sub.drain().len(), 15);
    }

    #[test]
    fn time_regression_is_an_error() {
        let bus = Bus::new();
        bus.pump(1.0).unwrap();
        assert!(matches!(bus.pump(0.5), Err(Error::TimeRegression { .. })));
    }

    #[test]
    fn frame_queue_drops_oldest() {
        let bus = Bus::new();
        let sub = bus.subscribe(FRONT_IMAGE).unwrap();
        let img = Arc::new(Image::filled(8, 8, 0.0));
        for seq in 0..(QUEUE_BOUND as u64 + 6) {
            bus.publish(
                FRONT_IMAGE,
                BusMessage::Frame {
                    image: img.clone(),
                    seq,
                    stamp: 0.0,
                },
            )
            .unwrap();
        }
        assert_eq!(sub.dropped(), 6);
        let first = sub.try_recv().unwrap();
        assert!(matches!(first.msg, BusMessage::Frame { seq: 6, .. }));
    }

    #[test]
    fn introspection_serializes() {
        let bus = Bus::new();
        let _s = bus.subscribe(CMD_VEL).unwrap();
        let json: serde_json::Value = serde_json::from_str(&bus.introspect_json()).unwrap();
        assert_eq!(json[CMD_VEL]["subscribers"], 1);
        assert_eq!(json[NAVDATA]["mode"]["kind"], "fixed_rate");
        assert_eq!(json[NAVDATA]["mode"]["hz"], 15.0);
    }
}
