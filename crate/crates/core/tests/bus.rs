use flowpilot::bus::{self, Bus, BusMessage, DeliveryMode, QUEUE_BOUND};
use flowpilot::pilot::TwistCommand;
use proptest::prelude::*;

fn twist(v: f64) -> BusMessage {
    BusMessage::Twist(TwistCommand::forward(v))
}

/// Publishes a fresh value and pumps once per tick for `seconds` of sim time.
/// Returns (publish index, delivered value) pairs in arrival order.
fn drive(hz: f64, tick: f64, seconds: f64) -> (Vec<f64>, Vec<(usize, f64)>) {
    let bus = Bus::new();
    bus.set_mode("rate/test", DeliveryMode::FixedRate { hz }).unwrap();
    let sub = bus.subscribe("rate/test").unwrap();
    let mut stamps = Vec::new();
    let mut got = Vec::new();
    let ticks = (seconds / tick).round() as usize;
    for k in 0..ticks {
        let t = k as f64 * tick;
        bus.publish("rate/test", twist(k as f64)).unwrap();
        bus.pump(t).unwrap();
        for env in sub.drain() {
            let BusMessage::Twist(c) = env.msg else { panic!("wrong kind") };
            stamps.push(env.stamp);
            got.push((k, c.linear_x));
        }
    }
    (stamps, got)
}

#[test]
fn fifteen_hz_over_one_second() {
    let (_, got) = drive(15.0, 1.0 / 15.0, 1.0);
    assert_eq!(got.len(), 15);
    assert!(got.iter().all(|(k, v)| *v == *k as f64));
}

#[test]
fn only_the_latest_of_a_burst_is_delivered() {
    let bus = Bus::new();
    let sub = bus.subscribe(bus::NAVDATA).unwrap();
    for v in [1.0, 2.0, 3.0] {
        bus.publish(bus::NAVDATA, twist(v)).unwrap();
    }
    bus.pump(0.0).unwrap();
    let got = sub.drain();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].msg, twist(3.0));
}

#[test]
fn realtime_delivery_is_immediate_and_ordered() {
    let bus = Bus::new();
    let a = bus.subscribe(bus::CMD_VEL).unwrap();
    let b = bus.subscribe(bus::CMD_VEL).unwrap();
    for v in 0..5 {
        bus.publish(bus::CMD_VEL, twist(v as f64)).unwrap();
    }
    for sub in [&a, &b] {
        let vals: Vec<BusMessage> = sub.drain().into_iter().map(|e| e.msg).collect();
        assert_eq!(vals, (0..5).map(|v| twist(v as f64)).collect::<Vec<_>>());
    }
}

#[test]
fn slow_subscribers_lose_the_oldest() {
    let bus = Bus::new();
    let sub = bus.subscribe(bus::FRONT_IMAGE).unwrap();
    let n = QUEUE_BOUND + 10;
    for v in 0..n {
        bus.publish(bus::FRONT_IMAGE, twist(v as f64)).unwrap();
    }
    let got = sub.drain();
    assert_eq!(got.len(), QUEUE_BOUND);
    assert_eq!(got[0].msg, twist(10.0));
    assert_eq!(sub.dropped(), 10);
}

#[test]
fn clock_cannot_run_backwards() {
    let bus = Bus::new();
    bus.pump(1.0).unwrap();
    assert!(bus.pump(0.5).is_err());
}

#[test]
fn introspection_is_json() {
    let bus = Bus::new();
    let _sub = bus.subscribe(bus::CMD_VEL).unwrap();
    bus.publish(bus::CMD_VEL, twist(1.0)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&bus.introspect_json()).unwrap();
    assert_eq!(v[bus::CMD_VEL]["subscribers"], 1);
    assert_eq!(v[bus::CMD_VEL]["published"], 1);
    assert_eq!(v[bus::NAVDATA]["mode"]["kind"], "fixed_rate");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rate_law(hz in 1.0f64..40.0, oversample in 1usize..8, seconds in 1.0f64..6.0) {
        let tick = 1.0 / (hz * oversample as f64);
        let (stamps, got) = drive(hz, tick, seconds);
        let expected = seconds * hz;
        prop_assert!((got.len() as f64 - expected).abs() <= 1.0 + 1e-9,
            "{} emissions, expected about {expected}", got.len());
        // latest-value law: the value delivered is the one just published
        for (k, v) in &got {
            prop_assert_eq!(*v, *k as f64);
        }
        // emissions are spaced by about one period
        for w in stamps.windows(2) {
            prop_assert!(w[1] - w[0] >= 1.0 / hz - tick - 1e-9);
        }
    }
}
