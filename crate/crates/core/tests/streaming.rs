mod common;

use std::io::{BufRead, BufReader};
use std::thread;
use std::time::{Duration, Instant};

use common::*;
use practice_core::server::{serve, ServeOptions};
use practice_core::session::FrameKind;
use practice_core::synth::{generate, ErrorModel, PatternSpec, Sound};
use practice_core::{DrillConfig, DrillKind, GridConfig};

fn fast_grid() -> GridConfig {
    GridConfig {
        bpm: 480.0,
        ..Default::default()
    }
}

#[test]
fn noiseless_live_take_scores_perfectly() {
    let mut config = DrillConfig::new(DrillKind::Timing);
    config.grid = fast_grid();
    let spec = PatternSpec::every_slot(config.grid, Sound::Pitch { pitch: 60, channel: 0 }, 2);
    let stream = generate(&spec, &ErrorModel::default()).unwrap();
    let log = event_log(&config, &to_smf(&stream));

    let server = serve(config, ServeOptions::local(0)).unwrap();
    let consumer = connect_consumers(&server, 1).remove(0);
    let producer = connect(server.local_addr(), Some("producer"));
    let start = Instant::now();
    for m in &log {
        let due = Duration::from_secs_f64(m.time);
        if let Some(wait) = due.checked_sub(start.elapsed()) {
            thread::sleep(wait);
        }
        send(&producer, &serde_json::to_string(m).unwrap());
    }
    send(&producer, r#"{"type":"end"}"#);
    let frames = read_frames(consumer);
    let last = frames.last().unwrap();
    assert_eq!(last.kind, FrameKind::End);
    let timing = last.report.as_ref().unwrap().timing.as_ref().unwrap();
    assert_eq!(timing.summary.score_percent, Some(100.0));
    let releases = frames
        .iter()
        .filter(|f| f.reason.as_deref() == Some("release"))
        .count();
    assert!(releases >= 1);
}

#[test]
fn silence_pauses() {
    let server = serve(DrillConfig::new(DrillKind::Timing), ServeOptions::local(0)).unwrap();
    let consumer = connect_consumers(&server, 1).remove(0);
    let producer = connect(server.local_addr(), None);
    send(&producer, r#"{"status":144,"data1":60,"data2":90,"time":0.0}"#);
    send(&producer, r#"{"status":128,"data1":60,"data2":0,"time":0.2}"#);
    let mut reader = BufReader::new(consumer);
    let started = Instant::now();
    let frames = read_until(&mut reader, FrameKind::Pause);
    let pause = frames.last().unwrap();
    assert_eq!(pause.kind, FrameKind::Pause);
    assert_eq!(pause.reason.as_deref(), Some("silence"));
    let waited = started.elapsed().as_secs_f64();
    assert!((1.8..4.0).contains(&waited), "{waited}");
}

#[test]
fn consumers_see_identical_frames() {
    let (config, stream) = fixture(DrillKind::Timing);
    let log = event_log(&config, &to_smf(&stream));
    let server = serve(config, ServeOptions::local(0)).unwrap();
    let consumers = connect_consumers(&server, 2);
    let producer = connect(server.local_addr(), None);
    for m in &log {
        send(&producer, &serde_json::to_string(m).unwrap());
    }
    send(&producer, r#"{"type":"end"}"#);
    let handles: Vec<_> = consumers
        .into_iter()
        .map(|c| thread::spawn(move || read_frames(c)))
        .collect();
    let seqs: Vec<Vec<_>> = handles
        .into_iter()
        .map(|h| h.join().unwrap())
        .collect();
    assert!(!seqs[0].is_empty());
    assert_eq!(seqs[0], seqs[1]);
    assert!(seqs[0].windows(2).all(|w| w[0].seq < w[1].seq));
}

#[test]
fn second_producer_is_refused() {
    let server = serve(DrillConfig::new(DrillKind::Timing), ServeOptions::local(0)).unwrap();
    let first = connect(server.local_addr(), Some("producer"));
    // Give the first producer time to register.
    thread::sleep(Duration::from_millis(100));
    let second = connect(server.local_addr(), Some("producer"));
    let mut line = String::new();
    BufReader::new(second).read_line(&mut line).unwrap();
    assert!(line.contains("\"error\""), "{line}");
    drop(first);
}

#[test]
fn malformed_input_and_config_updates() {
    let server = serve(DrillConfig::new(DrillKind::Timing), ServeOptions::local(0)).unwrap();
    let consumer = connect_consumers(&server, 1).remove(0);
    let control = consumer.try_clone().unwrap();
    let producer = connect(server.local_addr(), None);
    let mut reader = BufReader::new(consumer);

    send(&producer, "definitely not json");
    let f = read_until(&mut reader, FrameKind::Warning);
    assert_eq!(f.last().unwrap().reason.as_deref(), Some("malformed"));

    // 0.08 beats late: outside the default 0.05 tolerance, inside 0.1.
    send(&producer, r#"{"status":144,"data1":60,"data2":90,"time":0.04}"#);
    send(&producer, r#"{"status":128,"data1":60,"data2":0,"time":0.2}"#);
    let f = read_until(&mut reader, FrameKind::Update);
    let score = |f: &practice_core::session::Frame| {
        f.report.as_ref().unwrap().timing.as_ref().unwrap().summary.score_percent
    };
    assert_eq!(score(f.last().unwrap()), Some(0.0));

    let mut cfg = DrillConfig::new(DrillKind::Timing);
    cfg.grid.tolerance_beats = 0.1;
    let msg = serde_json::json!({"type": "config", "config": cfg});
    send(&control, &msg.to_string());
    let f = read_until(&mut reader, FrameKind::Config);
    assert_eq!(score(f.last().unwrap()), Some(100.0));
}
