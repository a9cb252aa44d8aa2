#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::time::Duration;

use practice_core::config::{AccentPatternSpec, ProgressionConfig};
use practice_core::midi::{
    parse_smf_with, raw_notes_to_live, write_smf, DrumVoice, LiveMessage, SmfFormat, WriteOptions,
};
use practice_core::session::{Frame, FrameKind};
use practice_core::synth::{generate_with, AccentPattern, ErrorModel, PatternSpec, Slot, Sound};
use practice_core::{DrillConfig, DrillKind, GridConfig, PerformanceStream};

fn slot(index: u32, sound: Sound, hold_beats: Option<f64>) -> Slot {
    Slot {
        index,
        sound,
        hold_beats,
    }
}

fn pitch(p: u8) -> Sound {
    Sound::Pitch {
        pitch: p,
        channel: 0,
    }
}

/// A drill configuration and a matching synthetic performance.
pub fn fixture(kind: DrillKind) -> (DrillConfig, PerformanceStream) {
    let mut config = DrillConfig::new(kind);
    let mut model = ErrorModel {
        jitter_std_beats: 0.02,
        velocity_noise_std: 3.0,
        seed: 11,
        ..Default::default()
    };
    let (grid, slots, reps) = match kind {
        DrillKind::Duration => {
            let grid = GridConfig {
                subdivision: 1,
                cycle_beats: 8.0,
                ..Default::default()
            };
            let slots = vec![
                slot(0, pitch(60), Some(1.04)),
                slot(1, pitch(62), Some(0.8)),
                slot(2, pitch(64), Some(2.1)),
                slot(4, pitch(65), Some(3.4)),
            ];
            (grid, slots, 3)
        }
        DrillKind::Timing => {
            let grid = GridConfig::default();
            let mut slots: Vec<Slot> = (0..8)
                .map(|i| slot(i, Sound::Drum { voice: DrumVoice::HiHat }, Some(0.1)))
                .collect();
            slots.push(slot(0, Sound::Drum { voice: DrumVoice::Kick }, Some(0.1)));
            slots.push(slot(4, Sound::Drum { voice: DrumVoice::Snare }, Some(0.1)));
            (grid, slots, 6)
        }
        DrillKind::Accents => {
            model.accent = Some(AccentPattern {
                period: 4,
                offset: 0,
                accent_velocity: 112,
                base_velocity: 64,
            });
            config.rhythm.accent_pattern = Some(AccentPatternSpec { period: 4, offset: 0 });
            let grid = GridConfig {
                subdivision: 4,
                ..Default::default()
            };
            let slots = [0, 2, 3, 4, 6, 8, 9, 10, 12, 14, 15]
                .into_iter()
                .map(|i| slot(i, pitch(38), None))
                .collect();
            (grid, slots, 4)
        }
        DrillKind::ChordProgression => {
            config.progression = Some(ProgressionConfig {
                key: "C".into(),
                mode: "major".into(),
                chords: "C Am F G".into(),
                bar_scales: None,
                custom_qualities: Vec::new(),
            });
            let grid = GridConfig {
                subdivision: 1,
                cycle_beats: 16.0,
                ..Default::default()
            };
            let line = [60, 64, 67, 62, 69, 72, 76, 71, 65, 69, 72, 74, 67, 71, 74, 66];
            let slots = line
                .iter()
                .enumerate()
                .map(|(i, &p)| slot(i as u32, pitch(p), None))
                .collect();
            (grid, slots, 2)
        }
        DrillKind::Fretboard => {
            let grid = GridConfig {
                cycle_beats: 8.0,
                ..Default::default()
            };
            let shape = [(1, 5), (2, 5), (1, 8), (3, 5), (1, 5), (2, 6), (3, 7), (4, 7)];
            let mut slots: Vec<Slot> = shape
                .iter()
                .enumerate()
                .map(|(i, &(s, f))| slot(i as u32, Sound::Fret { string: s, fret: f }, None))
                .collect();
            slots.extend(shape.iter().enumerate().map(|(i, &(s, f))| {
                slot(i as u32 + 8, Sound::Fret { string: s, fret: f + 12 }, None)
            }));
            (grid, slots, 2)
        }
    };
    config.grid = grid;
    let spec = PatternSpec {
        grid,
        slots,
        repetitions: reps,
        tuning: config.fretboard.tuning,
    };
    let stream = generate_with(&spec, &model, &config.voice_map()).expect("fixture spec");
    (config, stream)
}

pub fn to_smf(stream: &PerformanceStream) -> Vec<u8> {
    write_smf(
        stream,
        &WriteOptions {
            format: SmfFormat::MultiTrack,
            ..Default::default()
        },
    )
}

/// The file's note messages as a live event log.
pub fn event_log(config: &DrillConfig, smf: &[u8]) -> Vec<LiveMessage> {
    let parsed = parse_smf_with(smf, &config.voice_map()).expect("valid file");
    raw_notes_to_live(&parsed.raw)
}

pub fn connect(addr: SocketAddr, role: Option<&str>) -> TcpStream {
    let s = TcpStream::connect(addr).expect("connect");
    s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    if let Some(role) = role {
        send(&s, &format!(r#"{{"type":"hello","role":"{role}"}}"#));
    }
    s
}

pub fn send(mut s: &TcpStream, line: &str) {
    s.write_all(line.as_bytes()).unwrap();
    s.write_all(b"\n").unwrap();
}

/// Reads frames until the server closes the connection.
pub fn read_frames(s: TcpStream) -> Vec<Frame> {
    BufReader::new(s)
        .lines()
        .map_while(Result::ok)
        .map(|l| serde_json::from_str::<Frame>(&l).expect("frame"))
        .collect()
}

/// Reads frames until one of `kind` arrives.
pub fn read_until(reader: &mut BufReader<TcpStream>, kind: FrameKind) -> Vec<Frame> {
    let mut out = Vec::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return out;
        }
        let f: Frame = serde_json::from_str(line.trim()).expect("frame");
        let done = f.kind == kind;
        out.push(f);
        if done {
            return out;
        }
    }
}

pub fn connect_consumers(server: &practice_core::server::ServerHandle, n: usize) -> Vec<TcpStream> {
    let out: Vec<_> = (0..n).map(|_| connect(server.local_addr(), Some("consumer"))).collect();
    assert!(server.wait_for_consumers(n, Duration::from_secs(5)));
    out
}
