//! Live practice session: turns inbound messages into analysis frames.
//!
//! The session is a pure state machine driven by [`Session::handle`] and
//! [`Session::tick`]; the caller supplies the clock. Frames go out on every
//! note release, every [`HELD_INTERVAL`] seconds while notes are held, and
//! once as a pause frame after [`SILENCE_TIMEOUT`] seconds without input and
//! no held notes.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::config::{DrillConfig, DrillKind};
use crate::midi::{
    decode_live, IngestWarning, LiveMessage, NoteEvent, NotePairer, PairOutcome, PerformanceStream,
    VoiceMap,
};
use crate::report::{analyze_takes, Report, SCHEMA_VERSION};

pub const HELD_INTERVAL: f64 = 0.1;
pub const SILENCE_TIMEOUT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Producer,
    Consumer,
}

/// One inbound line. A bare `{status, data1, data2, time}` object is read as
/// an event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Inbound {
    Hello { role: Role },
    Event(LiveMessage),
    Config { config: Box<DrillConfig> },
    NewTake,
    End,
}

pub fn parse_inbound(line: &str) -> Result<Inbound, String> {
    match serde_json::from_str::<Inbound>(line) {
        Ok(m) => Ok(m),
        Err(tagged) => serde_json::from_str::<LiveMessage>(line)
            .map(Inbound::Event)
            .map_err(|_| tagged.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    /// The analysis changed.
    Update,
    /// Input stopped; clients may freeze the display.
    Pause,
    /// Inbound input was rejected.
    Warning,
    /// The drill configuration changed.
    Config,
    /// A new take started.
    Take,
    /// The session is over; this frame carries the final analysis.
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Frame {
    pub schema_version: u32,
    pub seq: u64,
    pub wall_time: f64,
    pub drill: DrillKind,
    pub kind: FrameKind,
    pub reason: Option<String>,
    pub report: Option<Report>,
    /// Notes started or released since the previous frame.
    pub events: Vec<NoteEvent>,
    /// Warnings raised since the previous frame.
    pub warnings: Vec<IngestWarning>,
}

/// JSON Schema of an outbound frame line.
pub fn frame_schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(Frame)).unwrap_or_default()
}

impl Frame {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    config: DrillConfig,
    voices: VoiceMap,
    pairer: NotePairer,
    stream: PerformanceStream,
    takes: Vec<PerformanceStream>,
    seq: u64,
    last_input: f64,
    last_frame: f64,
    paused: bool,
    ended: bool,
    pending_events: Vec<NoteEvent>,
    pending_warnings: Vec<IngestWarning>,
    seen_warnings: usize,
}

impl Session {
    pub fn new(config: DrillConfig, now: f64) -> Self {
        Session {
            voices: config.voice_map(),
            config,
            pairer: NotePairer::new(),
            stream: PerformanceStream::new(),
            takes: Vec::new(),
            seq: 0,
            last_input: now,
            last_frame: now,
            paused: false,
            ended: false,
            pending_events: Vec::new(),
            pending_warnings: Vec::new(),
            seen_warnings: 0,
        }
    }

    pub fn config(&self) -> &DrillConfig {
        &self.config
    }

    pub fn stream(&self) -> &PerformanceStream {
        &self.stream
    }

    pub fn is_ended(&self) -> bool {
        self.ended
    }

    /// Analysis of the current take.
    pub fn report(&self) -> Result<Report, crate::report::AnalysisError> {
        analyze_takes(&self.config, &self.takes, &self.stream)
    }

    /// Parses and handles one inbound line.
    pub fn handle_line(&mut self, line: &str, now: f64) -> Vec<Frame> {
        match parse_inbound(line) {
            Ok(msg) => self.handle(msg, now),
            Err(e) => self.warn(format!("unreadable message: {e}"), now),
        }
    }

    pub fn handle(&mut self, msg: Inbound, now: f64) -> Vec<Frame> {
        if self.ended {
            return Vec::new();
        }
        match msg {
            Inbound::Hello { .. } => Vec::new(),
            Inbound::Event(live) => self.event(live, now),
            Inbound::Config { config } => match config.validate() {
                Ok(()) => {
                    self.voices = config.voice_map();
                    self.config = *config;
                    vec![self.frame(FrameKind::Config, None, now)]
                }
                Err(e) => self.warn(format!("rejected config: {e}"), now),
            },
            Inbound::NewTake => {
                let done = std::mem::take(&mut self.stream);
                self.takes.push(done);
                self.pairer = NotePairer::new();
                self.seen_warnings = 0;
                vec![self.frame(FrameKind::Take, None, now)]
            }
            Inbound::End => {
                self.ended = true;
                vec![self.frame(FrameKind::End, None, now)]
            }
        }
    }

    fn event(&mut self, live: LiveMessage, now: f64) -> Vec<Frame> {
        let raw = match decode_live(&live) {
            Ok(Some(raw)) => raw,
            Ok(None) => return Vec::new(),
            Err(e) => return self.warn(format!("bad event: {e}"), now),
        };
        self.last_input = now;
        self.paused = false;
        let outcome = self.pairer.feed(&mut self.stream, &self.voices, raw);
        self.collect_warnings();
        match outcome {
            PairOutcome::Opened(e) => {
                self.pending_events.push(e);
                Vec::new()
            }
            PairOutcome::Closed(e) => {
                self.pending_events.push(e);
                vec![self.frame(FrameKind::Update, Some("release"), now)]
            }
            PairOutcome::Dropped => Vec::new(),
        }
    }

    /// Time-driven frames: held-note refreshes and the silence pause.
    pub fn tick(&mut self, now: f64) -> Vec<Frame> {
        if self.ended {
            return Vec::new();
        }
        let silent = self.pairer.open_count() == 0 && now - self.last_input >= SILENCE_TIMEOUT;
        if !self.paused && silent {
            self.paused = true;
            return vec![self.frame(FrameKind::Pause, Some("silence"), now)];
        }
        if self.pairer.open_count() > 0 && now - self.last_frame >= HELD_INTERVAL {
            return vec![self.frame(FrameKind::Update, Some("held"), now)];
        }
        Vec::new()
    }

    fn collect_warnings(&mut self) {
        let w = &self.stream.warnings;
        self.pending_warnings
            .extend(w[self.seen_warnings.min(w.len())..].iter().cloned());
        self.seen_warnings = w.len();
    }

    fn warn(&mut self, detail: String, now: f64) -> Vec<Frame> {
        self.pending_warnings
            .push(IngestWarning::MalformedMessage { detail });
        vec![self.frame(FrameKind::Warning, Some("malformed"), now)]
    }

    fn frame(&mut self, kind: FrameKind, reason: Option<&str>, now: f64) -> Frame {
        self.seq += 1;
        self.last_frame = now;
        let (report, analysis_error) = match self.report() {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let mut warnings = std::mem::take(&mut self.pending_warnings);
        if let Some(detail) = analysis_error {
            warnings.push(IngestWarning::MalformedMessage { detail });
        }
        Frame {
            schema_version: SCHEMA_VERSION,
            seq: self.seq,
            wall_time: now,
            drill: self.config.kind,
            kind,
            reason: reason.map(str::to_string),
            report,
            events: std::mem::take(&mut self.pending_events),
            warnings,
        }
    }
}
