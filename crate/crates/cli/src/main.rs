use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use practice_core::config::{
    config_schema, AccentPatternSpec, ConfigError, ProgressionConfig, SynthSection,
};
use practice_core::midi::{write_smf, SmfFormat, Tuning, WriteOptions};
use practice_core::report::{analyze_file, report_schema, AnalysisError};
use practice_core::session::frame_schema;
use practice_core::server::{serve, ServeOptions, ServerError};
use practice_core::synth::{generate_with, DecayShape, ErrorModel, Slot, Sound, SynthError, Warmup};
use practice_core::{DrillConfig, DrillKind};

#[derive(Parser)]
#[command(name = "practice", version, about = "Practice analytics over MIDI performances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a Standard MIDI File and print the report as JSON.
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        drill: DrillArgs,
        /// Write the report here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Stream live analysis frames over a local socket.
    Serve {
        #[command(flatten)]
        drill: DrillArgs,
        #[arg(long, default_value_t = 7878)]
        port: u16,
    },
    /// Generate an imperfect performance and write it as a MIDI file.
    Synth {
        #[command(flatten)]
        drill: DrillArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FileFormat::Multi)]
        format: FileFormat,
    },
    /// Print a JSON Schema.
    Schema {
        #[arg(long, value_enum, default_value_t = SchemaKind::Report)]
        of: SchemaKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FileFormat {
    Single,
    Multi,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaKind {
    Report,
    Config,
    Frame,
}

#[derive(Args)]
struct DrillArgs {
    /// Drill configuration document (TOML, or JSON by extension).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// duration | timing | accents | chord-progression | fretboard
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    bpm: Option<f64>,
    #[arg(long)]
    beats_per_bar: Option<u32>,
    #[arg(long)]
    subdivision: Option<u32>,
    #[arg(long)]
    cycle_beats: Option<f64>,
    /// Half-width of the timing acceptance zone, in beats.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Relative duration deviation still judged good.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    accent_period: Option<usize>,
    #[arg(long)]
    accent_offset: Option<usize>,
    #[arg(long)]
    key: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    /// One chord per bar, e.g. "C Am F G".
    #[arg(long)]
    chords: Option<String>,
    #[arg(long)]
    bars_per_facet: Option<u32>,
    /// Six open-string pitches, highest string first, e.g. 64,59,55,50,45,40.
    #[arg(long, value_delimiter = ',')]
    tuning: Option<Vec<u8>>,
}

#[derive(Args)]
struct ModelArgs {
    /// Repetitions when the configuration has no synth section.
    #[arg(long, visible_alias = "reps", default_value_t = 8)]
    repetitions: u32,
    /// MIDI pitch struck on every slot when the configuration has no synth section.
    #[arg(long, default_value_t = 60)]
    pitch: u8,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    warmup_beats: Option<f64>,
    #[arg(long)]
    warmup_reps: Option<f64>,
    #[arg(long)]
    exponential_warmup: bool,
    #[arg(long)]
    drift: Option<f64>,
    #[arg(long)]
    ghost_prob: Option<f64>,
    #[arg(long)]
    velocity_noise: Option<f64>,
}

impl DrillArgs {
    fn load(&self) -> Result<DrillConfig> {
        let mut config = match &self.config {
            Some(path) => DrillConfig::load(path)?,
            None => {
                let Some(kind) = &self.kind else {
                    bail!("either --config or --kind is required");
                };
                DrillConfig::new(kind.parse::<DrillKind>().map_err(anyhow::Error::msg)?)
            }
        };
        if let Some(kind) = &self.kind {
            config.kind = kind.parse().map_err(anyhow::Error::msg)?;
        }
        let g = &mut config.grid;
        set(&mut g.bpm, self.bpm);
        set(&mut g.beats_per_bar, self.beats_per_bar);
        set(&mut g.subdivision, self.subdivision);
        set(&mut g.cycle_beats, self.cycle_beats);
        set(&mut g.tolerance_beats, self.tolerance);
        set(&mut config.duration.threshold, self.threshold);
        set(&mut config.fretboard.bars_per_facet, self.bars_per_facet);
        if let Some(period) = self.accent_period {
            config.rhythm.accent_pattern = Some(AccentPatternSpec {
                period,
                offset: self.accent_offset.unwrap_or(0),
            });
        }
        if self.key.is_some() || self.mode.is_some() || self.chords.is_some() {
            let base = config.progression.take();
            let p = ProgressionConfig {
                key: self
                    .key
                    .clone()
                    .or_else(|| base.as_ref().map(|b| b.key.clone()))
                    .unwrap_or_else(|| "C".into()),
                mode: self
                    .mode
                    .clone()
                    .or_else(|| base.as_ref().map(|b| b.mode.clone()))
                    .unwrap_or_else(|| "major".into()),
                chords: self
                    .chords
                    .clone()
                    .or_else(|| base.as_ref().map(|b| b.chords.clone()))
                    .unwrap_or_default(),
                bar_scales: base.as_ref().and_then(|b| b.bar_scales.clone()),
                custom_qualities: base.map(|b| b.custom_qualities).unwrap_or_default(),
            };
            config.progression = Some(p);
        }
        if let Some(t) = &self.tuning {
            let open: [u8; 6] = t
                .as_slice()
                .try_into()
                .context("--tuning needs exactly six pitches")?;
            config.fretboard.tuning = Tuning {
                open,
                ..config.fretboard.tuning
            };
        }
        config.validate()?;
        Ok(config)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ModelArgs {
    fn section(&self, config: &DrillConfig) -> SynthSection {
        let mut section = config.synth.clone().unwrap_or_else(|| SynthSection {
            slots: (0..config.grid.slots_per_cycle())
                .map(|index| Slot {
                    index,
                    sound: Sound::Pitch {
                        pitch: self.pitch,
                        channel: 0,
                    },
                    hold_beats: None,
                })
                .collect(),
            repetitions: self.repetitions,
            model: ErrorModel::default(),
        });
        let m = &mut section.model;
        set(&mut m.seed, self.seed);
        set(&mut m.jitter_std_beats, self.jitter);
        set(&mut m.tempo_drift_beats, self.drift);
        set(&mut m.ghost_note_prob, self.ghost_prob);
        set(&mut m.velocity_noise_std, self.velocity_noise);
        if let Some(initial_beats) = self.warmup_beats {
            m.warmup = Some(Warmup {
                initial_beats,
                decay_repetitions: self.warmup_reps.unwrap_or(30.0),
                shape: if self.exponential_warmup {
                    DecayShape::Exponential
                } else {
                    DecayShape::Linear
                },
            });
        }
        section
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => Ok(other?),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze { file, drill, out } => {
            let config = drill.load()?;
            let report = analyze_file(&config, &file)?;
            write_output(out.as_deref(), &report.to_json())
        }
        Command::Serve { drill, port } => {
            let config = drill.load()?;
            let server = serve(config, ServeOptions::local(port))?;
            log::info!("listening on {}", server.local_addr());
            eprintln!("listening on {}", server.local_addr());
            while !server.wait_ended(Some(Duration::from_secs(3600))) {}
            // Let consumers drain the final frame.
            std::thread::sleep(Duration::from_millis(200));
            server.shutdown();
            Ok(())
        }
        Command::Synth {
            drill,
            model,
            out,
            format,
        } => {
            let config = drill.load()?;
            let section = model.section(&config);
            section.model.validate()?;
            let spec = config.pattern(&section);
            let stream = generate_with(&spec, &section.model, &config.voice_map())?;
            let bytes = write_smf(
                &stream,
                &WriteOptions {
                    format: match format {
                        FileFormat::Single => SmfFormat::Single,
                        FileFormat::Multi => SmfFormat::MultiTrack,
                    },
                    bpm: config.grid.bpm,
                    ..Default::default()
                },
            );
            fs::write(&out, bytes).with_context(|| format!("cannot write {}", out.display()))?;
            log::info!("wrote {} notes to {}", stream.len(), out.display());
            Ok(())
        }
        Command::Schema { of } => {
            let schema = match of {
                SchemaKind::Report => report_schema(),
                SchemaKind::Config => config_schema(),
                SchemaKind::Frame => frame_schema(),
            };
            write_output(None, &serde_json::to_string_pretty(&schema)?)
        }
    }
}

/// Classifies an error for the JSON error record.
fn error_record(err: &anyhow::Error) -> (serde_json::Value, u8) {
    let mut kind = "error";
    let mut field = None;
    let mut offset = None;
    let mut code = 1;
    if let Some(e) = err.downcast_ref::<ConfigError>() {
        kind = "config";
        field = e.field().map(str::to_string);
        code = 2;
    } else if let Some(e) = err.downcast_ref::<AnalysisError>() {
        match e {
            AnalysisError::Smf(s) => {
                kind = "parse";
                offset = Some(s.offset());
                code = 3;
            }
            AnalysisError::Io { .. } => kind = "io",
            _ => kind = "analysis",
        }
    } else if err.downcast_ref::<ServerError>().is_some() {
        kind = "server";
        code = 4;
    } else if err.downcast_ref::<SynthError>().is_some() {
        kind = "synth";
        code = 2;
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        kind = "io";
    }
    let record = serde_json::json!({
        "error": {
            "kind": kind,
            "message": format!("{err:#}"),
            "field": field,
            "offset": offset,
        }
    });
    (record, code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (record, code) = error_record(&err);
            eprintln!("{record}");
            ExitCode::from(code)
        }
    }
}
