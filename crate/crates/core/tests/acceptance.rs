//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails or overruns its time budget.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use practice_core::duration::{classify_duration, default_vocabulary, Verdict};
use practice_core::fretboard::{detect_octave_shift, FacetStats, FretNote};
use practice_core::grid::{seconds_to_beats, GridPoint};
use practice_core::harmony::{bin_notes, classify_note, Chord, ChordQuality, NoteFit, PitchClass, Scale};
use practice_core::midi::{parse_smf_with, write_smf, DrumVoice, NoteEvent, SmfFormat, WriteOptions};
use practice_core::report::analyze_bytes;
use practice_core::rhythm::{quantization_ranges, quantize_ioi, representable_set, VocabularyConfig};
use practice_core::server::{serve, ServeOptions};
use practice_core::session::FrameKind;
use practice_core::synth::{generate, AccentPattern, ErrorModel, PatternSpec, Slot, Sound, Warmup};
use practice_core::timing::{
    build_records, density, group_rows, histogram, tolerance_score, OnsetRecord, TimingRow,
};
use practice_core::{DrillKind, GridConfig, PerformanceStream, VoiceTag};

type Check = fn();

fn main() {
    let criteria: &[(&str, u64, Check)] = &[
        ("tempo conversion: quarter at 120 BPM lasts 0.5 s", 1, tempo_conversion),
        ("duration verdicts partition and match a nearest-value oracle", 1_000, duration_partition),
        ("held 3.4 beats is a too-long dotted half", 1_000, whole_note_failure),
        ("tolerance score equals a brute-force count", 1_000, tolerance_score_oracle),
        ("density integrates to one and histograms count every onset", 1_000, density_normalization),
        ("aggregates ignore repetition order, row means do not", 1_000, aggregation_blindness),
        ("warm-up lateness fades over the first 30 repetitions", 2_000, warmup_reconstruction),
        ("quantizer agrees with its ranges; dotted sixteenth beats triplet", 1_000, quantization_partition),
        ("tied quarter and sixteenth is 1.25 beats", 1_000, tie_arithmetic),
        ("chord-tone fixture and octave-invariant classification", 1_000, harmony_fixtures),
        ("octave shift of +12 frets and antisymmetry", 1_000, octave_shift),
        ("100 synthetic streams survive an SMF round trip", 5_000, smf_round_trip),
        ("live replay ends in the batch report for every drill kind", 10_000, stream_batch_equivalence),
    ];
    let mut failed = 0;
    for (name, budget_ms, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let budget = Duration::from_millis(*budget_ms);
        let ms = elapsed.as_secs_f64() * 1e3;
        match outcome {
            Ok(()) if elapsed <= budget => println!("PASS {name} ({ms:.1} ms)"),
            Ok(()) => {
                failed += 1;
                println!("FAIL {name}: took {ms:.1} ms, budget {budget_ms} ms");
            }
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL {name}: {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn record(deviation_beats: f64, repetition: u64) -> OnsetRecord {
    OnsetRecord {
        deviation_beats,
        grid: GridPoint {
            repetition,
            index: 0,
            beat_in_cycle: 0.0,
        },
        angle: 0.0,
        velocity: 80,
        voice: VoiceTag::Keyboard,
        pitch: 60,
    }
}

fn tempo_conversion() {
    let beats = seconds_to_beats(0.5, 120.0);
    assert!((beats - 1.0).abs() <= 1e-12);
    let g = GridConfig::default();
    assert!((g.beats_to_seconds(1.0) - 0.5).abs() <= 1e-12);
}

fn duration_partition() {
    let vocab = default_vocabulary();
    let values: Vec<f64> = vocab.iter().map(|s| s.beats()).collect();
    let mut r = rng(1);
    for _ in 0..10_000 {
        let held = r.gen_range(0.01..8.0);
        let v = classify_duration(held, &vocab, 0.10).unwrap();
        // Oracle: every entry's distance, pick the minimum, shorter on ties.
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| {
            let da = (held - values[a]).abs();
            let db = (held - values[b]).abs();
            da.total_cmp(&db).then(values[a].total_cmp(&values[b]))
        });
        let target = values[idx[0]];
        let rel = (held - target) / target;
        let good = rel.abs() <= 0.10;
        let short = !good && held < target;
        let long = !good && held > target;
        assert_eq!([good, short, long].iter().filter(|&&x| x).count(), 1);
        let expected = if good {
            Verdict::Good
        } else if short {
            Verdict::TooShort
        } else {
            Verdict::TooLong
        };
        assert_eq!(v.verdict, expected, "held {held}");
        assert_eq!(v.nearest.beats(), target, "held {held}");
    }
}

fn whole_note_failure() {
    let v = classify_duration(3.4, &default_vocabulary(), 0.10).unwrap();
    assert_eq!(v.nearest.to_string(), "half.");
    assert_eq!(v.verdict, Verdict::TooLong);
}

fn tolerance_score_oracle() {
    let mut r = rng(2);
    for _ in 0..1_000 {
        let n = r.gen_range(1..60);
        let tol = r.gen_range(0.0..0.3);
        let recs: Vec<OnsetRecord> = (0..n).map(|_| record(r.gen_range(-0.5..0.5), 0)).collect();
        let mut inside = 0;
        for rec in &recs {
            if -tol <= rec.deviation_beats && rec.deviation_beats <= tol {
                inside += 1;
            }
        }
        let expected = inside as f64 * 100.0 / n as f64;
        let got = tolerance_score(&recs, tol).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }
}

fn density_normalization() {
    let mut r = rng(3);
    for _ in 0..200 {
        let n = r.gen_range(1..80);
        let spread = r.gen_range(0.001..0.25);
        let recs: Vec<OnsetRecord> = (0..n).map(|_| record(r.gen_range(-spread..spread), 0)).collect();
        let d = density(&recs, 0.02, 201, 0.25).unwrap();
        let area: f64 = d
            .x
            .windows(2)
            .zip(d.y.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
            .sum();
        assert!((area - 1.0).abs() <= 1e-3, "area {area}");
        let h = histogram(&recs, 0.125).unwrap();
        assert_eq!(h.total(), n);
    }
}

fn warmup_model(jitter: f64) -> ErrorModel {
    ErrorModel {
        jitter_std_beats: jitter,
        warmup: Some(Warmup {
            initial_beats: 0.2,
            decay_repetitions: 30.0,
            shape: Default::default(),
        }),
        seed: 2024,
        ..Default::default()
    }
}

fn warmup_records(jitter: f64) -> Vec<OnsetRecord> {
    let g = GridConfig::default();
    let spec = PatternSpec::every_slot(g, Sound::Pitch { pitch: 60, channel: 0 }, 120);
    build_records(&generate(&spec, &warmup_model(jitter)).unwrap(), &g)
}

fn row_means(rows: &[TimingRow]) -> Vec<f64> {
    rows.iter().map(|r| r.mean_deviation().unwrap()).collect()
}

fn aggregation_blindness() {
    let recs = warmup_records(0.02);
    // Reverse the repetition order.
    let last = recs.iter().map(|r| r.grid.repetition).max().unwrap();
    let shuffled: Vec<OnsetRecord> = recs
        .iter()
        .map(|r| {
            let mut s = r.clone();
            s.grid.repetition = last - r.grid.repetition;
            s
        })
        .collect();
    assert_eq!(histogram(&recs, 0.125).unwrap(), histogram(&shuffled, 0.125).unwrap());
    assert_eq!(
        density(&recs, 0.02, 201, 0.25).unwrap(),
        density(&shuffled, 0.02, 201, 0.25).unwrap()
    );
    assert_ne!(row_means(&group_rows(&recs)), row_means(&group_rows(&shuffled)));
}

/// Ranks with ties averaged.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for k in i..=j {
            out[idx[k]] = avg;
        }
        i = j + 1;
    }
    out
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn warmup_reconstruction() {
    let rows = group_rows(&warmup_records(0.02));
    assert_eq!(rows.len(), 120);
    let means = row_means(&rows);
    let reps: Vec<f64> = (0..=30).map(|r| r as f64).collect();
    let rho = spearman(&reps, &means[..=30]);
    assert!(rho <= -0.9, "spearman {rho}");
    assert!((means[0] - 0.2).abs() < 0.03, "first row {}", means[0]);
    assert!(means[30..].iter().all(|m| m.abs() < 0.03));
}

fn quantization_partition() {
    let set = representable_set(&VocabularyConfig::default());
    let ranges = quantization_ranges(&set).unwrap();
    let mut r = rng(4);
    for _ in 0..10_000 {
        let ioi = r.gen_range(0.01..8.0);
        let q = quantize_ioi(ioi, &set).unwrap();
        let owner: Vec<_> = ranges.iter().filter(|rg| rg.contains(ioi)).collect();
        assert_eq!(owner.len(), 1, "ioi {ioi}");
        assert_eq!(owner[0].symbol, q.symbol, "ioi {ioi}");
    }
    assert_eq!(quantize_ioi(0.37, &set).unwrap().symbol.to_string(), "sixteenth.");
    let width = |name: &str| ranges.iter().find(|r| r.symbol.to_string() == name).unwrap().width();
    assert!((width("quarter") - 0.375).abs() < 1e-12);
    assert!((width("eighth") - 0.145_833_333_333_333_3).abs() < 1e-9);
    assert!(width("quarter") > width("eighth"));
}

fn tie_arithmetic() {
    let set = representable_set(&VocabularyConfig {
        allow_ties: true,
        ..Default::default()
    });
    let r = set.iter().find(|r| r.beats == 1.25).expect("1.25 representable");
    assert_eq!(r.symbol.to_string(), "quarter+sixteenth");
    assert_eq!(r.symbol.beats(), 1.25);
}

fn harmony_fixtures() {
    let (config, _) = fixture(DrillKind::ChordProgression);
    let progression = config.chord_progression().unwrap();
    // Every bar's chord tones, two repetitions.
    let g = config.grid;
    let mut events = Vec::new();
    for rep in 0..2 {
        for (bar, chord) in progression.bars.iter().enumerate() {
            for (i, &iv) in chord.quality.template().iter().enumerate() {
                let beats = (rep * 16 + bar * 4 + i) as f64;
                events.push(NoteEvent {
                    onset: g.beats_to_seconds(beats),
                    release: Some(g.beats_to_seconds(beats + 0.5)),
                    pitch: 48 + chord.root.value() + iv,
                    velocity: 80,
                    channel: 0,
                    voice: VoiceTag::Keyboard,
                });
            }
        }
    }
    let w = bin_notes(&PerformanceStream::from_events(events), &g, &progression);
    assert!(w.total() > 0);
    assert_eq!(w.count_fit(NoteFit::ScaleTone), 0);
    assert_eq!(w.count_fit(NoteFit::Outside), 0);

    let scale = Scale::from_mode(PitchClass::new(0), "major").unwrap();
    let major = [0u8, 2, 4, 5, 7, 9, 11];
    for root in 0..12 {
        for q in ChordQuality::BUILTIN {
            let chord = Chord::new(PitchClass::new(root), q.clone());
            for pitch in 0u8..128 {
                let got = classify_note(PitchClass::of_pitch(pitch), &chord, &scale);
                let rel = ((pitch as i32 - root).rem_euclid(12)) as u8;
                let expected = if q.template().contains(&rel) {
                    NoteFit::ChordTone
                } else if major.contains(&(pitch % 12)) {
                    NoteFit::ScaleTone
                } else {
                    NoteFit::Outside
                };
                assert_eq!(got, expected, "pitch {pitch} over {chord}");
                if pitch >= 12 {
                    let lower = classify_note(PitchClass::of_pitch(pitch - 12), &chord, &scale);
                    assert_eq!(got, lower);
                }
            }
        }
    }
}

fn fret_note(string: u8, fret: u8, onset_beats: f64) -> FretNote {
    FretNote {
        string,
        fret,
        onset_beats,
        velocity: 80,
        pitch: practice_core::midi::STANDARD_TUNING[string as usize - 1] + fret,
        jitter_seed: 0,
    }
}

fn octave_shift() {
    // A, C and E around frets 5 to 8, then the same shape twelve frets up.
    let low = [(1, 5), (2, 5), (1, 8), (3, 5), (2, 5)];
    let a: Vec<_> = low.iter().map(|&(s, f)| fret_note(s, f, 0.0)).collect();
    let b: Vec<_> = low.iter().map(|&(s, f)| fret_note(s, f + 12, 4.0)).collect();
    let (sa, sb) = (FacetStats::from_notes(0, &a), FacetStats::from_notes(1, &b));
    assert_eq!(detect_octave_shift(&sa, &sb), Some(12));

    let mut r = rng(5);
    let mut defined = 0;
    for _ in 0..1_000 {
        let n = r.gen_range(1..10);
        let a: Vec<_> = (0..n)
            .map(|_| fret_note(r.gen_range(1..=6), r.gen_range(0..=10), 0.0))
            .collect();
        let twin = r.gen_bool(0.5);
        let b: Vec<_> = if twin {
            // Same notes an octave up, each repeated the same number of times.
            let copies = r.gen_range(1..=3);
            a.iter()
                .flat_map(|x| std::iter::repeat_n(fret_note(x.string, x.fret + 12, 4.0), copies))
                .collect()
        } else {
            (0..r.gen_range(1..10))
                .map(|_| fret_note(r.gen_range(1..=6), r.gen_range(0..=22), 4.0))
                .collect()
        };
        let (sa, sb) = (FacetStats::from_notes(0, &a), FacetStats::from_notes(1, &b));
        let ab = detect_octave_shift(&sa, &sb);
        let ba = detect_octave_shift(&sb, &sa);
        assert_eq!(ab, ba.map(|x| -x));
        if twin {
            assert_eq!(ab, Some(12));
        }
        defined += ab.is_some() as usize;
    }
    assert!(defined > 100, "only {defined} pairs had a shift");
}

fn random_stream(r: &mut ChaCha8Rng, seed: u64) -> PerformanceStream {
    let grid = GridConfig {
        bpm: r.gen_range(60.0..200.0),
        subdivision: r.gen_range(1..=4),
        ..Default::default()
    };
    let struck: Vec<u32> = (0..grid.slots_per_cycle())
        .filter(|_| r.gen_bool(0.7))
        .collect();
    let slots = struck
        .into_iter()
        .map(|index| Slot {
            index,
            sound: match r.gen_range(0..3) {
                0 => Sound::Drum {
                    voice: DrumVoice::ALL[r.gen_range(0..6)],
                },
                _ => Sound::Pitch {
                    pitch: r.gen_range(21..=108),
                    channel: r.gen_range(0..9),
                },
            },
            hold_beats: None,
        })
        .collect();
    let spec = PatternSpec {
        grid,
        slots,
        repetitions: r.gen_range(1..6),
        tuning: Default::default(),
    };
    let model = ErrorModel {
        jitter_std_beats: r.gen_range(0.0..0.05),
        ghost_note_prob: r.gen_range(0.0..0.2),
        velocity_noise_std: r.gen_range(0.0..10.0),
        accent: r.gen_bool(0.5).then_some(AccentPattern {
            period: 4,
            offset: 0,
            accent_velocity: 115,
            base_velocity: 70,
        }),
        seed,
        ..Default::default()
    };
    generate(&spec, &model).unwrap()
}

fn smf_round_trip() {
    let mut r = rng(6);
    let opts = WriteOptions::default();
    let tick = 60.0 / (opts.bpm * opts.ticks_per_quarter as f64);
    for i in 0..100u64 {
        let stream = random_stream(&mut r, i);
        let format = if i % 2 == 0 { SmfFormat::Single } else { SmfFormat::MultiTrack };
        let bytes = write_smf(&stream, &WriteOptions { format, ..opts });
        let back = parse_smf_with(&bytes, &Default::default()).unwrap().stream;
        assert_eq!(back.len(), stream.len(), "stream {i}");
        // Match by key in onset order; equal onsets may swap after rounding.
        let key = |e: &NoteEvent| (e.channel, e.pitch);
        let mut by_key: BTreeMap<(u8, u8), Vec<&NoteEvent>> = BTreeMap::new();
        for e in back.events() {
            by_key.entry(key(e)).or_default().push(e);
        }
        let mut seen: BTreeMap<(u8, u8), usize> = BTreeMap::new();
        for e in stream.events() {
            let k = key(e);
            let n = seen.entry(k).or_default();
            let got = by_key[&k][*n];
            *n += 1;
            assert!((got.onset - e.onset).abs() <= tick, "stream {i}: onset");
            let (a, b) = (got.release.unwrap(), e.release.unwrap());
            assert!((a - b).abs() <= tick, "stream {i}: release {a} vs {b}");
            assert_eq!((got.velocity, got.voice), (e.velocity, e.voice), "stream {i}");
        }
    }
}

fn stream_batch_equivalence() {
    for kind in DrillKind::ALL {
        let (config, stream) = fixture(kind);
        let smf = to_smf(&stream);
        let batch = analyze_bytes(&config, &smf).unwrap();
        let log = event_log(&config, &smf);

        let server = serve(config, ServeOptions::local(0)).unwrap();
        let consumer = connect_consumers(&server, 1).remove(0);
        let producer = connect(server.local_addr(), None);
        for m in &log {
            send(&producer, &serde_json::to_string(m).unwrap());
        }
        send(&producer, r#"{"type":"end"}"#);
        let frames = read_frames(consumer);
        let last = frames.last().expect("frames");
        assert_eq!(last.kind, FrameKind::End, "{kind:?}");
        assert_eq!(last.drill, kind);
        assert_eq!(last.report.as_ref(), Some(&batch), "{kind:?}");
        server.shutdown();
    }
}
