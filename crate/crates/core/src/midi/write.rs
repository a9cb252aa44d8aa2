use super::PerformanceStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmfFormat {
    /// One track holding everything.
    Single,
    /// A tempo track followed by one track per used channel.
    MultiTrack,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriteOptions {
    pub format: SmfFormat,
    pub ticks_per_quarter: u16,
    pub bpm: f64,
}

impl Default for WriteOptions {
    fn default() -> Self {
        WriteOptions {
            format: SmfFormat::Single,
            ticks_per_quarter: 480,
            bpm: 120.0,
        }
    }
}

fn push_vlq(out: &mut Vec<u8>, mut v: u32) {
    let mut buf = [0u8; 5];
    let mut i = buf.len() - 1;
    buf[i] = (v & 0x7f) as u8;
    v >>= 7;
    while v > 0 {
        i -= 1;
        buf[i] = ((v & 0x7f) as u8) | 0x80;
        v >>= 7;
    }
    out.extend_from_slice(&buf[i..]);
}

fn chunk(out: &mut Vec<u8>, id: &[u8; 4], body: &[u8]) {
    out.extend_from_slice(id);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
}

/// (tick, is_on, order, status, data1, data2)
type TimedMsg = (u64, bool, usize, u8, u8, u8);

fn track_body(msgs: &mut [TimedMsg], tempo: Option<u32>) -> Vec<u8> {
    // Offs sort before ons on the same tick so re-struck keys pair correctly.
    msgs.sort_by_key(|m| (m.0, m.1, m.2));
    let mut body = Vec::new();
    if let Some(us) = tempo {
        body.extend_from_slice(&[0x00, 0xff, 0x51, 0x03]);
        body.extend_from_slice(&us.to_be_bytes()[1..]);
    }
    let mut last = 0u64;
    for &(tick, _, _, status, d1, d2) in msgs.iter() {
        push_vlq(&mut body, (tick - last).min(0x0fff_ffff) as u32);
        last = tick;
        body.extend_from_slice(&[status, d1, d2]);
    }
    body.extend_from_slice(&[0x00, 0xff, 0x2f, 0x00]);
    body
}

/// Serializes a stream as a Standard MIDI File at a fixed tempo.
///
/// Times are rounded to the nearest tick. A released note always lasts at
/// least one tick. Open notes are written without a note-off.
pub fn write_smf(stream: &PerformanceStream, opts: &WriteOptions) -> Vec<u8> {
    let tpq = opts.ticks_per_quarter.clamp(1, 0x7fff);
    let ticks_per_second = opts.bpm / 60.0 * tpq as f64;
    let to_tick = |t: f64| (t.max(0.0) * ticks_per_second).round() as u64;
    let tempo_us = (60_000_000.0 / opts.bpm).round().clamp(1.0, 0xff_ffff as f64) as u32;

    let mut per_channel: Vec<Vec<TimedMsg>> = vec![Vec::new(); 16];
    for (order, e) in stream.events().iter().enumerate() {
        let ch = (e.channel & 0x0f) as usize;
        let on = to_tick(e.onset);
        per_channel[ch].push((on, true, order, 0x90 | ch as u8, e.pitch, e.velocity.max(1)));
        if let Some(r) = e.release {
            let off = to_tick(r).max(on + 1);
            per_channel[ch].push((off, false, order, 0x80 | ch as u8, e.pitch, 0));
        }
    }

    let mut out = b"MThd".to_vec();
    out.extend_from_slice(&6u32.to_be_bytes());
    match opts.format {
        SmfFormat::Single => {
            let mut all: Vec<TimedMsg> = per_channel.into_iter().flatten().collect();
            out.extend_from_slice(&0u16.to_be_bytes());
            out.extend_from_slice(&1u16.to_be_bytes());
            out.extend_from_slice(&tpq.to_be_bytes());
            chunk(&mut out, b"MTrk", &track_body(&mut all, Some(tempo_us)));
        }
        SmfFormat::MultiTrack => {
            let used: Vec<Vec<TimedMsg>> =
                per_channel.into_iter().filter(|c| !c.is_empty()).collect();
            out.extend_from_slice(&1u16.to_be_bytes());
            out.extend_from_slice(&(used.len() as u16 + 1).to_be_bytes());
            out.extend_from_slice(&tpq.to_be_bytes());
            chunk(&mut out, b"MTrk", &track_body(&mut [], Some(tempo_us)));
            for mut msgs in used {
                chunk(&mut out, b"MTrk", &track_body(&mut msgs, None));
            }
        }
    }
    out
}
