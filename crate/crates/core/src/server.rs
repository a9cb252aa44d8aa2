//! Local NDJSON streaming service.
//!
//! Clients connect over TCP and may open with `{"type":"hello","role":...}`.
//! A connection without a hello is a producer. One producer sends live events
//! and control messages; any number of consumers receive frames, one JSON
//! object per line. Consumers may also send control messages (config, new
//! take, end). Each consumer has a bounded queue that drops its oldest frame
//! when full, so a slow reader skips frames but always gets the latest.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::config::DrillConfig;
use crate::session::{parse_inbound, Frame, Inbound, Role, Session};

pub const QUEUE_CAPACITY: usize = 256;
pub const TICK_INTERVAL: Duration = Duration::from_millis(20);
const POLL: Duration = Duration::from_millis(50);

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("port {0} is already in use")]
    PortBusy(u16),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Queue {
    lines: Mutex<(VecDeque<Arc<str>>, bool)>,
    ready: Condvar,
    capacity: usize,
}

impl Queue {
    fn new(capacity: usize) -> Self {
        Queue {
            lines: Mutex::new((VecDeque::new(), false)),
            ready: Condvar::new(),
            capacity,
        }
    }

    fn push(&self, line: Arc<str>) {
        let mut q = lock(&self.lines);
        if q.0.len() >= self.capacity {
            q.0.pop_front();
        }
        q.0.push_back(line);
        self.ready.notify_one();
    }

    fn close(&self) {
        lock(&self.lines).1 = true;
        self.ready.notify_all();
    }

    /// Next line; `None` once closed and drained.
    fn pop(&self, stop: &AtomicBool) -> Option<Arc<str>> {
        let mut q = lock(&self.lines);
        loop {
            if let Some(line) = q.0.pop_front() {
                return Some(line);
            }
            if q.1 || stop.load(Ordering::Relaxed) {
                return None;
            }
            q = self
                .ready
                .wait_timeout(q, POLL)
                .map(|(g, _)| g)
                .unwrap_or_else(|e| e.into_inner().0);
        }
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

struct Shared {
    session: Session,
    consumers: Vec<Arc<Queue>>,
    producer: bool,
    last_frame: Option<Arc<str>>,
}

struct Clock {
    start: Instant,
    epoch: f64,
}

impl Clock {
    fn now(&self) -> f64 {
        self.epoch + self.start.elapsed().as_secs_f64()
    }
}

struct State {
    shared: Mutex<Shared>,
    stop: AtomicBool,
    ended: (Mutex<bool>, Condvar),
    clock: Clock,
    capacity: usize,
}

impl State {
    fn broadcast(&self, shared: &mut Shared, frames: Vec<Frame>) {
        let mut end = false;
        for f in frames {
            end |= f.kind == crate::session::FrameKind::End;
            let line: Arc<str> = f.to_line().into();
            for c in &shared.consumers {
                c.push(line.clone());
            }
            shared.last_frame = Some(line);
        }
        if end {
            for c in &shared.consumers {
                c.close();
            }
            *lock(&self.ended.0) = true;
            self.ended.1.notify_all();
        }
    }

    fn handle_line(&self, line: &str) {
        let mut shared = lock(&self.shared);
        let now = self.clock.now();
        let frames = shared.session.handle_line(line, now);
        self.broadcast(&mut shared, frames);
    }
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub addr: SocketAddr,
    pub queue_capacity: usize,
}

impl ServeOptions {
    /// Loopback on `port`; 0 picks a free port.
    pub fn local(port: u16) -> Self {
        ServeOptions {
            addr: SocketAddr::from(([127, 0, 0, 1], port)),
            queue_capacity: QUEUE_CAPACITY,
        }
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    state: Arc<State>,
    threads: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn consumer_count(&self) -> usize {
        lock(&self.state.shared).consumers.len()
    }

    /// Blocks until `n` consumers are connected or `timeout` passes.
    pub fn wait_for_consumers(&self, n: usize, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        while self.consumer_count() < n {
            if Instant::now() >= deadline {
                return false;
            }
            thread::sleep(Duration::from_millis(2));
        }
        true
    }

    /// Blocks until the session ends or `timeout` passes; true if it ended.
    pub fn wait_ended(&self, timeout: Option<Duration>) -> bool {
        let deadline = timeout.map(|t| Instant::now() + t);
        let mut ended = lock(&self.state.ended.0);
        while !*ended {
            let wait = match deadline {
                Some(d) => match d.checked_duration_since(Instant::now()) {
                    Some(w) => w,
                    None => return false,
                },
                None => POLL,
            };
            ended = self
                .state
                .ended
                .1
                .wait_timeout(ended, wait)
                .map(|(g, _)| g)
                .unwrap_or_else(|e| e.into_inner().0);
        }
        true
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.state.stop.store(true, Ordering::Relaxed);
        for c in &lock(&self.state.shared).consumers {
            c.close();
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

pub fn serve(config: DrillConfig, options: ServeOptions) -> Result<ServerHandle, ServerError> {
    let listener = TcpListener::bind(options.addr).map_err(|e| match e.kind() {
        ErrorKind::AddrInUse => ServerError::PortBusy(options.addr.port()),
        _ => ServerError::Io(e),
    })?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let clock = Clock {
        start: Instant::now(),
        epoch: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0),
    };
    let state = Arc::new(State {
        shared: Mutex::new(Shared {
            session: Session::new(config, clock.now()),
            consumers: Vec::new(),
            producer: false,
            last_frame: None,
        }),
        stop: AtomicBool::new(false),
        ended: (Mutex::new(false), Condvar::new()),
        clock,
        capacity: options.queue_capacity.max(1),
    });

    let ticker = {
        let state = state.clone();
        thread::spawn(move || {
            while !state.stop.load(Ordering::Relaxed) {
                thread::sleep(TICK_INTERVAL);
                let mut shared = lock(&state.shared);
                let now = state.clock.now();
                let frames = shared.session.tick(now);
                state.broadcast(&mut shared, frames);
            }
        })
    };
    let acceptor = {
        let state = state.clone();
        thread::spawn(move || accept_loop(listener, state))
    };
    Ok(ServerHandle {
        addr,
        state,
        threads: vec![ticker, acceptor],
    })
}

fn accept_loop(listener: TcpListener, state: Arc<State>) {
    let mut workers = Vec::new();
    while !state.stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, _)) => {
                let state = state.clone();
                workers.push(thread::spawn(move || {
                    if let Err(e) = connection(stream, &state) {
                        log::debug!("connection closed: {e}");
                    }
                }));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                log::warn!("accept failed: {e}");
                thread::sleep(POLL);
            }
        }
        workers.retain(|w| !w.is_finished());
    }
    for w in workers {
        let _ = w.join();
    }
}

/// Reads newline-terminated lines, waking up periodically to honor shutdown.
struct LineReader {
    inner: BufReader<TcpStream>,
    buf: Vec<u8>,
}

impl LineReader {
    fn next(&mut self, stop: &AtomicBool) -> std::io::Result<Option<String>> {
        loop {
            if stop.load(Ordering::Relaxed) {
                return Ok(None);
            }
            match self.inner.read_until(b'\n', &mut self.buf) {
                Ok(0) if self.buf.is_empty() => return Ok(None),
                Ok(_) => {
                    let line = String::from_utf8_lossy(&self.buf).trim().to_string();
                    self.buf.clear();
                    return Ok(Some(line));
                }
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
    }
}

fn connection(stream: TcpStream, state: &Arc<State>) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(POLL))?;
    let mut reader = LineReader {
        inner: BufReader::new(stream.try_clone()?),
        buf: Vec::new(),
    };
    let first = loop {
        match reader.next(&state.stop)? {
            Some(l) if l.is_empty() => continue,
            Some(l) => break l,
            None => return Ok(()),
        }
    };
    match parse_inbound(&first) {
        Ok(Inbound::Hello {
            role: Role::Consumer,
        }) => consumer(stream, reader, state),
        Ok(Inbound::Hello {
            role: Role::Producer,
        }) => producer(stream, reader, state, None),
        _ => producer(stream, reader, state, Some(first)),
    }
}

fn producer(
    mut stream: TcpStream,
    mut reader: LineReader,
    state: &Arc<State>,
    first: Option<String>,
) -> std::io::Result<()> {
    {
        let mut shared = lock(&state.shared);
        if shared.producer {
            drop(shared);
            let msg = serde_json::json!({"type": "error", "message": "a producer is already connected"});
            writeln!(stream, "{msg}")?;
            return Ok(());
        }
        shared.producer = true;
    }
    let result = (|| {
        if let Some(line) = first {
            state.handle_line(&line);
        }
        while let Some(line) = reader.next(&state.stop)? {
            if !line.is_empty() {
                state.handle_line(&line);
            }
        }
        Ok(())
    })();
    lock(&state.shared).producer = false;
    result
}

fn consumer(stream: TcpStream, mut reader: LineReader, state: &Arc<State>) -> std::io::Result<()> {
    let queue = Arc::new(Queue::new(state.capacity));
    {
        let mut shared = lock(&state.shared);
        if let Some(last) = &shared.last_frame {
            queue.push(last.clone());
        }
        if shared.session.is_ended() {
            queue.close();
        }
        shared.consumers.push(queue.clone());
    }
    let control = {
        let state = state.clone();
        let queue = queue.clone();
        thread::spawn(move || {
            while let Ok(Some(line)) = reader.next(&state.stop) {
                if !line.is_empty() {
                    state.handle_line(&line);
                }
            }
            // The client went away: stop writing to it.
            queue.close();
        })
    };
    let mut out = std::io::BufWriter::new(stream.try_clone()?);
    let result = (|| {
        while let Some(line) = queue.pop(&state.stop) {
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
        Ok(())
    })();
    let _ = stream.shutdown(std::net::Shutdown::Both);
    lock(&state.shared)
        .consumers
        .retain(|c| !Arc::ptr_eq(c, &queue));
    let _ = control.join();
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queue_drops_oldest() {
        let q = Queue::new(3);
        for i in 0..5 {
            q.push(i.to_string().into());
        }
        q.close();
        let stop = AtomicBool::new(false);
        let got: Vec<String> = std::iter::from_fn(|| q.pop(&stop)).map(|s| s.to_string()).collect();
        assert_eq!(got, vec!["2", "3", "4"]);
    }

    #[test]
    fn busy_port() {
        let a = serve(DrillConfig::new(crate::DrillKind::Timing), ServeOptions::local(0)).unwrap();
        let port = a.local_addr().port();
        match serve(DrillConfig::new(crate::DrillKind::Timing), ServeOptions::local(port)) {
            Err(ServerError::PortBusy(p)) => assert_eq!(p, port),
            other => panic!("expected PortBusy, got {:?}", other.map(|h| h.local_addr())),
        }
        a.shutdown();
    }
}
