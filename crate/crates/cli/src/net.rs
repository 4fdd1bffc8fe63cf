//! TCP transport for the coordinator/worker protocol.
//!
//! Drives the same state machines as the in-process simulation over real
//! sockets. The coordinator accepts connections until the expected number of
//! distinct workers completes both phases or the session deadline passes;
//! per-connection read loops run on threads and serialize their session
//! access through a mutex (the barrier is the only shared state).

use std::io::{ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use distpab_core::session::{CoordinatorSession, CoordinatorTurn, WorkerSession};
use distpab_core::wire::{self, WireMessage, HEADER_LEN};
use distpab_core::{
    node_perturb, DataMatrix, Error as CoreError, GlobalParams, PartitionSummary, PerturbConfig,
    PerturbOutput,
};

const POLL: Duration = Duration::from_millis(50);

/// Per-node traffic observed by the coordinator.
#[derive(Debug, Clone, Copy)]
pub struct NodeTraffic {
    pub node_id: u32,
    pub bytes_in: u64,
    pub bytes_out: u64,
}

/// Why a coordinator session ended.
#[derive(Debug, Clone, PartialEq)]
pub enum SessionStatus {
    Complete,
    Timeout,
    Aborted(String),
}

/// Result of one coordinator session.
#[derive(Debug)]
pub struct CoordinatorOutcome {
    pub status: SessionStatus,
    pub params: Option<GlobalParams>,
    pub traffic: Vec<NodeTraffic>,
    pub summaries_received: usize,
    pub duration: Duration,
}

/// Result of one worker run.
#[derive(Debug)]
pub struct WorkerOutcome {
    pub output: PerturbOutput,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub duration: Duration,
}

fn write_frame(stream: &mut TcpStream, msg: &WireMessage) -> std::io::Result<u64> {
    let bytes = wire::encode(msg);
    stream.write_all(&bytes)?;
    stream.flush()?;
    Ok(bytes.len() as u64)
}

/// Reads exactly `buf.len()` bytes, polling so the deadline and stop flag
/// stay responsive.
fn read_exact_deadline(
    stream: &mut TcpStream,
    buf: &mut [u8],
    deadline: Instant,
    stop: Option<&AtomicBool>,
) -> Result<()> {
    let mut filled = 0usize;
    while filled < buf.len() {
        if Instant::now() > deadline {
            bail!("timed out waiting for peer");
        }
        if stop.map(|s| s.load(Ordering::Relaxed)).unwrap_or(false) {
            bail!("session closed");
        }
        match stream.read(&mut buf[filled..]) {
            Ok(0) => bail!("connection closed by peer"),
            Ok(k) => filled += k,
            Err(e) if e.kind() == ErrorKind::WouldBlock || e.kind() == ErrorKind::TimedOut => {}
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e).context("socket read failed"),
        }
    }
    Ok(())
}

fn read_frame(
    stream: &mut TcpStream,
    deadline: Instant,
    stop: Option<&AtomicBool>,
) -> Result<(WireMessage, u64)> {
    let mut header = [0u8; HEADER_LEN];
    read_exact_deadline(stream, &mut header, deadline, stop)?;
    let (msg_type, len) = wire::decode_header(&header)?;
    let mut payload = vec![0u8; len as usize];
    read_exact_deadline(stream, &mut payload, deadline, stop)?;
    Ok((
        WireMessage::new(msg_type, payload),
        (HEADER_LEN + len as usize) as u64,
    ))
}

struct Conn {
    node_id: Option<u32>,
    stream: TcpStream,
    bytes_in: u64,
    bytes_out: u64,
}

enum Event {
    Complete,
    Abort(String),
}

/// A bound coordinator, ready to run. Binding is split from running so
/// callers can learn the actual port when listening on port 0.
pub struct Coordinator {
    listener: TcpListener,
    expected: usize,
    cfg: PerturbConfig,
    timeout: Duration,
}

impl Coordinator {
    pub fn bind(
        listen: &str,
        expected_workers: usize,
        cfg: PerturbConfig,
        timeout: Duration,
    ) -> Result<Self> {
        if expected_workers == 0 {
            bail!("coordinator needs at least one worker");
        }
        let listener =
            TcpListener::bind(listen).with_context(|| format!("cannot listen on {listen}"))?;
        listener.set_nonblocking(true)?;
        Ok(Self {
            listener,
            expected: expected_workers,
            cfg,
            timeout,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Runs the session to completion, abort, or timeout.
    pub fn run(self) -> Result<CoordinatorOutcome> {
        let start = Instant::now();
        let deadline = start + self.timeout;
        let session = Arc::new(Mutex::new(CoordinatorSession::new(
            self.expected,
            self.cfg.clone(),
        )?));
        let conns: Arc<Mutex<Vec<Arc<Mutex<Conn>>>>> = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let (events_tx, events_rx) = channel::<Event>();

        let accept_stop = stop.clone();
        let accept_conns = conns.clone();
        let accept_session = session.clone();
        let accept_tx = events_tx.clone();
        let listener = self.listener;
        let accepter = thread::spawn(move || {
            let mut handlers = Vec::new();
            let mut next_conn_id = 0usize;
            loop {
                if accept_stop.load(Ordering::Relaxed) {
                    break;
                }
                match listener.accept() {
                    Ok((stream, _)) => {
                        let _ = stream.set_read_timeout(Some(POLL));
                        let _ = stream.set_nodelay(true);
                        let conn = Arc::new(Mutex::new(Conn {
                            node_id: None,
                            stream: stream.try_clone().expect("clone stream"),
                            bytes_in: 0,
                            bytes_out: 0,
                        }));
                        accept_conns.lock().unwrap().push(conn.clone());
                        let h_session = accept_session.clone();
                        let h_conns = accept_conns.clone();
                        let h_stop = accept_stop.clone();
                        let h_tx = accept_tx.clone();
                        let conn_id = next_conn_id;
                        next_conn_id += 1;
                        handlers.push(thread::spawn(move || {
                            connection_loop(
                                conn_id, stream, conn, h_session, h_conns, h_stop, h_tx, deadline,
                            );
                        }));
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => {
                        thread::sleep(POLL);
                    }
                    Err(_) => break,
                }
            }
            for h in handlers {
                let _ = h.join();
            }
        });

        // Wait for completion, abort, or the deadline.
        let status = match events_rx.recv_timeout(self.timeout) {
            Ok(Event::Complete) => SessionStatus::Complete,
            Ok(Event::Abort(reason)) => SessionStatus::Aborted(reason),
            Err(RecvTimeoutError::Timeout) => SessionStatus::Timeout,
            Err(RecvTimeoutError::Disconnected) => {
                SessionStatus::Aborted("coordinator internal failure".into())
            }
        };
        stop.store(true, Ordering::Relaxed);
        let _ = accepter.join();

        let session = session.lock().unwrap();
        let traffic = conns
            .lock()
            .unwrap()
            .iter()
            .filter_map(|c| {
                let c = c.lock().unwrap();
                c.node_id.map(|node_id| NodeTraffic {
                    node_id,
                    bytes_in: c.bytes_out, // into the node
                    bytes_out: c.bytes_in, // out of the node
                })
            })
            .collect();
        Ok(CoordinatorOutcome {
            status,
            params: session.params().cloned(),
            traffic,
            summaries_received: session.summaries_received(),
            duration: start.elapsed(),
        })
    }
}

fn connection_loop(
    conn_id: usize,
    mut stream: TcpStream,
    conn: Arc<Mutex<Conn>>,
    session: Arc<Mutex<CoordinatorSession>>,
    conns: Arc<Mutex<Vec<Arc<Mutex<Conn>>>>>,
    stop: Arc<AtomicBool>,
    events: Sender<Event>,
    deadline: Instant,
) {
    loop {
        if stop.load(Ordering::Relaxed) {
            return;
        }
        let (msg, nread) = match read_frame(&mut stream, deadline, Some(&stop)) {
            Ok(v) => v,
            Err(_) => return,
        };
        {
            let mut c = conn.lock().unwrap();
            c.bytes_in += nread;
            if c.node_id.is_none() && msg.msg_type == wire::MsgType::Hello {
                c.node_id = wire::decode_hello(&msg.payload).ok();
            }
        }
        // Take the turn under the session lock, then act on sockets.
        let turn = {
            let mut s = session.lock().unwrap();
            s.on_message(conn_id, &msg)
        };
        match turn {
            Ok(CoordinatorTurn::Pending) => {}
            Ok(CoordinatorTurn::Broadcast(frame)) => {
                broadcast(&conns, &frame);
            }
            Ok(CoordinatorTurn::Reject(frame)) => {
                let mut c = conn.lock().unwrap();
                if let Ok(n) = write_frame(&mut c.stream, &frame) {
                    c.bytes_out += n;
                }
                return;
            }
            Ok(CoordinatorTurn::Abort(frame)) => {
                broadcast(&conns, &frame);
                let reason = wire::decode_error(&frame.payload);
                stop.store(true, Ordering::Relaxed);
                let _ = events.send(Event::Abort(reason));
                return;
            }
            Ok(CoordinatorTurn::Complete) => {
                let _ = events.send(Event::Complete);
                return;
            }
            Err(_) => {
                let frame = wire::encode_error("protocol violation");
                let mut c = conn.lock().unwrap();
                let _ = write_frame(&mut c.stream, &frame);
                return;
            }
        }
    }
}

fn broadcast(conns: &Arc<Mutex<Vec<Arc<Mutex<Conn>>>>>, frame: &WireMessage) {
    let list = conns.lock().unwrap().clone();
    for conn in list {
        let mut c = conn.lock().unwrap();
        if c.node_id.is_some() {
            if let Ok(n) = write_frame(&mut c.stream, frame) {
                c.bytes_out += n;
            }
        }
    }
}

/// Connects to a coordinator, completes both phases, and returns the locally
/// perturbed partition. Nothing is written anywhere on failure.
pub fn run_worker(
    connect: &str,
    node_id: u32,
    partition: &DataMatrix,
    cfg: &PerturbConfig,
    timeout: Duration,
) -> Result<WorkerOutcome> {
    let start = Instant::now();
    let deadline = start + timeout;
    let mut stream = TcpStream::connect(connect)
        .with_context(|| format!("cannot connect to coordinator at {connect}"))?;
    stream.set_read_timeout(Some(POLL))?;
    stream.set_nodelay(true)?;

    let summary = PartitionSummary::from_data(partition.features())?;
    let mut session = WorkerSession::new(node_id);
    let mut bytes_out = 0u64;
    let mut bytes_in = 0u64;

    bytes_out += write_frame(&mut stream, &session.hello()?)?;
    bytes_out += write_frame(&mut stream, &session.summary(&summary)?)?;

    let (msg, nread) = read_frame(&mut stream, deadline, None)?;
    bytes_in += nread;
    let params = session.on_message(&msg).map_err(|e| match e {
        CoreError::Remote(reason) => anyhow!("coordinator error: {reason}"),
        other => anyhow!(other),
    })?;

    let node_cfg = PerturbConfig {
        node_id,
        ..cfg.clone()
    };
    let output = node_perturb(partition, &params, &node_cfg)?;
    bytes_out += write_frame(&mut stream, &session.done()?)?;

    Ok(WorkerOutcome {
        output,
        bytes_in,
        bytes_out,
        duration: start.elapsed(),
    })
}
