//! In-process simulation of the two-phase protocol.
//!
//! Runs the exact coordinator/worker state machines from `distpab-core`
//! over in-memory byte queues: every message is encoded to a wire frame,
//! queued, and decoded on the other side, so the simulation exercises the
//! same code and the same bytes as the TCP driver. All transferred frames
//! are captured for traffic inspection.

use std::collections::VecDeque;

use anyhow::{anyhow, bail, Result};
use distpab_core::session::{CoordinatorSession, CoordinatorTurn, WorkerSession};
use distpab_core::wire;
use distpab_core::{
    node_perturb, DataMatrix, GlobalParams, PartitionSummary, PerturbConfig, PerturbOutput,
};

/// Which way a captured frame travelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToCoordinator,
    ToWorker,
}

/// One captured frame: node id, direction, raw bytes.
#[derive(Debug, Clone)]
pub struct CapturedFrame {
    pub node_id: u32,
    pub direction: Direction,
    pub bytes: Vec<u8>,
}

/// Per-node traffic totals.
#[derive(Debug, Clone, Copy)]
pub struct NodeTraffic {
    pub node_id: u32,
    pub bytes_in: u64,
    pub bytes_out: u64,
}

/// Outcome of a simulated session.
#[derive(Debug)]
pub struct SimOutcome {
    /// Coordinator-side parameters (search diagnostics included).
    pub params: GlobalParams,
    /// Per-partition perturbed outputs, in partition order.
    pub outputs: Vec<PerturbOutput>,
    pub frames: Vec<CapturedFrame>,
    pub traffic: Vec<NodeTraffic>,
}

/// In-memory byte channel with traffic capture.
struct Channel<'a> {
    queue: VecDeque<Vec<u8>>,
    node_id: u32,
    direction: Direction,
    log: &'a mut Vec<CapturedFrame>,
}

impl<'a> Channel<'a> {
    fn send(&mut self, msg: &wire::WireMessage) {
        let bytes = wire::encode(msg);
        self.log.push(CapturedFrame {
            node_id: self.node_id,
            direction: self.direction,
            bytes: bytes.clone(),
        });
        self.queue.push_back(bytes);
    }

    fn recv(&mut self) -> Result<wire::WireMessage> {
        let bytes = self
            .queue
            .pop_front()
            .ok_or_else(|| anyhow!("channel empty"))?;
        Ok(wire::decode(&bytes)?)
    }
}

/// Runs one full session over `partitions.len()` simulated workers with node
/// ids `0..k`, returning outputs in partition order.
pub fn run_simulation(partitions: &[DataMatrix], cfg: &PerturbConfig) -> Result<SimOutcome> {
    let k = partitions.len();
    if k == 0 {
        bail!("simulation needs at least one partition");
    }
    let mut frames = Vec::new();
    let mut coordinator = CoordinatorSession::new(k, cfg.clone())?;
    let mut workers = Vec::with_capacity(k);
    let mut params_frame: Option<wire::WireMessage> = None;

    // Phase 1: every worker introduces itself and ships its summary.
    for (i, partition) in partitions.iter().enumerate() {
        let node_id = i as u32;
        let mut worker = WorkerSession::new(node_id);
        let mut uplink = Channel {
            queue: VecDeque::new(),
            node_id,
            direction: Direction::ToCoordinator,
            log: &mut frames,
        };
        let summary = PartitionSummary::from_data(partition.features())?;
        uplink.send(&worker.hello()?);
        uplink.send(&worker.summary(&summary)?);
        while let Ok(msg) = uplink.recv() {
            match coordinator.on_message(i, &msg)? {
                CoordinatorTurn::Pending => {}
                CoordinatorTurn::Broadcast(frame) => params_frame = Some(frame),
                CoordinatorTurn::Reject(frame) | CoordinatorTurn::Abort(frame) => {
                    bail!("coordinator error: {}", wire::decode_error(&frame.payload));
                }
                CoordinatorTurn::Complete => bail!("premature completion"),
            }
        }
        workers.push(worker);
    }
    let params_frame = params_frame.ok_or_else(|| anyhow!("barrier never produced parameters"))?;

    // Phase 2: broadcast, perturb locally, collect DONEs.
    let mut outputs = Vec::with_capacity(k);
    for (i, worker) in workers.iter_mut().enumerate() {
        let node_id = i as u32;
        let mut downlink = Channel {
            queue: VecDeque::new(),
            node_id,
            direction: Direction::ToWorker,
            log: &mut frames,
        };
        downlink.send(&params_frame);
        let params = worker.on_message(&downlink.recv()?)?;
        let node_cfg = PerturbConfig {
            node_id,
            ..cfg.clone()
        };
        outputs.push(node_perturb(&partitions[i], &params, &node_cfg)?);

        let mut uplink = Channel {
            queue: VecDeque::new(),
            node_id,
            direction: Direction::ToCoordinator,
            log: &mut frames,
        };
        uplink.send(&worker.done()?);
        let done = uplink.recv()?;
        let turn = coordinator.on_message(i, &done)?;
        let last = i == k - 1;
        match (last, turn) {
            (false, CoordinatorTurn::Pending) | (true, CoordinatorTurn::Complete) => {}
            (_, other) => bail!("unexpected coordinator turn {other:?}"),
        }
    }

    let params = coordinator
        .params()
        .cloned()
        .ok_or_else(|| anyhow!("coordinator finished without parameters"))?;

    let mut traffic = Vec::with_capacity(k);
    for i in 0..k {
        let node_id = i as u32;
        let mut t = NodeTraffic {
            node_id,
            bytes_in: 0,
            bytes_out: 0,
        };
        for f in frames.iter().filter(|f| f.node_id == node_id) {
            match f.direction {
                Direction::ToCoordinator => t.bytes_out += f.bytes.len() as u64,
                Direction::ToWorker => t.bytes_in += f.bytes.len() as u64,
            }
        }
        traffic.push(t);
    }

    Ok(SimOutcome {
        params,
        outputs,
        frames,
        traffic,
    })
}
