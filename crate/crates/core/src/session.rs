//! Coordinator and worker state machines for the two-phase exchange.
//!
//! Both machines are transport-free: callers feed decoded [`WireMessage`]s in
//! and send whatever frames come back out. The TCP driver and the in-process
//! simulation in the companion crate run exactly these machines, so their
//! behavior cannot drift apart.
//!
//! Phase 1 is a barrier: the coordinator holds the PARAMS broadcast until all
//! `k` expected workers have delivered summaries with distinct node ids and a
//! consistent attribute count. Summaries are merged in ascending node-id
//! order, so the outcome does not depend on arrival order.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::perturb::{coordinate, GlobalParams, PerturbConfig};
use crate::stats::PartitionSummary;
use crate::wire::{self, MsgType, WireMessage};

/// What the coordinator wants done after consuming a message.
#[derive(Debug, Clone, PartialEq)]
pub enum CoordinatorTurn {
    /// Nothing to send; keep waiting.
    Pending,
    /// Barrier complete: send this PARAMS frame to every worker.
    Broadcast(WireMessage),
    /// Send this ERROR to the offending connection only.
    Reject(WireMessage),
    /// Fatal: send this ERROR to every worker and abort the session.
    Abort(WireMessage),
    /// Final DONE received; the session is complete.
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Collecting,
    AwaitingDone,
    Complete,
    Aborted,
}

/// Central-entity session: collects Phase-1 summaries, runs the parameter
/// search at the barrier, and tracks Phase-2 completion.
///
/// `conn` is an opaque connection token supplied by the transport driver; it
/// lets the barrier attribute SUMMARY and DONE frames to one peer without
/// trusting frame contents twice.
pub struct CoordinatorSession {
    expected: usize,
    cfg: PerturbConfig,
    summaries: Vec<(u32, PartitionSummary)>,
    conn_nodes: Vec<(usize, u32)>,
    done_nodes: Vec<u32>,
    phase: Phase,
    params: Option<GlobalParams>,
    abort_reason: Option<String>,
}

impl CoordinatorSession {
    pub fn new(expected_workers: usize, cfg: PerturbConfig) -> Result<Self> {
        if expected_workers == 0 {
            return Err(Error::InvalidConfig(String::from(
                "coordinator needs at least one worker",
            )));
        }
        cfg.validate()?;
        Ok(Self {
            expected: expected_workers,
            cfg,
            summaries: Vec::new(),
            conn_nodes: Vec::new(),
            done_nodes: Vec::new(),
            phase: Phase::Collecting,
            params: None,
            abort_reason: None,
        })
    }

    /// Consumes one frame from worker connection `conn`.
    pub fn on_message(&mut self, conn: usize, msg: &WireMessage) -> Result<CoordinatorTurn> {
        match (self.phase, msg.msg_type) {
            (Phase::Collecting, MsgType::Hello) => {
                wire::decode_hello(&msg.payload)?;
                Ok(CoordinatorTurn::Pending)
            }
            (Phase::Collecting, MsgType::Summary) => self.on_summary(conn, msg),
            (Phase::AwaitingDone, MsgType::Done) => {
                let node = self
                    .conn_nodes
                    .iter()
                    .find(|(c, _)| *c == conn)
                    .map(|(_, n)| *n)
                    .ok_or(Error::ProtocolState {
                        got: "DONE",
                        expected: "a SUMMARY from this connection first",
                    })?;
                if self.done_nodes.contains(&node) {
                    return Err(Error::ProtocolState {
                        got: "DONE",
                        expected: "one DONE per worker",
                    });
                }
                self.done_nodes.push(node);
                if self.done_nodes.len() == self.expected {
                    self.phase = Phase::Complete;
                    Ok(CoordinatorTurn::Complete)
                } else {
                    Ok(CoordinatorTurn::Pending)
                }
            }
            (_, MsgType::Error) => {
                let reason = wire::decode_error(&msg.payload);
                self.abort_reason = Some(reason.clone());
                self.phase = Phase::Aborted;
                Ok(CoordinatorTurn::Abort(wire::encode_error(&format!(
                    "worker reported: {reason}"
                ))))
            }
            (phase, other) => Err(Error::ProtocolState {
                got: other.name(),
                expected: match phase {
                    Phase::Collecting => "collecting summaries",
                    Phase::AwaitingDone => "awaiting DONE",
                    Phase::Complete => "session complete",
                    Phase::Aborted => "session aborted",
                },
            }),
        }
    }

    fn on_summary(&mut self, conn: usize, msg: &WireMessage) -> Result<CoordinatorTurn> {
        let (node_id, summary) = wire::decode_summary(&msg.payload)?;
        if self.summaries.iter().any(|(id, _)| *id == node_id) {
            return Ok(CoordinatorTurn::Reject(wire::encode_error(&format!(
                "duplicate node id {node_id}"
            ))));
        }
        if let Some((_, first)) = self.summaries.first() {
            if first.attr_count() != summary.attr_count() {
                let reason = format!(
                    "inconsistent attribute count: session has {}, node {node_id} sent {}",
                    first.attr_count(),
                    summary.attr_count()
                );
                self.abort_reason = Some(reason.clone());
                self.phase = Phase::Aborted;
                return Ok(CoordinatorTurn::Abort(wire::encode_error(&reason)));
            }
        }
        self.summaries.push((node_id, summary));
        self.conn_nodes.push((conn, node_id));
        if self.summaries.len() < self.expected {
            return Ok(CoordinatorTurn::Pending);
        }
        // Barrier reached: merge in node-id order for arrival-order
        // independence, search, broadcast.
        self.summaries.sort_by_key(|(id, _)| *id);
        let ordered: Vec<PartitionSummary> =
            self.summaries.iter().map(|(_, s)| s.clone()).collect();
        match coordinate(&ordered, &self.cfg) {
            Ok(params) => {
                let frame = wire::encode_params(&params);
                self.params = Some(params);
                self.phase = Phase::AwaitingDone;
                Ok(CoordinatorTurn::Broadcast(frame))
            }
            Err(e) => {
                let reason = format!("parameter generation failed: {e}");
                self.abort_reason = Some(reason.clone());
                self.phase = Phase::Aborted;
                Ok(CoordinatorTurn::Abort(wire::encode_error(&reason)))
            }
        }
    }

    /// Global parameters, available once the barrier has been passed.
    pub fn params(&self) -> Option<&GlobalParams> {
        self.params.as_ref()
    }

    pub fn is_complete(&self) -> bool {
        self.phase == Phase::Complete
    }

    pub fn is_aborted(&self) -> bool {
        self.phase == Phase::Aborted
    }

    pub fn abort_reason(&self) -> Option<&str> {
        self.abort_reason.as_deref()
    }

    /// Node ids of the summaries received so far (sorted after the barrier).
    pub fn node_ids(&self) -> Vec<u32> {
        self.summaries.iter().map(|(id, _)| *id).collect()
    }

    pub fn summaries_received(&self) -> usize {
        self.summaries.len()
    }

    pub fn done_received(&self) -> usize {
        self.done_nodes.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WorkerPhase {
    Greet,
    Introduced,
    AwaitingParams,
    Perturbing,
    Finished,
}

/// Distributed-entity session: introduces itself, ships its summary, waits
/// for the global parameters, and acknowledges completion.
pub struct WorkerSession {
    node_id: u32,
    phase: WorkerPhase,
}

impl WorkerSession {
    pub fn new(node_id: u32) -> Self {
        Self {
            node_id,
            phase: WorkerPhase::Greet,
        }
    }

    /// First frame to send.
    pub fn hello(&mut self) -> Result<WireMessage> {
        if self.phase != WorkerPhase::Greet {
            return Err(Error::ProtocolState {
                got: "HELLO",
                expected: "already introduced",
            });
        }
        self.phase = WorkerPhase::Introduced;
        Ok(wire::encode_hello(self.node_id))
    }

    /// Second frame to send: the Phase-1 summary.
    pub fn summary(&mut self, summary: &PartitionSummary) -> Result<WireMessage> {
        if self.phase != WorkerPhase::Introduced {
            return Err(Error::ProtocolState {
                got: "SUMMARY",
                expected: "HELLO first",
            });
        }
        summary.validate()?;
        self.phase = WorkerPhase::AwaitingParams;
        Ok(wire::encode_summary(self.node_id, summary))
    }

    /// Consumes a frame from the coordinator. Returns the decoded global
    /// parameters when PARAMS arrives in the right state; a relayed
    /// coordinator ERROR or any out-of-order message is an error.
    pub fn on_message(&mut self, msg: &WireMessage) -> Result<GlobalParams> {
        match msg.msg_type {
            MsgType::Params if self.phase == WorkerPhase::AwaitingParams => {
                let params = wire::decode_params(&msg.payload)?;
                self.phase = WorkerPhase::Perturbing;
                Ok(params)
            }
            MsgType::Error => {
                self.phase = WorkerPhase::Finished;
                Err(Error::Remote(wire::decode_error(&msg.payload)))
            }
            other => Err(Error::ProtocolState {
                got: other.name(),
                expected: match self.phase {
                    WorkerPhase::Greet => "HELLO not sent yet",
                    WorkerPhase::Introduced => "summary not sent yet",
                    WorkerPhase::AwaitingParams => "awaiting PARAMS",
                    WorkerPhase::Perturbing => "perturbation in progress",
                    WorkerPhase::Finished => "session finished",
                },
            }),
        }
    }

    /// Final frame to send after local perturbation succeeded.
    pub fn done(&mut self) -> Result<WireMessage> {
        if self.phase != WorkerPhase::Perturbing {
            return Err(Error::ProtocolState {
                got: "DONE",
                expected: "PARAMS not processed yet",
            });
        }
        self.phase = WorkerPhase::Finished;
        Ok(wire::encode_done())
    }

    pub fn node_id(&self) -> u32 {
        self.node_id
    }
}
