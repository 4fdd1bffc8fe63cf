//! Machine-readable JSON reports emitted by the subcommands.

use std::path::Path;

use anyhow::{Context, Result};
use distpab_core::attacks::AttackReport;
use serde::Serialize;

/// Report of one perturbation run.
#[derive(Debug, Serialize)]
pub struct PerturbReport {
    pub phi: f64,
    pub theta_radians: f64,
    pub theta_degrees: f64,
    pub reflection_axis: usize,
    pub sigma: f64,
    pub seed: u64,
    pub mode: String,
    pub partitions: usize,
    pub rows: usize,
    pub attributes: usize,
    pub dropped_columns: Vec<String>,
    pub params_digest: String,
    pub duration_ms: u128,
    pub output: String,
}

/// Per-node traffic entry in coordinator session reports.
#[derive(Debug, Clone, Serialize)]
pub struct NodeTrafficReport {
    pub node_id: u32,
    pub bytes_in: u64,
    pub bytes_out: u64,
}

/// Report of one coordinator session.
#[derive(Debug, Serialize)]
pub struct SessionReportJson {
    pub status: String,
    pub phi: Option<f64>,
    pub theta_radians: Option<f64>,
    pub reflection_axis: Option<usize>,
    pub workers_expected: usize,
    pub summaries_received: usize,
    pub per_node: Vec<NodeTrafficReport>,
    pub params_digest: Option<String>,
    pub duration_ms: u128,
}

/// Report of one worker run.
#[derive(Debug, Serialize)]
pub struct WorkerReportJson {
    pub node_id: u32,
    pub rows: usize,
    pub attributes: usize,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub params_digest: String,
    pub duration_ms: u128,
    pub output: String,
}

/// Attack evaluation in the published schema.
#[derive(Debug, Serialize)]
pub struct AttackReportJson {
    pub ni_min: f64,
    pub ica_min: f64,
    pub io_min: f64,
    pub per_attribute: PerAttribute,
    pub known_fraction: f64,
    pub seed: u64,
    pub ica_converged: bool,
}

#[derive(Debug, Serialize)]
pub struct PerAttribute {
    pub ni: Vec<f64>,
    pub ica: Vec<f64>,
    pub io: Vec<f64>,
}

impl From<&AttackReport> for AttackReportJson {
    fn from(r: &AttackReport) -> Self {
        Self {
            ni_min: r.ni_min,
            ica_min: r.ica_min,
            io_min: r.io_min,
            per_attribute: PerAttribute {
                ni: r.ni.clone(),
                ica: r.ica.clone(),
                io: r.io.clone(),
            },
            known_fraction: r.known_fraction,
            seed: r.seed,
            ica_converged: r.ica_converged,
        }
    }
}

/// Summary of a federated-learning run.
#[derive(Debug, Serialize)]
pub struct FedmlReport {
    pub clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub perturbed: bool,
    pub phi: Option<f64>,
    pub accuracy_federated: f64,
    pub accuracy_centralized: f64,
    pub accuracy_gap: f64,
    pub per_round: Vec<f64>,
    pub seed: u64,
    pub duration_ms: u128,
}

/// Prints a report to stdout and optionally writes it to `path`.
pub fn emit<T: Serialize>(report: &T, path: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(report)?;
    println!("{json}");
    if let Some(path) = path {
        std::fs::write(path, json.as_bytes())
            .with_context(|| format!("cannot write report to {}", path.display()))?;
    }
    Ok(())
}

pub fn digest_hex(digest: u64) -> String {
    format!("{digest:016x}")
}
