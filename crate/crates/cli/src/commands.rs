//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use distpab_core::fedml::{
    self, encode_labels, run_federation, split_train_test, train_centralized, FedConfig,
};
use distpab_core::{attacks, DataMatrix, ExpansionMode, PerturbConfig, ReflectionMode};

use crate::dataset::{read_csv, write_csv, Dataset};
use crate::net;
use crate::report::{
    digest_hex, emit, AttackReportJson, FedmlReport, NodeTrafficReport, PerturbReport,
    SessionReportJson, WorkerReportJson,
};
use crate::sim;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbMode {
    Central,
    Simulated,
}

pub struct PerturbArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    pub sigma: f64,
    pub seed: u64,
    pub mode: PerturbMode,
    pub partitions: usize,
    pub shuffle: bool,
    pub expansion: ExpansionMode,
    pub reflection: ReflectionMode,
    pub drop_constant: bool,
    pub label_col: String,
    pub report: Option<PathBuf>,
}

fn load_input(path: &Path, label_col: &str, drop_constant: bool) -> Result<(Dataset, Vec<String>)> {
    let dataset = read_csv(path, label_col)?;
    if drop_constant {
        let (kept, dropped) = dataset.drop_constant_columns()?;
        if kept.data.cols() < 2 {
            bail!("fewer than 2 non-constant feature columns remain");
        }
        Ok((kept, dropped))
    } else {
        let stds = distpab_core::stats::column_stds(dataset.data.features());
        if let Some(j) = stds
            .iter()
            .position(|&s| s < distpab_core::stats::STD_FLOOR)
        {
            bail!(
                "column '{}' is constant; rerun with --drop-constant to remove it",
                dataset.feature_names()[j]
            );
        }
        Ok((dataset, Vec::new()))
    }
}

pub fn cmd_perturb(args: &PerturbArgs) -> Result<()> {
    let start = Instant::now();
    let (dataset, dropped) = load_input(&args.input, &args.label_col, args.drop_constant)?;
    let cfg = PerturbConfig {
        sigma: args.sigma,
        seed: args.seed,
        node_id: 0,
        reflection_mode: args.reflection,
        expansion_mode: args.expansion,
        shuffle: args.shuffle,
    };

    let (perturbed, phi, theta, axis, digest, partitions) = match args.mode {
        PerturbMode::Central => {
            // Same steps as the one-shot centralized pipeline, kept explicit
            // so the search diagnostics are available for the report.
            if dataset.data.rows() < 2 {
                bail!("need at least 2 rows");
            }
            let summary = distpab_core::PartitionSummary::from_data(dataset.data.features())?;
            let params = distpab_core::coordinate(std::slice::from_ref(&summary), &cfg)?;
            let out = distpab_core::node_perturb(&dataset.data, &params, &cfg)?;
            let si = params.search.expect("local parameters carry search info");
            (out.data, si.phi, si.theta, si.axis, out.params_digest, 1)
        }
        PerturbMode::Simulated => {
            if args.partitions == 0 {
                bail!("--partitions must be at least 1");
            }
            let parts = dataset.data.split_contiguous(args.partitions)?;
            let outcome = sim::run_simulation(&parts, &cfg)?;
            let si = outcome
                .params
                .search
                .expect("coordinator parameters carry search info");
            let outputs: Vec<DataMatrix> = outcome.outputs.iter().map(|o| o.data.clone()).collect();
            let union = DataMatrix::concat(&outputs)?;
            let digest = outcome.outputs[0].params_digest;
            (union, si.phi, si.theta, si.axis, digest, args.partitions)
        }
    };

    write_csv(&args.output, &dataset.with_data(perturbed.clone()))?;

    let report = PerturbReport {
        phi,
        theta_radians: theta,
        theta_degrees: theta * 180.0 / std::f64::consts::PI,
        reflection_axis: axis,
        sigma: args.sigma,
        seed: args.seed,
        mode: match args.mode {
            PerturbMode::Central => "central".into(),
            PerturbMode::Simulated => "simulated".into(),
        },
        partitions,
        rows: perturbed.rows(),
        attributes: perturbed.cols(),
        dropped_columns: dropped,
        params_digest: digest_hex(digest),
        duration_ms: start.elapsed().as_millis(),
        output: args.output.display().to_string(),
    };
    emit(&report, args.report.as_deref())
}

pub struct CoordinatorArgs {
    pub listen: String,
    pub workers: usize,
    pub sigma: f64,
    pub seed: u64,
    pub reflection: ReflectionMode,
    pub timeout: Duration,
    pub report: Option<PathBuf>,
}

pub fn cmd_coordinator(args: &CoordinatorArgs) -> Result<()> {
    let cfg = PerturbConfig {
        sigma: args.sigma,
        seed: args.seed,
        reflection_mode: args.reflection,
        ..PerturbConfig::default()
    };
    let coordinator = net::Coordinator::bind(&args.listen, args.workers, cfg, args.timeout)?;
    eprintln!(
        "coordinator listening on {} for {} workers",
        coordinator.local_addr()?,
        args.workers
    );
    let outcome = coordinator.run()?;

    let search = outcome.params.as_ref().and_then(|p| p.search);
    let report = SessionReportJson {
        status: match &outcome.status {
            net::SessionStatus::Complete => "complete".into(),
            net::SessionStatus::Timeout => "timeout".into(),
            net::SessionStatus::Aborted(reason) => format!("aborted: {reason}"),
        },
        phi: search.map(|s| s.phi),
        theta_radians: search.map(|s| s.theta),
        reflection_axis: search.map(|s| s.axis),
        workers_expected: args.workers,
        summaries_received: outcome.summaries_received,
        per_node: outcome
            .traffic
            .iter()
            .map(|t| NodeTrafficReport {
                node_id: t.node_id,
                bytes_in: t.bytes_in,
                bytes_out: t.bytes_out,
            })
            .collect(),
        params_digest: outcome.params.as_ref().map(|p| digest_hex(p.digest())),
        duration_ms: outcome.duration.as_millis(),
    };
    emit(&report, args.report.as_deref())?;
    match outcome.status {
        net::SessionStatus::Complete => Ok(()),
        net::SessionStatus::Timeout => bail!(
            "session timed out with {}/{} summaries",
            outcome.summaries_received,
            args.workers
        ),
        net::SessionStatus::Aborted(reason) => bail!("session aborted: {reason}"),
    }
}

pub struct WorkerArgs {
    pub connect: String,
    pub input: PathBuf,
    pub output: PathBuf,
    pub node_id: u32,
    pub seed: u64,
    pub shuffle: bool,
    pub expansion: ExpansionMode,
    pub label_col: String,
    pub timeout: Duration,
    pub report: Option<PathBuf>,
}

pub fn cmd_worker(args: &WorkerArgs) -> Result<()> {
    let dataset = read_csv(&args.input, &args.label_col)?;
    let cfg = PerturbConfig {
        seed: args.seed,
        node_id: args.node_id,
        expansion_mode: args.expansion,
        shuffle: args.shuffle,
        ..PerturbConfig::default()
    };
    let outcome = net::run_worker(
        &args.connect,
        args.node_id,
        &dataset.data,
        &cfg,
        args.timeout,
    )?;
    write_csv(
        &args.output,
        &dataset.with_data(outcome.output.data.clone()),
    )?;
    let report = WorkerReportJson {
        node_id: args.node_id,
        rows: outcome.output.data.rows(),
        attributes: outcome.output.data.cols(),
        bytes_in: outcome.bytes_in,
        bytes_out: outcome.bytes_out,
        params_digest: digest_hex(outcome.output.params_digest),
        duration_ms: outcome.duration.as_millis(),
        output: args.output.display().to_string(),
    };
    emit(&report, args.report.as_deref())
}

pub struct EvaluateArgs {
    pub original: PathBuf,
    pub perturbed: PathBuf,
    pub known_fraction: f64,
    pub seed: u64,
    pub label_col: String,
    pub report: Option<PathBuf>,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let original = read_csv(&args.original, &args.label_col)?;
    let perturbed = read_csv(&args.perturbed, &args.label_col)?;
    let report = attacks::evaluate(
        &original.data,
        &perturbed.data,
        args.known_fraction,
        args.seed,
    )?;
    emit(&AttackReportJson::from(&report), args.report.as_deref())
}

pub struct FedmlArgs {
    pub input: PathBuf,
    pub clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub perturb: bool,
    pub sigma: f64,
    pub seed: u64,
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    pub hidden: Vec<usize>,
    pub split: f64,
    pub label_col: String,
    pub accuracy_csv: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

pub fn cmd_fedml(args: &FedmlArgs) -> Result<()> {
    let start = Instant::now();
    let dataset = read_csv(&args.input, &args.label_col)?;
    if dataset.data.labels().is_none() {
        bail!(
            "fedml needs a label column (looked for '{}')",
            args.label_col
        );
    }

    // Optionally perturb first (simulated distributed perturbation with one
    // partition per client), then learn on the perturbed data.
    let (working, phi) = if args.perturb {
        let cfg = PerturbConfig {
            sigma: args.sigma,
            seed: args.seed,
            ..PerturbConfig::default()
        };
        let parts = dataset.data.split_contiguous(args.clients)?;
        let outcome = sim::run_simulation(&parts, &cfg)?;
        let outputs: Vec<DataMatrix> = outcome.outputs.iter().map(|o| o.data.clone()).collect();
        let union = DataMatrix::concat(&outputs)?;
        (union, outcome.params.search.map(|s| s.phi))
    } else {
        (dataset.data.clone(), None)
    };

    let cfg = FedConfig {
        clients: args.clients,
        rounds: args.rounds,
        local_epochs: args.local_epochs,
        batch: args.batch,
        lr: args.lr,
        momentum: args.momentum,
        train_fraction: args.split,
        hidden: args.hidden.clone(),
        seed: args.seed,
    };
    cfg.validate()?;

    // Standardize features for training; attribute scales otherwise dominate
    // the gradients. Both the federated and centralized runs see the same
    // treatment, so the accuracy gap stays meaningful.
    let (normalized, _, _) = distpab_core::stats::zscore_normalize(working.features())?;
    let working = working.with_features(normalized)?;

    let (encoded, classes) = encode_labels(&working)?;
    let (train, test) = split_train_test(&encoded, cfg.train_fraction, cfg.seed)?;
    let partitions = train.split_contiguous(cfg.clients)?;
    let fed = run_federation(&partitions, &test, classes.len(), &cfg)?;
    let ctr = train_centralized(&train, &test, classes.len(), &cfg)?;

    let acc_fed = *fed.accuracy_per_round.last().unwrap();
    let acc_ctr = *ctr.accuracy_per_round.last().unwrap();

    if let Some(path) = &args.accuracy_csv {
        let mut body = String::from("round,accuracy\n");
        for (i, acc) in fed.accuracy_per_round.iter().enumerate() {
            body.push_str(&format!("{},{}\n", i + 1, acc));
        }
        std::fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))?;
    }

    let report = FedmlReport {
        clients: cfg.clients,
        rounds: cfg.rounds,
        local_epochs: cfg.local_epochs,
        perturbed: args.perturb,
        phi,
        accuracy_federated: acc_fed,
        accuracy_centralized: acc_ctr,
        accuracy_gap: (acc_fed - acc_ctr).abs(),
        per_round: fed.accuracy_per_round.clone(),
        seed: cfg.seed,
        duration_ms: start.elapsed().as_millis(),
    };
    emit(&report, args.report.as_deref())
}

/// Synthetic blob generator shared by the demo and tests.
pub fn make_blobs(rows: usize, attrs: usize, classes: usize, seed: u64) -> Result<DataMatrix> {
    Ok(fedml::synthetic_blobs(rows, attrs, classes, 6.0, seed)?)
}
