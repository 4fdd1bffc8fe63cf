//! Desk-scale horizontal federated learning: a small fully connected
//! classifier trained with minibatch SGD + momentum, sample-count-weighted
//! parameter averaging, and a k-NN utility probe.
//!
//! Everything is seeded: model init, batch order (per client, round, and
//! epoch), and the train/test split, so federated and centralized runs are
//! exactly comparable. Momentum state lives inside one local-training call
//! and is not carried across federation rounds.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{normal, salted_stream, shuffle, stream, Purpose};

/// Features plus integer class ids in `0..classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub x: Matrix,
    pub y: Vec<usize>,
}

impl LabeledData {
    pub fn new(x: Matrix, y: Vec<usize>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                op: "labeled_data",
                left_rows: x.rows(),
                left_cols: x.cols(),
                right_rows: y.len(),
                right_cols: 1,
            });
        }
        Ok(Self { x, y })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    /// Contiguous near-equal split, mirroring the perturbation partitioner.
    pub fn split_contiguous(&self, k: usize) -> Result<Vec<LabeledData>> {
        if k == 0 || k > self.rows() {
            return Err(Error::InvalidConfig(alloc::format!(
                "cannot split {} rows into {k} clients",
                self.rows()
            )));
        }
        let m = self.rows();
        let base = m / k;
        let extra = m % k;
        let mut out = Vec::with_capacity(k);
        let mut start = 0;
        for p in 0..k {
            let len = base + usize::from(p < extra);
            let mut data = Vec::with_capacity(len * self.x.cols());
            for i in start..start + len {
                data.extend_from_slice(self.x.row(i));
            }
            out.push(LabeledData {
                x: Matrix::from_vec(len, self.x.cols(), data)?,
                y: self.y[start..start + len].to_vec(),
            });
            start += len;
        }
        Ok(out)
    }
}

/// Maps a labeled dataset onto integer class ids (sorted label order) for
/// training. Returns the converted data and the class names in id order.
pub fn encode_labels(data: &DataMatrix) -> Result<(LabeledData, Vec<String>)> {
    let labels = data
        .labels()
        .ok_or_else(|| Error::InvalidConfig(String::from("dataset has no class labels")))?;
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let y = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    Ok((
        LabeledData {
            x: data.features().clone(),
            y,
        },
        classes,
    ))
}

/// Seeded train/test split by row permutation.
pub fn split_train_test(
    data: &LabeledData,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledData, LabeledData)> {
    if !(0.0..1.0).contains(&train_fraction) || train_fraction == 0.0 {
        return Err(Error::InvalidConfig(alloc::format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let m = data.rows();
    let train_rows = libm::round(train_fraction * m as f64) as usize;
    let train_rows = train_rows.clamp(1, m - 1);
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = salted_stream(seed, 0, Purpose::Training, 0x5b11);
    shuffle(&mut rng, &mut order);
    let pick = |idx: &[usize]| -> LabeledData {
        let mut rows = Vec::with_capacity(idx.len() * data.x.cols());
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            rows.extend_from_slice(data.x.row(i));
            y.push(data.y[i]);
        }
        LabeledData {
            x: Matrix::from_vec(idx.len(), data.x.cols(), rows).expect("split shape"),
            y,
        }
    };
    Ok((pick(&order[..train_rows]), pick(&order[train_rows..])))
}

/// Federation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FedConfig {
    pub clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub momentum: f64,
    pub train_fraction: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for FedConfig {
    fn default() -> Self {
        Self {
            clients: 4,
            rounds: 20,
            local_epochs: 3,
            batch: 64,
            lr: 1e-4,
            momentum: 0.5,
            train_fraction: 0.75,
            hidden: vec![16, 16],
            seed: 0,
        }
    }
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clients == 0
            || self.rounds == 0
            || self.local_epochs == 0
            || self.batch == 0
            || self.hidden.is_empty()
            || self.hidden.contains(&0)
        {
            return Err(Error::InvalidConfig(String::from(
                "clients, rounds, epochs, batch, and hidden sizes must be positive",
            )));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(String::from(
                "learning rate must be positive and momentum in [0, 1)",
            )));
        }
        Ok(())
    }
}

/// Fully connected classifier: relu hidden layers, softmax output.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// Layer widths, input first, classes last.
    dims: Vec<usize>,
    /// Per layer: `fan_in x fan_out` weights.
    weights: Vec<Matrix>,
    /// Per layer: `fan_out` biases.
    biases: Vec<Vec<f64>>,
}

/// Parameter-shaped gradient bundle.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl ModelState {
    /// Seeded Xavier-uniform initialization.
    pub fn init<R: Rng + ?Sized>(
        inputs: usize,
        hidden: &[usize],
        classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if inputs == 0 || classes < 2 || hidden.contains(&0) {
            return Err(Error::InvalidConfig(String::from(
                "model needs inputs, at least two classes, and nonzero hidden sizes",
            )));
        }
        let mut dims = vec![inputs];
        dims.extend_from_slice(hidden);
        dims.push(classes);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| (crate::rng::open_unit(rng) * 2.0 - 1.0) * limit)
                .collect();
            weights.push(Matrix::from_vec(fan_in, fan_out, data)?);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            dims,
            weights,
            biases,
        })
    }

    #[inline]
    pub fn classes(&self) -> usize {
        *self.dims.last().unwrap()
    }

    #[inline]
    pub fn inputs(&self) -> usize {
        self.dims[0]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn same_architecture(&self, other: &ModelState) -> bool {
        self.dims == other.dims
    }

    /// Forward pass for one batch; returns per-layer activations (first entry
    /// is the input) with softmax probabilities last.
    fn forward(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        let mut activations = Vec::with_capacity(self.dims.len());
        activations.push(x.clone());
        for (l, w) in self.weights.iter().enumerate() {
            let mut z = activations[l].matmul(w)?;
            let cols = z.cols();
            let slice = z.as_mut_slice();
            for r in 0..x.rows() {
                for c in 0..cols {
                    slice[r * cols + c] += self.biases[l][c];
                }
            }
            let last = l == self.weights.len() - 1;
            if last {
                softmax_rows(&mut z);
            } else {
                for v in z.as_mut_slice() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            activations.push(z);
        }
        Ok(activations)
    }

    /// Mean cross-entropy loss and parameter gradients for one batch.
    pub fn loss_and_grads(&self, x: &Matrix, y: &[usize]) -> Result<(f64, Gradients)> {
        let b = x.rows();
        if y.len() != b || b == 0 {
            return Err(Error::DimensionMismatch {
                op: "loss_and_grads",
                left_rows: b,
                left_cols: x.cols(),
                right_rows: y.len(),
                right_cols: 1,
            });
        }
        let classes = self.classes();
        if let Some(&bad) = y.iter().find(|&&label| label >= classes) {
            return Err(Error::LabelRange {
                label: bad,
                classes,
            });
        }
        let activations = self.forward(x)?;
        let probs = activations.last().unwrap();
        let mut loss = 0.0;
        for (i, &label) in y.iter().enumerate() {
            loss -= libm::log(probs.get(i, label).max(1e-300));
        }
        loss /= b as f64;

        // Output delta: (softmax - onehot) / batch.
        let mut delta = probs.clone();
        {
            let cols = delta.cols();
            let slice = delta.as_mut_slice();
            for (i, &label) in y.iter().enumerate() {
                slice[i * cols + label] -= 1.0;
            }
            for v in slice.iter_mut() {
                *v /= b as f64;
            }
        }

        let layers = self.weights.len();
        let mut grad_w: Vec<Option<Matrix>> = vec![None; layers];
        let mut grad_b: Vec<Option<Vec<f64>>> = vec![None; layers];
        for l in (0..layers).rev() {
            grad_w[l] = Some(activations[l].transpose().matmul(&delta)?);
            let mut gb = vec![0.0; self.dims[l + 1]];
            for i in 0..b {
                for (c, g) in gb.iter_mut().enumerate() {
                    *g += delta.get(i, c);
                }
            }
            grad_b[l] = Some(gb);
            if l > 0 {
                let mut back = delta.matmul(&self.weights[l].transpose())?;
                // Relu derivative gates on the forward activation.
                let act = &activations[l];
                let cols = back.cols();
                let slice = back.as_mut_slice();
                for i in 0..b {
                    for c in 0..cols {
                        if act.get(i, c) <= 0.0 {
                            slice[i * cols + c] = 0.0;
                        }
                    }
                }
                delta = back;
            }
        }
        Ok((
            loss,
            Gradients {
                weights: grad_w.into_iter().map(Option::unwrap).collect(),
                biases: grad_b.into_iter().map(Option::unwrap).collect(),
            },
        ))
    }

    /// Predicted class per row (argmax; ties break to the smaller id).
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let activations = self.forward(x)?;
        let probs = activations.last().unwrap();
        let mut out = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            let mut best = 0;
            for c in 1..self.classes() {
                if probs.get(i, c) > probs.get(i, best) {
                    best = c;
                }
            }
            out.push(best);
        }
        Ok(out)
    }

    pub fn accuracy(&self, data: &LabeledData) -> Result<f64> {
        let predicted = self.predict(&data.x)?;
        let hits = predicted
            .iter()
            .zip(&data.y)
            .filter(|(p, t)| p == t)
            .count();
        Ok(hits as f64 / data.rows() as f64)
    }
}

fn softmax_rows(z: &mut Matrix) {
    let cols = z.cols();
    let rows = z.rows();
    let slice = z.as_mut_slice();
    for r in 0..rows {
        let row = &mut slice[r * cols..(r + 1) * cols];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Local minibatch SGD with momentum on cross-entropy. Batch order is drawn
/// from `rng` per epoch; momentum buffers start at zero for each call.
pub fn train_local<R: Rng + ?Sized>(
    model: &ModelState,
    data: &LabeledData,
    epochs: usize,
    cfg: &FedConfig,
    rng: &mut R,
) -> Result<ModelState> {
    cfg.validate()?;
    if data.rows() == 0 {
        return Err(Error::InsufficientRows { got: 0, min: 1 });
    }
    let mut model = model.clone();
    let mut vel_w: Vec<Matrix> = model
        .weights
        .iter()
        .map(|w| Matrix::zeros(w.rows(), w.cols()))
        .collect();
    let mut vel_b: Vec<Vec<f64>> = model.biases.iter().map(|b| vec![0.0; b.len()]).collect();

    let m = data.rows();
    let mut order: Vec<usize> = (0..m).collect();
    for _epoch in 0..epochs {
        shuffle(rng, &mut order);
        for chunk in order.chunks(cfg.batch) {
            let mut rows = Vec::with_capacity(chunk.len() * data.x.cols());
            let mut y = Vec::with_capacity(chunk.len());
            for &i in chunk {
                rows.extend_from_slice(data.x.row(i));
                y.push(data.y[i]);
            }
            let batch = Matrix::from_vec(chunk.len(), data.x.cols(), rows)?;
            let (_, grads) = model.loss_and_grads(&batch, &y)?;
            for l in 0..model.weights.len() {
                {
                    let vw = vel_w[l].as_mut_slice();
                    let gw = grads.weights[l].as_slice();
                    let w = model.weights[l].as_mut_slice();
                    for i in 0..w.len() {
                        vw[i] = cfg.momentum * vw[i] - cfg.lr * gw[i];
                        w[i] += vw[i];
                    }
                }
                for (i, g) in grads.biases[l].iter().enumerate() {
                    vel_b[l][i] = cfg.momentum * vel_b[l][i] - cfg.lr * g;
                    model.biases[l][i] += vel_b[l][i];
                }
            }
        }
    }
    Ok(model)
}

/// Sample-count-weighted parameter mean.
pub fn fed_average(models: &[ModelState], sample_counts: &[u64]) -> Result<ModelState> {
    let first = models.first().ok_or(Error::ArchitectureMismatch)?;
    if models.len() != sample_counts.len() || sample_counts.iter().sum::<u64>() == 0 {
        return Err(Error::InvalidConfig(String::from(
            "need one positive sample count per model",
        )));
    }
    if models.iter().any(|m| !m.same_architecture(first)) {
        return Err(Error::ArchitectureMismatch);
    }
    let total: f64 = sample_counts.iter().map(|&c| c as f64).sum();
    let mut out = first.clone();
    for w in &mut out.weights {
        for v in w.as_mut_slice() {
            *v = 0.0;
        }
    }
    for b in &mut out.biases {
        for v in b.iter_mut() {
            *v = 0.0;
        }
    }
    for (model, &count) in models.iter().zip(sample_counts) {
        let weight = count as f64 / total;
        for (acc, w) in out.weights.iter_mut().zip(&model.weights) {
            for (a, v) in acc.as_mut_slice().iter_mut().zip(w.as_slice()) {
                *a += weight * v;
            }
        }
        for (acc, b) in out.biases.iter_mut().zip(&model.biases) {
            for (a, v) in acc.iter_mut().zip(b) {
                *a += weight * v;
            }
        }
    }
    Ok(out)
}

/// One federated run: per-round accuracies on the shared test set plus the
/// final global model.
#[derive(Debug, Clone)]
pub struct FederationRun {
    pub accuracy_per_round: Vec<f64>,
    pub model: ModelState,
}

/// Runs `cfg.rounds` federation rounds over the given client partitions.
/// Every round broadcasts the global model, trains `cfg.local_epochs` locally
/// per client, and averages weighted by client sample counts.
pub fn run_federation(
    partitions: &[LabeledData],
    test: &LabeledData,
    classes: usize,
    cfg: &FedConfig,
) -> Result<FederationRun> {
    cfg.validate()?;
    if partitions.is_empty() || partitions.iter().any(|p| p.rows() == 0) {
        return Err(Error::InvalidConfig(String::from(
            "every client needs at least one row",
        )));
    }
    let inputs = partitions[0].x.cols();
    let mut init_rng = salted_stream(cfg.seed, 0, Purpose::Training, 0x1417);
    let mut global = ModelState::init(inputs, &cfg.hidden, classes, &mut init_rng)?;
    let counts: Vec<u64> = partitions.iter().map(|p| p.rows() as u64).collect();
    let mut accuracy_per_round = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let mut locals = Vec::with_capacity(partitions.len());
        for (client, part) in partitions.iter().enumerate() {
            let mut rng =
                salted_stream(cfg.seed, client as u32, Purpose::Training, round as u64 + 1);
            locals.push(train_local(&global, part, cfg.local_epochs, cfg, &mut rng)?);
        }
        global = fed_average(&locals, &counts)?;
        accuracy_per_round.push(global.accuracy(test)?);
    }
    Ok(FederationRun {
        accuracy_per_round,
        model: global,
    })
}

/// Centralized reference: the same round structure on the full training set
/// with no averaging step (client id 0 streams), so a single-client
/// federation must reproduce it exactly.
pub fn train_centralized(
    train: &LabeledData,
    test: &LabeledData,
    classes: usize,
    cfg: &FedConfig,
) -> Result<FederationRun> {
    cfg.validate()?;
    let mut init_rng = salted_stream(cfg.seed, 0, Purpose::Training, 0x1417);
    let mut model = ModelState::init(train.x.cols(), &cfg.hidden, classes, &mut init_rng)?;
    let mut accuracy_per_round = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let mut rng = salted_stream(cfg.seed, 0, Purpose::Training, round as u64 + 1);
        model = train_local(&model, train, cfg.local_epochs, cfg, &mut rng)?;
        accuracy_per_round.push(model.accuracy(test)?);
    }
    Ok(FederationRun {
        accuracy_per_round,
        model,
    })
}

/// k-NN accuracy probe: train and test entirely within one version of the
/// data, for the original and the perturbed copies, using the same seeded
/// split for both. Labels are compared as strings.
pub fn knn_utility(
    original: &DataMatrix,
    perturbed: &DataMatrix,
    k: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let (orig, _) = encode_labels(original)?;
    let (pert, _) = encode_labels(perturbed)?;
    let acc = |data: &LabeledData| -> Result<f64> {
        let (train, test) = split_train_test(data, train_fraction, seed)?;
        knn_accuracy(&train, &test, k)
    };
    Ok((acc(&orig)?, acc(&pert)?))
}

fn knn_accuracy(train: &LabeledData, test: &LabeledData, k: usize) -> Result<f64> {
    if k == 0 || k > train.rows() {
        return Err(Error::InvalidConfig(alloc::format!(
            "k = {k} outside 1..={}",
            train.rows()
        )));
    }
    let n = train.x.cols();
    let mut hits = 0usize;
    for t in 0..test.rows() {
        // (distance^2, train index), k smallest with index tie-break.
        let mut dists: Vec<(f64, usize)> = (0..train.rows())
            .map(|i| {
                let d: f64 = (0..n)
                    .map(|j| {
                        let v = train.x.get(i, j) - test.x.get(t, j);
                        v * v
                    })
                    .sum();
                (d, i)
            })
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        let neighbors = &dists[..k];
        // Majority vote; ties break to the class with the nearest neighbor,
        // then to the smaller class id.
        let mut votes: Vec<(usize, usize, f64)> = Vec::new(); // (class, count, nearest)
        for &(d, i) in neighbors {
            let class = train.y[i];
            match votes.iter_mut().find(|(c, _, _)| *c == class) {
                Some(entry) => entry.1 += 1,
                None => votes.push((class, 1, d)),
            }
        }
        votes.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then(a.2.partial_cmp(&b.2).unwrap_or(core::cmp::Ordering::Equal))
                .then(a.0.cmp(&b.0))
        });
        if votes[0].0 == test.y[t] {
            hits += 1;
        }
    }
    Ok(hits as f64 / test.rows() as f64)
}

/// Well-separated Gaussian blobs for demos and tests: `classes` clusters in
/// `n` dimensions, `rows` samples, cluster std 1, centers `separation` apart.
pub fn synthetic_blobs(
    rows: usize,
    n: usize,
    classes: usize,
    separation: f64,
    seed: u64,
) -> Result<DataMatrix> {
    let mut rng = stream(seed, 0, Purpose::Sampling);
    let mut centers = Vec::with_capacity(classes);
    for _ in 0..classes {
        let c: Vec<f64> = (0..n)
            .map(|_| (crate::rng::open_unit(&mut rng) * 2.0 - 1.0) * separation)
            .collect();
        centers.push(c);
    }
    let mut data = Vec::with_capacity(rows * n);
    let mut labels = Vec::with_capacity(rows);
    for i in 0..rows {
        let class = i % classes;
        for j in 0..n {
            data.push(centers[class][j] + normal(&mut rng, 1.0));
        }
        labels.push(alloc::format!("c{class}"));
    }
    DataMatrix::new(Matrix::from_vec(rows, n, data)?, Some(labels))
}
