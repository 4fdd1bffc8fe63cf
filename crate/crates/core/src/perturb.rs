//! End-to-end perturbation pipelines: the centralized algorithm, the
//! node-side workload, and the central parameter generation they share.
//!
//! The centralized path is literally "coordinate over one summary, then run
//! the node workload", so the distributed pipeline with a single partition
//! reproduces it bit for bit when expansion and shuffling are disabled.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::matrix::{HomogeneousData, Matrix};
use crate::phi::search_optimal;
use crate::rng::{normal, salted_stream, stream, Purpose};
use crate::stats::{column_stds, finalize_global, reverse_zscore, zscore_with, PartitionSummary};
use crate::transform::{apply_transform, ReflectionMode};
use crate::wire;

/// Noise application after the geometric transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExpansionMode {
    /// Sign-preserving magnitude growth: `(|x| + |N(0, sigma)|) * sign(x)`.
    #[default]
    RandExp,
    /// Plain additive noise with the smallest column std of the transformed
    /// data as sigma.
    AdditiveMinSigma,
    /// No noise (for equivalence runs and attack-strength baselines).
    Off,
}

/// Perturbation configuration shared by the pipelines.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbConfig {
    /// Randomized-expansion noise standard deviation.
    pub sigma: f64,
    /// Master seed; every random stream derives from it.
    pub seed: u64,
    /// Stream-isolation id of the node running the pipeline (0 centrally).
    pub node_id: u32,
    pub reflection_mode: ReflectionMode,
    pub expansion_mode: ExpansionMode,
    pub shuffle: bool,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            sigma: 0.3,
            seed: 0,
            node_id: 0,
            reflection_mode: ReflectionMode::default(),
            expansion_mode: ExpansionMode::default(),
            shuffle: true,
        }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "sigma must be finite and non-negative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Search diagnostics attached to locally generated parameters. Parameters
/// reconstructed from a wire payload do not carry them (the Phase-2 payload
/// holds only what nodes need to perturb).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchInfo {
    /// Achieved optimal privacy guarantee Φ.
    pub phi: f64,
    /// Winning rotation angle, radians.
    pub theta: f64,
    /// Winning reflection axis, 1-based.
    pub axis: usize,
}

/// Global perturbation parameters broadcast to every node in Phase 2.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalParams {
    pub sigma: f64,
    pub rotation: Matrix,
    pub translation: Matrix,
    pub reflection: Matrix,
    pub stdvec: Vec<f64>,
    pub meanvec: Vec<f64>,
    pub search: Option<SearchInfo>,
}

impl GlobalParams {
    #[inline]
    pub fn attr_count(&self) -> usize {
        self.stdvec.len()
    }

    /// Achieved Φ, when known (locally generated parameters).
    #[inline]
    pub fn phi(&self) -> Option<f64> {
        self.search.map(|s| s.phi)
    }

    /// FNV-1a digest over the canonical wire encoding; identifies which
    /// parameter set produced an output.
    pub fn digest(&self) -> u64 {
        wire::params_digest(self)
    }
}

/// A perturbed dataset plus provenance.
#[derive(Debug, Clone)]
pub struct PerturbOutput {
    pub data: DataMatrix,
    /// Achieved Φ; `None` when the worker only saw the wire payload.
    pub phi: Option<f64>,
    /// Digest of the parameters used (see [`GlobalParams::digest`]).
    pub params_digest: u64,
}

/// Sign-preserving randomized expansion: every entry grows in magnitude by
/// `|N(0, sigma)|` and keeps its sign (zero counts as positive).
pub fn randomized_expansion<R: Rng + ?Sized>(
    data: &Matrix,
    sigma: f64,
    rng: &mut R,
) -> Result<Matrix> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "expansion sigma must be finite and non-negative, got {sigma}"
        )));
    }
    let mut out = data.clone();
    for v in out.as_mut_slice() {
        let grow = libm::fabs(normal(rng, sigma));
        let sign = if *v < 0.0 { -1.0 } else { 1.0 };
        *v = (libm::fabs(*v) + grow) * sign;
    }
    Ok(out)
}

/// Additive noise with sigma equal to the smallest column std of `data`.
fn additive_min_sigma<R: Rng + ?Sized>(data: &Matrix, rng: &mut R) -> Result<Matrix> {
    let sigma = column_stds(data).into_iter().fold(f64::INFINITY, f64::min);
    let mut out = data.clone();
    for v in out.as_mut_slice() {
        *v += normal(rng, sigma);
    }
    if !out.as_slice().iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("additive expansion"));
    }
    Ok(out)
}

/// Central-entity task: merge the partition summaries, search the optimal
/// parameters, and bundle everything the nodes need.
///
/// Summaries are folded in the order given; callers that receive them
/// concurrently should order them (the session layer sorts by node id)
/// before calling.
pub fn coordinate(summaries: &[PartitionSummary], cfg: &PerturbConfig) -> Result<GlobalParams> {
    cfg.validate()?;
    for s in summaries {
        s.validate()?;
    }
    let stats = finalize_global(summaries)?;
    if stats.attr_count() < 2 {
        return Err(Error::InvalidDimension {
            got: stats.attr_count(),
            min: 2,
        });
    }
    let mut rng = stream(cfg.seed, 0, Purpose::Translation);
    let opt = search_optimal(&stats, cfg.reflection_mode, &mut rng)?;
    Ok(GlobalParams {
        sigma: cfg.sigma,
        rotation: opt.rotation,
        translation: opt.translation,
        reflection: opt.reflection,
        stdvec: stats.stdvec,
        meanvec: stats.meanvec,
        search: Some(SearchInfo {
            phi: opt.phi,
            theta: opt.theta,
            axis: opt.axis,
        }),
    })
}

/// Node task: normalize with the *global* statistics, apply the shared
/// geometric transform, add local expansion noise, restore the original
/// attribute ranges, and shuffle tuples.
///
/// Expansion sigma comes from `params` (the coordinator chose it); the
/// node's random streams derive from `(cfg.seed, cfg.node_id)`.
pub fn node_perturb(
    partition: &DataMatrix,
    params: &GlobalParams,
    cfg: &PerturbConfig,
) -> Result<PerturbOutput> {
    cfg.validate()?;
    let n = params.attr_count();
    if partition.cols() != n {
        return Err(Error::InconsistentAttrCount {
            have: n,
            got: partition.cols(),
            node: cfg.node_id,
        });
    }
    if partition.rows() == 0 {
        return Err(Error::InsufficientRows { got: 0, min: 1 });
    }

    let normalized = zscore_with(partition.features(), &params.meanvec, &params.stdvec)?;
    let composite = params
        .rotation
        .matmul(&params.translation)?
        .matmul(&params.reflection)?;
    let transformed =
        apply_transform(&composite, &HomogeneousData::from_records(&normalized)?)?.transpose();

    let expanded = match cfg.expansion_mode {
        ExpansionMode::RandExp => {
            let mut rng = stream(cfg.seed, cfg.node_id, Purpose::Expansion);
            randomized_expansion(&transformed, params.sigma, &mut rng)?
        }
        ExpansionMode::AdditiveMinSigma => {
            let mut rng = stream(cfg.seed, cfg.node_id, Purpose::Expansion);
            additive_min_sigma(&transformed, &mut rng)?
        }
        ExpansionMode::Off => transformed,
    };

    let restored = reverse_zscore(&expanded, &params.stdvec, &params.meanvec)?;
    let mut data = partition.with_features(restored)?;
    if cfg.shuffle {
        let mut rng = stream(cfg.seed, cfg.node_id, Purpose::Shuffle);
        data.shuffle_rows(&mut rng);
    }
    Ok(PerturbOutput {
        data,
        phi: params.phi(),
        params_digest: params.digest(),
    })
}

/// Centralized pipeline: summarize the whole dataset, generate parameters,
/// and run the node workload on it locally.
pub fn perturb_centralized(data: &DataMatrix, cfg: &PerturbConfig) -> Result<PerturbOutput> {
    if data.rows() < 2 {
        return Err(Error::InsufficientRows {
            got: data.rows(),
            min: 2,
        });
    }
    if data.cols() < 2 {
        return Err(Error::InvalidDimension {
            got: data.cols(),
            min: 2,
        });
    }
    let summary = PartitionSummary::from_data(data.features())?;
    let params = coordinate(core::slice::from_ref(&summary), cfg)?;
    node_perturb(data, &params, cfg)
}

/// Simple additive-Gaussian comparison baseline: per-column noise with
/// standard deviation `sigma * column std`.
pub fn additive_gaussian_baseline(data: &DataMatrix, sigma: f64, seed: u64) -> Result<DataMatrix> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "baseline sigma must be finite and non-negative, got {sigma}"
        )));
    }
    let stds = column_stds(data.features());
    let mut rng = salted_stream(seed, 0, Purpose::Expansion, 0xba5e);
    let n = data.cols();
    let mut out = data.features().clone();
    let slice = out.as_mut_slice();
    for i in 0..data.rows() {
        for j in 0..n {
            slice[i * n + j] += normal(&mut rng, sigma * stds[j]);
        }
    }
    data.with_features(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::open_unit;
    use crate::stats::zscore_normalize;
    use alloc::string::ToString;
    use alloc::vec;

    fn random_dataset(m: usize, n: usize, seed: u64) -> DataMatrix {
        let mut rng = stream(seed, 0, Purpose::Sampling);
        let data: Vec<f64> = (0..m * n)
            .map(|_| open_unit(&mut rng) * 8.0 - 4.0)
            .collect();
        let labels = (0..m).map(|i| (i % 3).to_string()).collect();
        DataMatrix::new(Matrix::from_vec(m, n, data).unwrap(), Some(labels)).unwrap()
    }

    fn quiet_cfg(seed: u64) -> PerturbConfig {
        PerturbConfig {
            seed,
            expansion_mode: ExpansionMode::Off,
            shuffle: false,
            ..PerturbConfig::default()
        }
    }

    #[test]
    fn expansion_sigma_zero_is_identity() {
        let d = Matrix::from_vec(2, 3, vec![1.5, -2.0, 0.0, 3.0, -0.5, 7.0]).unwrap();
        let mut rng = stream(1, 0, Purpose::Expansion);
        let out = randomized_expansion(&d, 0.0, &mut rng).unwrap();
        assert_eq!(out, d);
    }

    #[test]
    fn expansion_grows_magnitude_and_keeps_sign() {
        let d = Matrix::from_vec(1, 4, vec![-2.0, 2.0, -0.001, 5.0]).unwrap();
        let mut rng = stream(2, 0, Purpose::Expansion);
        let out = randomized_expansion(&d, 1.0, &mut rng).unwrap();
        for (orig, new) in d.as_slice().iter().zip(out.as_slice()) {
            assert!(libm::fabs(*new) >= libm::fabs(*orig));
            assert!(orig.signum() == new.signum());
        }
    }

    #[test]
    fn expansion_rejects_negative_sigma() {
        let d = Matrix::identity(2);
        let mut rng = stream(3, 0, Purpose::Expansion);
        assert!(matches!(
            randomized_expansion(&d, -1.0, &mut rng),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn identity_params_give_identity_pipeline() {
        let d = random_dataset(10, 3, 4);
        let (_, mean, std) = zscore_normalize(d.features()).unwrap();
        let params = GlobalParams {
            sigma: 0.3,
            rotation: Matrix::identity(4),
            translation: Matrix::identity(4),
            reflection: Matrix::identity(4),
            stdvec: std,
            meanvec: mean,
            search: None,
        };
        let out = node_perturb(&d, &params, &quiet_cfg(0)).unwrap();
        assert!(out.data.features().max_abs_diff(d.features()) < 1e-9);
        assert_eq!(out.data.labels(), d.labels());
        assert_eq!(out.phi, None);
    }

    #[test]
    fn achieved_phi_matches_reported_phi() {
        let d = random_dataset(80, 4, 9);
        let cfg = quiet_cfg(7);
        let out = perturb_centralized(&d, &cfg).unwrap();
        let phi = out.phi.unwrap();

        // Recompute min per-attribute difference variance in normalized space.
        let (normalized, mean, std) = zscore_normalize(d.features()).unwrap();
        let pert_norm = zscore_with(out.data.features(), &mean, &std).unwrap();
        let m = d.rows() as f64;
        let mut min_var = f64::INFINITY;
        for j in 0..d.cols() {
            let diffs: Vec<f64> = (0..d.rows())
                .map(|i| normalized.get(i, j) - pert_norm.get(i, j))
                .collect();
            let mean_d = diffs.iter().sum::<f64>() / m;
            let var = diffs
                .iter()
                .map(|x| (x - mean_d) * (x - mean_d))
                .sum::<f64>()
                / (m - 1.0);
            min_var = min_var.min(var);
        }
        assert!(
            libm::fabs(min_var - phi) < 1e-6,
            "floor {min_var} vs phi {phi}"
        );
        assert!(phi > 0.0);
    }

    #[test]
    fn distances_preserved_before_expansion() {
        let d = random_dataset(40, 5, 12);
        let cfg = quiet_cfg(3);
        let out = perturb_centralized(&d, &cfg).unwrap();
        let (normalized, mean, std) = zscore_normalize(d.features()).unwrap();
        let pert_norm = zscore_with(out.data.features(), &mean, &std).unwrap();
        for a in 0..8 {
            for b in (a + 1)..8 {
                let before: f64 = (0..d.cols())
                    .map(|j| {
                        let v = normalized.get(a, j) - normalized.get(b, j);
                        v * v
                    })
                    .sum();
                let after: f64 = (0..d.cols())
                    .map(|j| {
                        let v = pert_norm.get(a, j) - pert_norm.get(b, j);
                        v * v
                    })
                    .sum();
                let rel = libm::fabs(libm::sqrt(after) - libm::sqrt(before))
                    / libm::sqrt(before).max(1e-300);
                assert!(rel < 1e-9);
            }
        }
    }

    #[test]
    fn single_partition_distributed_equals_centralized() {
        let d = random_dataset(30, 3, 20);
        let cfg = quiet_cfg(5);
        let central = perturb_centralized(&d, &cfg).unwrap();

        let summary = PartitionSummary::from_data(d.features()).unwrap();
        let params = coordinate(&[summary], &cfg).unwrap();
        let node = node_perturb(&d, &params, &cfg).unwrap();
        assert_eq!(central.data, node.data);
        assert_eq!(central.params_digest, node.params_digest);
    }

    #[test]
    fn union_of_node_outputs_matches_centralized_up_to_order() {
        let d = random_dataset(41, 3, 21);
        let cfg = quiet_cfg(6);
        let central = perturb_centralized(&d, &cfg).unwrap();

        let parts = d.split_contiguous(4).unwrap();
        let summaries: Vec<PartitionSummary> = parts
            .iter()
            .map(|p| PartitionSummary::from_data(p.features()).unwrap())
            .collect();
        let params = coordinate(&summaries, &cfg).unwrap();
        let outputs: Vec<DataMatrix> = parts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let node_cfg = PerturbConfig {
                    node_id: i as u32,
                    ..cfg.clone()
                };
                node_perturb(p, &params, &node_cfg).unwrap().data
            })
            .collect();
        let union = DataMatrix::concat(&outputs).unwrap();
        // Contiguous split + no shuffle preserves row order.
        assert!(union.features().max_abs_diff(central.data.features()) < 1e-12);
    }

    #[test]
    fn expansion_streams_differ_across_nodes() {
        let d = random_dataset(20, 3, 22);
        let summary = PartitionSummary::from_data(d.features()).unwrap();
        let base = PerturbConfig {
            shuffle: false,
            ..PerturbConfig::default()
        };
        let params = coordinate(&[summary], &base).unwrap();
        let out_a = node_perturb(
            &d,
            &params,
            &PerturbConfig {
                node_id: 1,
                ..base.clone()
            },
        )
        .unwrap();
        let out_b = node_perturb(&d, &params, &PerturbConfig { node_id: 2, ..base }).unwrap();
        assert!(out_a.data.features().max_abs_diff(out_b.data.features()) > 1e-6);
    }

    #[test]
    fn coordinate_is_deterministic_and_order_robust() {
        let d = random_dataset(60, 4, 23);
        let parts = d.split_contiguous(3).unwrap();
        let mut summaries: Vec<PartitionSummary> = parts
            .iter()
            .map(|p| PartitionSummary::from_data(p.features()).unwrap())
            .collect();
        let cfg = PerturbConfig::default();
        let a = coordinate(&summaries, &cfg).unwrap();
        let b = coordinate(&summaries, &cfg).unwrap();
        assert_eq!(a.translation, b.translation);

        summaries.swap(0, 2);
        let c = coordinate(&summaries, &cfg).unwrap();
        let (pa, pc) = (a.search.unwrap(), c.search.unwrap());
        assert!(libm::fabs(pa.phi - pc.phi) < 1e-8);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let one_row = DataMatrix::unlabeled(Matrix::from_vec(1, 3, vec![1.0; 3]).unwrap());
        assert!(perturb_centralized(&one_row, &PerturbConfig::default()).is_err());

        let narrow =
            DataMatrix::unlabeled(Matrix::from_vec(4, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        assert!(perturb_centralized(&narrow, &PerturbConfig::default()).is_err());

        let bad_sigma = PerturbConfig {
            sigma: -0.5,
            ..PerturbConfig::default()
        };
        let d = random_dataset(10, 2, 1);
        assert!(matches!(
            perturb_centralized(&d, &bad_sigma),
            Err(Error::InvalidConfig(_))
        ));
    }
}
