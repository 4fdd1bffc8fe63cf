//! Privacy-preserving geometric perturbation of horizontally partitioned
//! numeric datasets.
//!
//! The crate implements the full parameter pipeline: z-score normalization,
//! homogeneous reflection/translation/rotation generators, the Φ-separation
//! search that picks the angle and reflection axis maximizing the weakest
//! attribute's difference variance, randomized expansion noise, and the
//! two-phase coordinator/worker exchange that lets distributed nodes perturb
//! locally with globally optimal parameters. Attack metrics (naive inference,
//! known input/output regression, FastICA reconstruction) and a small
//! federated-averaging harness quantify what the perturbation buys.
//!
//! The crate is `no_std` (with `alloc`); transports, file formats, and the
//! command-line front end live in the companion `distpab` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod attacks;
pub mod data;
pub mod error;
pub mod fedml;
mod linalg;
pub mod matrix;
pub mod perturb;
pub mod phi;
pub mod rng;
pub mod session;
pub mod stats;
pub mod transform;
pub mod wire;

pub use data::DataMatrix;
pub use error::{Error, Result};
pub use matrix::{HomogeneousData, Matrix};
pub use perturb::{
    coordinate, node_perturb, perturb_centralized, ExpansionMode, GlobalParams, PerturbConfig,
    PerturbOutput,
};
pub use phi::OptimalParams;
pub use stats::{GlobalStats, PartitionSummary};
pub use transform::ReflectionMode;
