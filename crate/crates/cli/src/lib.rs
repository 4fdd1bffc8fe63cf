//! IO, file formats, and transports around `distpab-core`: CSV dataset
//! handling, JSON reports, the TCP coordinator/worker drivers, and the
//! in-process protocol simulation.

pub mod commands;
pub mod dataset;
pub mod net;
pub mod report;
pub mod sim;
