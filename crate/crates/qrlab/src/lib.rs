//! IO companion to `qr-core`: CSV/JSON table emission, SVG plots, a worker
//! pool for pair searches, and the `qrlab` command-line front end.

#![forbid(unsafe_code)]

pub mod cli;
pub mod parallel;
pub mod plot;
pub mod tables;
