//! Link-level simulator for millimeter-wave multi-UAV links with analog beam
//! tracking and digital combining.
//!
//! A lead vehicle with a hybrid array serves several followers over rank-one
//! line-of-sight channels whose angles drift as Gaussian random walks. The
//! crate provides the pieces to study that system end to end: array steering
//! and codebooks, the channel and pilot observation model, a tabular
//! Q-learning beam tracker (online and online/offline), a gradient-style
//! local-search baseline, SINR-optimal digital weight computation over
//! candidate beam sets, reward-threshold calibration, and a Monte-Carlo
//! experiment harness with CSV output behind the `beamsim` binary.

pub mod array_geometry;
pub mod channel;
pub mod numerics;
pub mod combiner;
pub mod gradient;
pub mod harness;
pub mod qlearning;
pub mod thresholds;
