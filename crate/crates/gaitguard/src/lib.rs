//! Gait privacy toolkit: keypoint I/O, feature extraction, identification,
//! frame mitigation, privacy evaluation and a streaming server.

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod replay;
pub mod server;

pub use gaitguard_core as core;
