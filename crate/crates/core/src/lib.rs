//! Gait privacy toolkit core.
//!
//! This crate holds the allocation-only algorithms behind the `gaitguard`
//! tools:
//!
//! * [`keypoint`]: the pose keypoint and raster data model,
//! * [`gait`]: walking-direction detection, leg-label correction,
//!   heel-strike/toe-off detection and per-cycle gait features,
//! * [`identity`]: a gradient-boosted tree classifier with repeated
//!   stratified cross-validation and weighted F1,
//! * [`mitigate`]: seeded noise samplers and region-targeted frame masking,
//! * [`privacy`]: histogram Jensen–Shannon divergence and the
//!   privacy-utility sweep,
//! * [`synth`]: synthetic walkers with analytic ground truth, a marker
//!   renderer and a marker keypoint extractor,
//! * [`stream`]: the binary frame protocol codec and throughput meter.
//!
//! Everything here is `no_std` with `alloc`; file formats, sockets and the
//! command line live in the `gaitguard` crate.

#![no_std]
#![allow(clippy::too_many_arguments)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod gait;
pub mod identity;
pub mod keypoint;
pub mod mitigate;
pub mod privacy;
pub mod stream;
pub mod synth;

pub use error::{Error, Result};
pub use math::derive_seed;
