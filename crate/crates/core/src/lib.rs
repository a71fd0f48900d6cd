//! Core algorithms for duty-cycled social-interaction sensing on a wrist-worn
//! device.
//!
//! The crate is `no_std` (with `alloc`) so the same inference path can run on
//! constrained targets. Everything that touches files, sockets, or wall-clock
//! time lives in the companion `socialsense` crate.
//!
//! Pipeline overview:
//!
//! ```text
//! sensor streams -> probe windows -> rate normalization -> spectrograms -> images
//!                                \-> audio frames -> cue detection -> FSD -> detector -> segments
//! ```

#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod audiofrontend;
pub mod detector;
pub mod dsp;
pub mod error;
pub mod evaluation;
pub mod fsd;
pub mod gateway;
pub mod meta;
pub mod nn;
pub mod multimodal;
pub mod sensorstream;

mod math;
pub mod rng;

pub use error::{Error, Result};

/// Milliseconds since the scenario epoch (local midnight of day 0).
pub type Millis = u64;

/// One second in milliseconds.
pub const SECOND_MS: Millis = 1_000;
/// One minute in milliseconds.
pub const MINUTE_MS: Millis = 60 * SECOND_MS;
/// One hour in milliseconds.
pub const HOUR_MS: Millis = 60 * MINUTE_MS;
/// One day in milliseconds.
pub const DAY_MS: Millis = 24 * HOUR_MS;
