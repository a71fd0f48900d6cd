//! File formats, persistent stores, the annotation gateway, and the CLI
//! around `socialsense-core`.

pub mod checkpoint;
pub mod error;
pub mod io;
pub mod gateway;
pub mod pipeline;
pub mod report;
pub mod server;
pub mod store;

pub use error::{Error, Result};
