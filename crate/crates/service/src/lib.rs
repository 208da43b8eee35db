//! Command-line entry points and the read-only HTTP/JSON API.

pub mod api;
pub mod cli;
pub mod report;
pub mod snapshot;

pub use report::{Analysis, CSV_HEADER};
pub use snapshot::{Snapshot, SnapshotSource};
