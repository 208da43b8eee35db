//! Analytics engine for visualization-tool interaction logs.
//!
//! The pipeline runs `ingest` → `sessionizer` → `classifier`, then feeds the
//! resolved corpus to `kpi` and `timeline`. `simgen` produces synthetic
//! corpora with known ground truth and `store` persists analysis results.

pub mod classifier;
pub mod event_model;
pub mod ingest;
pub mod kpi;
pub mod simgen;
pub mod stats;
pub mod store;
pub mod timeline;
pub mod sessionizer;

pub use classifier::{classify_corpus, Classification, UserType};
pub use event_model::{Event, EventCategory, EventRegistry, ViewKind};
pub use sessionizer::{resolve_corpus, Corpus, StitchParams};
