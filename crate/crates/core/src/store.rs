//! The persisted analysis store: resolved corpus plus everything needed to
//! recompute KPIs from it.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{classify_corpus, Classification};
use crate::event_model::EventRegistry;
use crate::ingest::{IngestReport, SessionFile};
use crate::sessionizer::{resolve_corpus, Corpus, StitchParams};

pub const STORE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no analysis store at {0}")]
    StoreMissing(PathBuf),
    #[error("analysis store {path} is unreadable: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("cannot write analysis store {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisStore {
    pub format_version: u32,
    pub params: StitchParams,
    pub registry: EventRegistry,
    pub report: IngestReport,
    pub corpus: Corpus,
}

impl AnalysisStore {
    pub fn build(
        sessions: &[SessionFile],
        report: IngestReport,
        registry: EventRegistry,
        params: StitchParams,
    ) -> Self {
        Self {
            format_version: STORE_FORMAT_VERSION,
            params,
            registry,
            report,
            corpus: resolve_corpus(sessions, &params),
        }
    }

    pub fn classify(&self) -> Classification {
        classify_corpus(&self.corpus)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(self).expect("store serializes");
        out.push(b'\n');
        out
    }

    /// Writes through a temporary sibling file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let io = |source| StoreError::Io { path: path.to_path_buf(), source };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let tmp = path.with_extension("tmp");
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(&self.to_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::StoreMissing(path.to_path_buf()))
            }
            Err(source) => return Err(StoreError::Io { path: path.to_path_buf(), source }),
        };
        let store: Self = serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if store.format_version != STORE_FORMAT_VERSION {
            return Err(StoreError::Corrupt {
                path: path.to_path_buf(),
                reason: format!("unsupported format version {}", store.format_version),
            });
        }
        Ok(store)
    }
}
