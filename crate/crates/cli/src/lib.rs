//! Stage-by-stage corpus construction over an on-disk workspace.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use lecmine_core::corpus::CorpusStats;
use lecmine_core::EmbedError;
use serde::{Deserialize, Serialize};

pub mod cli;
pub mod config;
pub mod manifest;
pub mod pipeline;

pub use config::{Backend, Flags, PipelineConfig};
pub use pipeline::Pipeline;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Segment,
    Embed,
    Align,
    Pivot,
    Collate,
    Stats,
    Split,
    Export,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Segment,
        Stage::Embed,
        Stage::Align,
        Stage::Pivot,
        Stage::Collate,
        Stage::Stats,
        Stage::Split,
        Stage::Export,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Segment => "segment",
            Stage::Embed => "embed",
            Stage::Align => "align",
            Stage::Pivot => "pivot",
            Stage::Collate => "collate",
            Stage::Stats => "stats",
            Stage::Split => "split",
            Stage::Export => "export",
        }
    }

    /// Stages whose completed output this stage reads.
    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Segment => &[Stage::Ingest],
            Stage::Embed => &[Stage::Segment],
            Stage::Align => &[Stage::Segment, Stage::Embed],
            Stage::Pivot => &[Stage::Align],
            Stage::Collate => &[Stage::Align, Stage::Pivot],
            Stage::Stats => &[Stage::Align, Stage::Collate],
            Stage::Split => &[Stage::Collate],
            Stage::Export => &[Stage::Collate],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("stage `{stage}` needs the output of `{missing}`; run `{missing}` first")]
    MissingPriorStage { stage: Stage, missing: Stage },
    #[error("embedding failed: {0}")]
    Embedding(#[source] EmbedError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::ConfigInvalid(_) | PipelineError::MissingPriorStage { .. } => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }

    pub fn is_provider_unavailable(&self) -> bool {
        matches!(self, PipelineError::Embedding(EmbedError::ProviderUnavailable { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentFailure {
    pub document: String,
    pub error: String,
}

/// Outcome of one stage. Written as `_report.json` into the stage directory,
/// which also marks the stage as complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub documents: usize,
    pub lectures: usize,
    pub pairs: usize,
    pub failures: Vec<DocumentFailure>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub details: serde_json::Map<String, serde_json::Value>,
}

impl StageReport {
    pub fn new(stage: Stage) -> Self {
        StageReport {
            stage,
            documents: 0,
            lectures: 0,
            pairs: 0,
            failures: Vec::new(),
            warnings: Vec::new(),
            details: serde_json::Map::new(),
        }
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details
            .insert(key.to_string(), serde_json::to_value(value).expect("detail serializes"));
    }

    pub fn warn(&mut self, msg: String) {
        log::warn!("{}: {msg}", self.stage);
        self.warnings.push(msg);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub stages: Vec<StageReport>,
    pub stats: Option<CorpusStats>,
    pub error: Option<String>,
}
