use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use lecmine_core::corpus::{ExportFormat, DEFAULT_TEST_TOP_K};
use lecmine_core::embed::DEFAULT_DIMENSION;
use lecmine_core::AlignParams;
use serde::{Deserialize, Serialize};

use crate::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Mock,
    Remote,
}

/// On-disk config file. Every key is optional; relative paths are resolved
/// against the file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub manifest: Option<PathBuf>,
    pub workspace: Option<PathBuf>,
    pub patterns: Option<PathBuf>,
    pub abbreviations: Option<PathBuf>,
    pub format: Option<String>,
    pub test_top_k: Option<usize>,
    pub holdout: Option<Vec<String>>,
    pub jobs: Option<usize>,
    pub align: AlignSection,
    pub embed: EmbedSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignSection {
    pub max_merge: Option<usize>,
    pub skip_cost: Option<f64>,
    pub threshold: Option<f64>,
    pub band: Option<usize>,
    pub exact_limit: Option<usize>,
    pub margin_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedSection {
    pub backend: Option<Backend>,
    pub endpoint: Option<String>,
    pub batch_size: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub retries: Option<usize>,
    pub dimension: Option<usize>,
    pub mock_aliases: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| PipelineError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.manifest,
            &mut cfg.workspace,
            &mut cfg.patterns,
            &mut cfg.abbreviations,
            &mut cfg.embed.mock_aliases,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Command-line flags shared by every subcommand. Flags win over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML config file
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Lecture manifest (TSV: lecture_id, course_id, pair, path)
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Directory holding stage outputs
    #[arg(long, value_name = "DIR")]
    pub workspace: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<Backend>,
    /// Embedding service base URL (remote backend)
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_merge: Option<usize>,
    /// Cost per skipped sentence
    #[arg(long)]
    pub skip_cost: Option<f64>,
    /// Minimum link score kept as a pair
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Half-width of the refinement band
    #[arg(long)]
    pub band: Option<usize>,
    /// Export format: jsonl or tsv
    #[arg(long)]
    pub format: Option<String>,
    /// Test pairs per language pair in the holdout split
    #[arg(long)]
    pub test_top_k: Option<usize>,
    /// Comma-separated lecture ids reserved for the test set
    #[arg(long, value_delimiter = ',')]
    pub holdout: Option<Vec<String>>,
    /// Artifact pattern file
    #[arg(long, value_name = "FILE")]
    pub patterns: Option<PathBuf>,
    /// Extra English abbreviations, one per line
    #[arg(long, value_name = "FILE")]
    pub abbreviations: Option<PathBuf>,
    /// Alias table for the mock backend
    #[arg(long, value_name = "FILE")]
    pub mock_aliases: Option<PathBuf>,
    /// Worker threads (default: logical cores)
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write the machine-readable report here
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProviderConfig {
    pub backend: Backend,
    pub endpoint: Option<String>,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub retries: usize,
    pub dimension: usize,
    pub mock_aliases: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub manifest: Option<PathBuf>,
    pub workspace: PathBuf,
    pub patterns: Option<PathBuf>,
    pub abbreviations: Option<PathBuf>,
    pub align: AlignParams,
    pub provider: ProviderConfig,
    pub format: ExportFormat,
    pub holdout: Vec<String>,
    pub test_top_k: usize,
    pub jobs: usize,
}

fn invalid(msg: impl Into<String>) -> PipelineError {
    PipelineError::ConfigInvalid(msg.into())
}

fn existing(path: Option<PathBuf>, what: &str) -> Result<Option<PathBuf>, PipelineError> {
    match path {
        Some(p) if !p.exists() => Err(invalid(format!("{what} {} does not exist", p.display()))),
        other => Ok(other),
    }
}

impl PipelineConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, PipelineError> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let defaults = AlignParams::default();
        let align = AlignParams {
            max_merge: flags.max_merge.or(file.align.max_merge).unwrap_or(defaults.max_merge),
            skip_cost: flags.skip_cost.or(file.align.skip_cost).unwrap_or(defaults.skip_cost),
            keep_threshold: flags.threshold.or(file.align.threshold).unwrap_or(defaults.keep_threshold),
            band_width: flags.band.or(file.align.band).unwrap_or(defaults.band_width),
            exact_limit: file.align.exact_limit.unwrap_or(defaults.exact_limit),
            margin_samples: file.align.margin_samples.unwrap_or(defaults.margin_samples),
        };
        align.validate().map_err(|e| invalid(e.to_string()))?;
        if align.band_width < 1 {
            return Err(invalid("band must be at least 1"));
        }

        let e = &file.embed;
        let provider = ProviderConfig {
            backend: flags.backend.or(e.backend).unwrap_or(Backend::Mock),
            endpoint: flags.endpoint.clone().or(e.endpoint.clone()),
            batch_size: flags.batch_size.or(e.batch_size).unwrap_or(64),
            max_in_flight: e.max_in_flight.unwrap_or(4),
            retries: e.retries.unwrap_or(3),
            dimension: e.dimension.unwrap_or(DEFAULT_DIMENSION),
            mock_aliases: existing(flags.mock_aliases.clone().or(e.mock_aliases.clone()), "alias table")?,
        };
        if !(1..=256).contains(&provider.batch_size) {
            return Err(invalid(format!("batch size must be within 1..=256, got {}", provider.batch_size)));
        }
        if provider.max_in_flight == 0 || provider.dimension == 0 {
            return Err(invalid("max_in_flight and dimension must be positive"));
        }
        if provider.backend == Backend::Remote && provider.endpoint.is_none() {
            return Err(invalid("the remote backend needs --endpoint"));
        }

        let format = match flags.format.clone().or(file.format) {
            Some(f) => f.parse::<ExportFormat>().map_err(invalid)?,
            None => ExportFormat::Jsonl,
        };
        let test_top_k = flags.test_top_k.or(file.test_top_k).unwrap_or(DEFAULT_TEST_TOP_K);
        if test_top_k == 0 {
            return Err(invalid("test-top-k must be at least 1"));
        }
        let jobs = flags
            .jobs
            .or(file.jobs)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if jobs == 0 {
            return Err(invalid("jobs must be at least 1"));
        }
        let workspace = flags
            .workspace
            .clone()
            .or(file.workspace)
            .ok_or_else(|| invalid("no workspace given (--workspace or `workspace` in the config)"))?;
        let mut holdout = flags.holdout.clone().or(file.holdout).unwrap_or_default();
        holdout.retain(|h| !h.trim().is_empty());

        Ok(PipelineConfig {
            manifest: existing(flags.manifest.clone().or(file.manifest), "manifest")?,
            workspace,
            patterns: existing(flags.patterns.clone().or(file.patterns), "pattern file")?,
            abbreviations: existing(flags.abbreviations.clone().or(file.abbreviations), "abbreviation file")?,
            align,
            provider,
            format,
            holdout,
            test_top_k,
            jobs,
        })
    }
}
