use std::ffi::OsString;
use std::fs;

use clap::{Parser, Subcommand};
use log::error;

use crate::config::{Flags, PipelineConfig};
use crate::{Pipeline, PipelineError, PipelineReport, Stage, EXIT_CONFIG, EXIT_OK};

/// Mine sentence-aligned parallel text from bilingual lecture transcripts.
#[derive(Debug, Parser)]
#[command(name = "lecmine", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean transcripts and split each into its two language sides
    Ingest(Flags),
    /// Split each side into sentences
    Segment(Flags),
    /// Embed every sentence, reusing the on-disk cache
    Embed(Flags),
    /// Align sentences and extract scored pairs
    Align(Flags),
    /// Derive Indic-Indic pairs through shared English sentences
    Pivot(Flags),
    /// Merge and deduplicate all pairs into one corpus
    Collate(Flags),
    /// Per-language-pair corpus statistics
    Stats(Flags),
    /// Hold out lectures as a test set
    Split(Flags),
    /// Write the corpus and splits as JSONL or TSV
    Export(Flags),
    /// Run every stage in order
    RunAll(Flags),
}

impl Command {
    fn parts(&self) -> (Option<Stage>, &Flags) {
        match self {
            Command::Ingest(f) => (Some(Stage::Ingest), f),
            Command::Segment(f) => (Some(Stage::Segment), f),
            Command::Embed(f) => (Some(Stage::Embed), f),
            Command::Align(f) => (Some(Stage::Align), f),
            Command::Pivot(f) => (Some(Stage::Pivot), f),
            Command::Collate(f) => (Some(Stage::Collate), f),
            Command::Stats(f) => (Some(Stage::Stats), f),
            Command::Split(f) => (Some(Stage::Split), f),
            Command::Export(f) => (Some(Stage::Export), f),
            Command::RunAll(f) => (None, f),
        }
    }
}

fn run(stage: Option<Stage>, flags: &Flags) -> (PipelineReport, Option<PipelineError>) {
    let empty = PipelineReport {
        stages: Vec::new(),
        stats: None,
        error: None,
    };
    let pipeline = match PipelineConfig::resolve(flags).and_then(Pipeline::new) {
        Ok(p) => p,
        Err(e) => return (empty, Some(e)),
    };
    match stage {
        None => pipeline.run_all(),
        Some(stage) => match pipeline.run_stage(stage) {
            Ok(r) => (
                PipelineReport {
                    stages: vec![r],
                    ..empty
                },
                None,
            ),
            Err(e) => (empty, Some(e)),
        },
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (stage, flags) = cli.command.parts();
    let (mut report, err) = run(stage, flags);
    if let Some(e) = &err {
        error!("{e}");
        report.error = Some(e.to_string());
    }
    if let Some(path) = &flags.report {
        let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        if let Err(e) = fs::write(path, text) {
            error!("cannot write report {}: {e}", path.display());
            return err.map_or(crate::EXIT_RUNTIME, |e| e.exit_code());
        }
    }
    err.map_or(EXIT_OK, |e| e.exit_code())
}
