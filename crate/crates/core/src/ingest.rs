//! Bilingual transcript ingestion.
//!
//! A raw transcript is plain text with blocks separated by blank lines. English
//! and Indic blocks alternate and are interspersed with timing references and
//! page numbers. [`parse_document`] removes those artifacts and
//! [`split_bilingual`] routes every surviving block to its language side.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::lang::{LanguageCode, LanguagePair, Script};
use crate::segment::{classify_script, ScriptClass, ScriptCounts, ScriptLabel};

/// Share of foreign-Indic characters tolerated on the Indic side.
pub const FOREIGN_SCRIPT_LIMIT: f64 = 0.10;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("document contains no text after cleaning")]
    EmptyDocument,
    #[error("input is not valid UTF-8 (first bad byte at offset {offset})")]
    EncodingError { offset: usize },
    #[error(
        "{foreign} of {total} script characters on the {declared} side are in another Indic script"
    )]
    LanguageMismatch {
        declared: LanguageCode,
        foreign: usize,
        total: usize,
    },
    #[error("invalid lecture metadata: {0}")]
    InvalidMeta(String),
    #[error("artifact pattern `{name}`: {reason}")]
    InvalidPattern { name: String, reason: String },
    #[error("pattern file line {line}: {reason}")]
    PatternSyntax { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LectureMeta {
    pub lecture_id: String,
    pub course_id: String,
    pub language_pair: LanguagePair,
    pub source_path: PathBuf,
}

impl LectureMeta {
    pub fn new(
        lecture_id: impl Into<String>,
        course_id: impl Into<String>,
        language_pair: LanguagePair,
        source_path: impl Into<PathBuf>,
    ) -> Result<Self, IngestError> {
        let meta = LectureMeta {
            lecture_id: lecture_id.into(),
            course_id: course_id.into(),
            language_pair,
            source_path: source_path.into(),
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.lecture_id.trim().is_empty() {
            return Err(IngestError::InvalidMeta("empty lecture_id".into()));
        }
        if self.language_pair.source == self.language_pair.target {
            return Err(IngestError::InvalidMeta(format!(
                "language pair {} has identical sides",
                self.language_pair
            )));
        }
        Ok(())
    }

    /// The Indic language of an English-Indic transcript.
    pub fn indic_language(&self) -> Result<LanguageCode, IngestError> {
        self.language_pair.indic_side().ok_or_else(|| {
            IngestError::InvalidMeta(format!(
                "transcript pair {} is not English-Indic",
                self.language_pair
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactAction {
    /// Remove every match, leaving the rest of the line.
    DeleteMatch,
    /// Remove any line the pattern matches.
    DeleteLine,
}

impl FromStr for ArtifactAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "delete-match" => Ok(ArtifactAction::DeleteMatch),
            "delete-line" => Ok(ArtifactAction::DeleteLine),
            other => Err(format!("unknown action `{other}`")),
        }
    }
}

impl fmt::Display for ArtifactAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArtifactAction::DeleteMatch => "delete-match",
            ArtifactAction::DeleteLine => "delete-line",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ArtifactPattern {
    pub name: String,
    pub action: ArtifactAction,
    regex: Regex,
}

impl ArtifactPattern {
    pub fn new(name: &str, action: ArtifactAction, pattern: &str) -> Result<Self, IngestError> {
        let invalid = |reason: String| IngestError::InvalidPattern {
            name: name.to_string(),
            reason,
        };
        let regex = Regex::new(pattern).map_err(|e| invalid(e.to_string()))?;
        // A pattern matching the empty string would delete nothing and never settle.
        if regex.is_match("") {
            return Err(invalid("pattern matches the empty string".into()));
        }
        Ok(ArtifactPattern {
            name: name.to_string(),
            action,
            regex,
        })
    }

    pub fn pattern(&self) -> &str {
        self.regex.as_str()
    }

    pub fn regex(&self) -> &Regex {
        &self.regex
    }
}

const DEFAULT_PATTERN_FILE: &str = r#"@version default-1
# Parenthesised timing references, e.g. "(Refer Slide Time: 00:14)" or "(Refer Time: 01:02:03)".
refer_slide_time  delete-match  (?i)\(\s*refer(?:\s+slide)?\s+time\s*:?\s*\d{1,2}(?::\d{2}){1,2}\s*\)
# Subtitle-style cue lines, e.g. "00:01:02,000 --> 00:01:04,500".
timecode_range_line  delete-line  ^\s*\d{1,2}(?::\d{2}){1,2}(?:[.,]\d{1,3})?\s*-->\s*\d{1,2}(?::\d{2}){1,2}(?:[.,]\d{1,3})?\s*$
# A line holding only a time code, e.g. "12:34" or "[01:02:03]".
timecode_line  delete-line  ^\s*[\[(]?\s*\d{1,2}(?::\d{2}){1,2}(?:[.,]\d{1,3})?\s*[\])]?\s*$
# Page or slide numbers on their own line, e.g. "12", "Page 3", "Slide 4 of 20".
page_number_line  delete-line  (?i)^\s*(?:page|slide)?\s*\d{1,4}(?:\s*(?:/|of)\s*\d{1,4})?\s*$
"#;

/// An ordered, versioned list of artifact rules.
///
/// File format: one rule per line as `name action regex`, where `action` is
/// `delete-match` or `delete-line` and the regex is the remainder of the line.
/// A line `@version <tag>` names the set; `#` starts a comment line.
#[derive(Debug, Clone)]
pub struct ArtifactPatternSet {
    pub version: String,
    pub patterns: Vec<ArtifactPattern>,
}

impl Default for ArtifactPatternSet {
    fn default() -> Self {
        ArtifactPatternSet::parse(DEFAULT_PATTERN_FILE).expect("default pattern set is valid")
    }
}

impl ArtifactPatternSet {
    /// Text of the built-in set in the pattern file format.
    pub fn default_source() -> &'static str {
        DEFAULT_PATTERN_FILE
    }

    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut version = None;
        let mut patterns = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |reason: &str| IngestError::PatternSyntax {
                line: n + 1,
                reason: reason.to_string(),
            };
            if let Some(v) = line.strip_prefix("@version") {
                let v = v.trim();
                if v.is_empty() {
                    return Err(syntax("empty version tag"));
                }
                version = Some(v.to_string());
                continue;
            }
            let (name, rest) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| syntax("expected `name action regex`"))?;
            let (action, pattern) = rest
                .trim_start()
                .split_once(char::is_whitespace)
                .ok_or_else(|| syntax("expected `name action regex`"))?;
            let action: ArtifactAction = action.parse().map_err(|e: String| syntax(&e))?;
            patterns.push(ArtifactPattern::new(name, action, pattern.trim())?);
        }
        let version = version.ok_or_else(|| IngestError::PatternSyntax {
            line: 0,
            reason: "missing `@version` line".into(),
        })?;
        Ok(ArtifactPatternSet { version, patterns })
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        ArtifactPatternSet::parse(&fs::read_to_string(path)?)
    }

    /// True when some rule would still change `text`.
    pub fn matches(&self, text: &str) -> bool {
        self.patterns.iter().any(|p| match p.action {
            ArtifactAction::DeleteMatch => p.regex.is_match(text),
            ArtifactAction::DeleteLine => text.lines().any(|l| p.regex.is_match(l)),
        })
    }
}

/// Collapses interior whitespace runs (including newlines) to one space and trims.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn strip_once(block: &str, patterns: &ArtifactPatternSet) -> String {
    let mut text = block.to_string();
    for p in &patterns.patterns {
        text = match p.action {
            ArtifactAction::DeleteLine => text
                .lines()
                .filter(|l| !p.regex.is_match(l))
                .collect::<Vec<_>>()
                .join("\n"),
            ArtifactAction::DeleteMatch => p.regex.replace_all(&text, " ").into_owned(),
        };
    }
    normalize_whitespace(&text)
}

/// Removes artifacts from one block and normalizes its whitespace.
///
/// Rules are applied until the text stops changing, so deletions that bring two
/// halves of an artifact together are caught and the result is a fixed point.
pub fn strip_artifacts(block: &str, patterns: &ArtifactPatternSet) -> String {
    let mut current = strip_once(block, patterns);
    loop {
        let next = strip_once(&current, patterns);
        if next == current {
            return current;
        }
        current = next;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextBlock {
    pub text: String,
    /// Position of the block among all blank-line separated blocks of the raw file.
    pub original_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilingualDocument {
    pub meta: LectureMeta,
    pub blocks: Vec<TextBlock>,
}

fn raw_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        blocks.push(current.join("\n"));
    }
    blocks
}

/// Decodes a raw transcript, splits it into blank-line separated blocks and
/// cleans each one. Blocks that end up empty are dropped.
pub fn parse_document(
    raw: &[u8],
    meta: LectureMeta,
    patterns: &ArtifactPatternSet,
) -> Result<BilingualDocument, IngestError> {
    let text = std::str::from_utf8(raw).map_err(|e| IngestError::EncodingError {
        offset: e.valid_up_to(),
    })?;
    let text = text.strip_prefix('\u{FEFF}').unwrap_or(text);
    let text = text.replace("\r\n", "\n").replace('\r', "\n");
    let blocks: Vec<TextBlock> = raw_blocks(&text)
        .iter()
        .enumerate()
        .filter_map(|(original_order, raw)| {
            let text = strip_artifacts(raw, patterns);
            (!text.is_empty()).then_some(TextBlock {
                text,
                original_order,
            })
        })
        .collect();
    if blocks.is_empty() {
        return Err(IngestError::EmptyDocument);
    }
    Ok(BilingualDocument { meta, blocks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutingFlag {
    /// Below the purity threshold; routed by majority script.
    Mixed,
    /// No script-bearing characters at all; routed to the English side.
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedBlock {
    pub text: String,
    pub original_order: usize,
    pub script: ScriptLabel,
    pub flag: Option<RoutingFlag>,
}

/// Both language sides of one transcript, each in original block order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDocument {
    pub meta: LectureMeta,
    pub indic_language: LanguageCode,
    pub english: Vec<RoutedBlock>,
    pub indic: Vec<RoutedBlock>,
}

impl SplitDocument {
    pub fn flagged(&self) -> impl Iterator<Item = &RoutedBlock> {
        self.english
            .iter()
            .chain(self.indic.iter())
            .filter(|b| b.flag.is_some())
    }
}

/// Routes each block to the English or the Indic side by script majority.
pub fn split_bilingual(doc: BilingualDocument) -> Result<SplitDocument, IngestError> {
    let indic_language = doc.meta.indic_language()?;
    let declared = indic_language.script();
    let mut english = Vec::new();
    let mut indic = Vec::new();
    let mut indic_counts = ScriptCounts::default();
    for block in doc.blocks {
        let script = classify_script(&block.text);
        let flag = match script.label {
            ScriptClass::Pure(_) => None,
            ScriptClass::Mixed => Some(RoutingFlag::Mixed),
            ScriptClass::Neutral => Some(RoutingFlag::Neutral),
        };
        let routed = RoutedBlock {
            text: block.text,
            original_order: block.original_order,
            script,
            flag,
        };
        match script.dominant {
            Some(s) if s.is_indic() => {
                indic_counts.add(&script.counts);
                indic.push(routed);
            }
            _ => english.push(routed),
        }
    }
    let total = indic_counts.total();
    let foreign: usize = Script::ALL
        .iter()
        .filter(|s| s.is_indic() && **s != declared)
        .map(|&s| indic_counts.get(s))
        .sum();
    if total > 0 && foreign as f64 > FOREIGN_SCRIPT_LIMIT * total as f64 {
        return Err(IngestError::LanguageMismatch {
            declared: indic_language,
            foreign,
            total,
        });
    }
    Ok(SplitDocument {
        meta: doc.meta,
        indic_language,
        english,
        indic,
    })
}
