use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use lecmine_core::{LanguagePair, LectureMeta};

use crate::PipelineError;

/// One transcript listed in the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub meta: LectureMeta,
}

impl ManifestEntry {
    pub fn document_id(&self) -> String {
        document_id(&self.meta.lecture_id, self.meta.language_pair)
    }
}

/// File-name-safe id of a transcript: `<lecture>.<src>-<tgt>`.
pub fn document_id(lecture_id: &str, pair: LanguagePair) -> String {
    format!("{}.{pair}", file_safe(lecture_id))
}

pub fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Parses a tab-separated manifest: `lecture_id course_id pair path`. A header
/// line starting with `lecture_id`, blank lines and `#` comments are skipped.
/// Relative transcript paths are taken relative to the manifest.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>, PipelineError> {
    let bad = |n: usize, msg: String| PipelineError::ConfigInvalid(format!("manifest line {}: {msg}", n + 1));
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') || (n == 0 && line.starts_with("lecture_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [lecture_id, course_id, pair, path] = fields[..] else {
            return Err(bad(n, format!("expected 4 tab-separated fields, found {}", fields.len())));
        };
        let pair: LanguagePair = pair.parse().map_err(|e| bad(n, format!("{e}")))?;
        let path = PathBuf::from(path);
        let path = if path.is_relative() { base.join(path) } else { path };
        let meta = LectureMeta::new(lecture_id, course_id, pair, path).map_err(|e| bad(n, e.to_string()))?;
        let entry = ManifestEntry { meta };
        if !seen.insert(entry.document_id()) {
            return Err(bad(n, format!("duplicate transcript {}", entry.document_id())));
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, PipelineError> {
    let text = fs::read_to_string(path)
        .map_err(|e| PipelineError::ConfigInvalid(format!("{}: {e}", path.display())))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new("")))
}
