//! Script classification and rule-based sentence segmentation.
//!
//! The classifier counts code points per Unicode block and reports the dominant
//! script. The segmenter splits on sentence terminators with two guards for
//! English (abbreviations and decimal numbers); Indic text additionally splits on
//! the danda and double danda.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ingest::{LectureMeta, RoutedBlock};
use crate::lang::{LanguageCode, Script};

/// Below this share of the dominant script a text is labelled mixed.
pub const MIXED_THRESHOLD: f64 = 0.9;

/// Abbreviations that never end an English sentence.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "Dr", "Mr", "Mrs", "Prof", "etc", "e.g", "i.e", "Fig", "Eq", "vs", "No",
];

const DANDA: char = '\u{0964}';
const DOUBLE_DANDA: char = '\u{0965}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScriptClass {
    Pure(Script),
    Mixed,
    Neutral,
}

/// Per-script code point counts for one text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptCounts([usize; 8]);

impl ScriptCounts {
    pub fn of(text: &str) -> Self {
        let mut counts = ScriptCounts::default();
        for c in text.chars() {
            if let Some(s) = Script::of(c) {
                counts.0[Self::slot(s)] += 1;
            }
        }
        counts
    }

    fn slot(script: Script) -> usize {
        Script::ALL.iter().position(|&s| s == script).unwrap()
    }

    pub fn get(&self, script: Script) -> usize {
        self.0[Self::slot(script)]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn add(&mut self, other: &ScriptCounts) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += b;
        }
    }

    /// Most frequent script; ties resolve to the earlier entry of [`Script::ALL`].
    pub fn dominant(&self) -> Option<Script> {
        let mut best: Option<(Script, usize)> = None;
        for s in Script::ALL {
            let n = self.get(s);
            if n > 0 && best.is_none_or(|(_, b)| n > b) {
                best = Some((s, n));
            }
        }
        best.map(|(s, _)| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptLabel {
    pub label: ScriptClass,
    /// Most frequent script, also set for mixed text.
    pub dominant: Option<Script>,
    /// Share of script-bearing characters in the dominant script; 0 when neutral.
    pub dominant_ratio: f64,
    pub counts: ScriptCounts,
}

pub fn classify_script(text: &str) -> ScriptLabel {
    let counts = ScriptCounts::of(text);
    let total = counts.total();
    let dominant = counts.dominant();
    match dominant {
        None => ScriptLabel {
            label: ScriptClass::Neutral,
            dominant: None,
            dominant_ratio: 0.0,
            counts,
        },
        Some(script) => {
            let ratio = counts.get(script) as f64 / total as f64;
            let label = if ratio < MIXED_THRESHOLD {
                ScriptClass::Mixed
            } else {
                ScriptClass::Pure(script)
            };
            ScriptLabel {
                label,
                dominant: Some(script),
                dominant_ratio: ratio,
                counts,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    /// `original_order` of the block the sentence came from.
    pub block: usize,
}

/// Rule-based sentence splitter with a configurable English abbreviation list.
#[derive(Debug, Clone)]
pub struct SentenceSegmenter {
    abbreviations: BTreeSet<String>,
}

impl Default for SentenceSegmenter {
    fn default() -> Self {
        SentenceSegmenter::with_abbreviations(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl SentenceSegmenter {
    pub fn with_abbreviations<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let abbreviations = abbreviations
            .into_iter()
            .map(|a| a.as_ref().trim().trim_end_matches('.').to_string())
            .filter(|a| !a.is_empty())
            .collect();
        SentenceSegmenter { abbreviations }
    }

    /// One abbreviation per line; blank lines and `#` comments are ignored. The
    /// loaded tokens extend the default list.
    pub fn from_file(path: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        let extra = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        Ok(SentenceSegmenter::with_abbreviations(
            DEFAULT_ABBREVIATIONS.iter().copied().chain(extra),
        ))
    }

    pub fn abbreviations(&self) -> impl Iterator<Item = &str> {
        self.abbreviations.iter().map(String::as_str)
    }

    /// Splits `text` into trimmed, nonempty sentences. Terminators stay attached to
    /// the sentence they end.
    pub fn split(&self, text: &str, language: LanguageCode) -> Vec<String> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut out = Vec::new();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let c = chars[i].1;
            if !is_terminator(c, language) {
                i += 1;
                continue;
            }
            // Swallow the rest of the terminator run and any closing punctuation.
            let mut j = i;
            let mut has_danda = c == DANDA || c == DOUBLE_DANDA;
            while j + 1 < chars.len()
                && (is_terminator(chars[j + 1].1, language) || is_closer(chars[j + 1].1))
            {
                j += 1;
                has_danda |= chars[j].1 == DANDA || chars[j].1 == DOUBLE_DANDA;
            }
            let next = chars.get(j + 1).map(|&(_, c)| c);
            let boundary = if has_danda {
                true
            } else {
                let at_gap = next.is_none_or(char::is_whitespace);
                at_gap && !self.guarded(text, &chars, i, next, language)
            };
            if boundary {
                let end = chars.get(j + 1).map_or(text.len(), |&(b, _)| b);
                push_trimmed(&mut out, &text[start..end]);
                start = end;
            }
            i = j + 1;
        }
        push_trimmed(&mut out, &text[start..]);
        out
    }

    fn guarded(
        &self,
        text: &str,
        chars: &[(usize, char)],
        i: usize,
        next: Option<char>,
        language: LanguageCode,
    ) -> bool {
        if chars[i].1 != '.' {
            return false;
        }
        let prev = i.checked_sub(1).map(|p| chars[p].1);
        if prev.is_some_and(|p| p.is_ascii_digit()) && next.is_some_and(|n| n.is_ascii_digit()) {
            return true;
        }
        if language != LanguageCode::En {
            return false;
        }
        let dot = chars[i].0;
        let token_start = text[..dot]
            .rfind(char::is_whitespace)
            .map_or(0, |p| p + text[p..].chars().next().unwrap().len_utf8());
        let token = text[token_start..dot].trim_start_matches(is_opener);
        !token.is_empty() && self.abbreviations.contains(token)
    }

    pub fn segment(&self, text: &str, language: LanguageCode) -> Vec<Sentence> {
        self.split(text, language)
            .into_iter()
            .enumerate()
            .map(|(index, text)| Sentence {
                index,
                text,
                block: 0,
            })
            .collect()
    }
}

/// Segments with the default abbreviation list.
pub fn segment_sentences(text: &str, language: LanguageCode) -> Vec<Sentence> {
    SentenceSegmenter::default().segment(text, language)
}

fn is_terminator(c: char, language: LanguageCode) -> bool {
    match c {
        '.' | '!' | '?' => true,
        DANDA | DOUBLE_DANDA => language.is_indic(),
        _ => false,
    }
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201D}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201C}' | '\u{2018}')
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}

/// Sentences of one language for one lecture, indexed from zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonoDocument {
    pub meta: LectureMeta,
    pub language: LanguageCode,
    pub sentences: Vec<Sentence>,
    /// Blocks that were routed here despite not being pure script text.
    #[serde(default)]
    pub flagged_blocks: Vec<usize>,
}

impl MonoDocument {
    /// Segments routed blocks in order and numbers the resulting sentences.
    pub fn from_blocks(
        meta: LectureMeta,
        language: LanguageCode,
        blocks: &[RoutedBlock],
        segmenter: &SentenceSegmenter,
    ) -> Self {
        let mut sentences = Vec::new();
        let mut flagged_blocks = Vec::new();
        for block in blocks {
            if block.flag.is_some() {
                flagged_blocks.push(block.original_order);
            }
            for text in segmenter.split(&block.text, language) {
                sentences.push(Sentence {
                    index: sentences.len(),
                    text,
                    block: block.original_order,
                });
            }
        }
        MonoDocument {
            meta,
            language,
            sentences,
            flagged_blocks,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.sentences.iter().map(|s| s.text.as_str()).collect()
    }

    /// Share of script-bearing sentences whose dominant script is the document
    /// language's script. Neutral sentences are not counted; 1.0 when none remain.
    pub fn script_consistency(&self) -> f64 {
        let expected = self.language.script();
        let mut considered = 0usize;
        let mut consistent = 0usize;
        for s in &self.sentences {
            if let Some(d) = classify_script(&s.text).dominant {
                considered += 1;
                consistent += usize::from(d == expected);
            }
        }
        if considered == 0 {
            1.0
        } else {
            consistent as f64 / considered as f64
        }
    }
}
