//! Language codes and the scripts they are written in.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The nine languages the pipeline handles: English plus eight Indic languages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LanguageCode {
    En,
    Bn,
    Gu,
    Hi,
    Kn,
    Ml,
    Mr,
    Ta,
    Te,
}

impl LanguageCode {
    pub const ALL: [LanguageCode; 9] = [
        LanguageCode::En,
        LanguageCode::Bn,
        LanguageCode::Gu,
        LanguageCode::Hi,
        LanguageCode::Kn,
        LanguageCode::Ml,
        LanguageCode::Mr,
        LanguageCode::Ta,
        LanguageCode::Te,
    ];

    pub const INDIC: [LanguageCode; 8] = [
        LanguageCode::Bn,
        LanguageCode::Gu,
        LanguageCode::Hi,
        LanguageCode::Kn,
        LanguageCode::Ml,
        LanguageCode::Mr,
        LanguageCode::Ta,
        LanguageCode::Te,
    ];

    pub fn code(self) -> &'static str {
        match self {
            LanguageCode::En => "en",
            LanguageCode::Bn => "bn",
            LanguageCode::Gu => "gu",
            LanguageCode::Hi => "hi",
            LanguageCode::Kn => "kn",
            LanguageCode::Ml => "ml",
            LanguageCode::Mr => "mr",
            LanguageCode::Ta => "ta",
            LanguageCode::Te => "te",
        }
    }

    pub fn is_indic(self) -> bool {
        self != LanguageCode::En
    }

    /// Script the language is conventionally written in.
    pub fn script(self) -> Script {
        match self {
            LanguageCode::En => Script::Latin,
            LanguageCode::Hi | LanguageCode::Mr => Script::Devanagari,
            LanguageCode::Bn => Script::Bengali,
            LanguageCode::Gu => Script::Gujarati,
            LanguageCode::Kn => Script::Kannada,
            LanguageCode::Ml => Script::Malayalam,
            LanguageCode::Ta => Script::Tamil,
            LanguageCode::Te => Script::Telugu,
        }
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown language code `{0}` (expected one of en, bn, gu, hi, kn, ml, mr, ta, te)")]
pub struct UnknownLanguage(pub String);

impl FromStr for LanguageCode {
    type Err = UnknownLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageCode::ALL
            .iter()
            .copied()
            .find(|l| l.code() == s.trim())
            .ok_or_else(|| UnknownLanguage(s.to_string()))
    }
}

/// An ordered (source, target) language pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LanguagePair {
    pub source: LanguageCode,
    pub target: LanguageCode,
}

impl LanguagePair {
    pub fn new(source: LanguageCode, target: LanguageCode) -> Self {
        LanguagePair { source, target }
    }

    /// The Indic side of an English-Indic pair.
    pub fn indic_side(&self) -> Option<LanguageCode> {
        match (self.source, self.target) {
            (LanguageCode::En, t) if t.is_indic() => Some(t),
            (s, LanguageCode::En) if s.is_indic() => Some(s),
            _ => None,
        }
    }

    pub fn is_english_indic(&self) -> bool {
        self.indic_side().is_some()
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.source, self.target)
    }
}

impl FromStr for LanguagePair {
    type Err = UnknownLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .trim()
            .split_once(['-', '_'])
            .ok_or_else(|| UnknownLanguage(s.to_string()))?;
        Ok(LanguagePair::new(a.parse()?, b.parse()?))
    }
}

/// Writing systems recognised by the script classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Script {
    Latin,
    Devanagari,
    Bengali,
    Gujarati,
    Kannada,
    Malayalam,
    Tamil,
    Telugu,
}

impl Script {
    pub const ALL: [Script; 8] = [
        Script::Latin,
        Script::Devanagari,
        Script::Bengali,
        Script::Gujarati,
        Script::Kannada,
        Script::Malayalam,
        Script::Tamil,
        Script::Telugu,
    ];

    /// Script of a single character, `None` for digits, punctuation, whitespace and
    /// anything outside the supported blocks. The dandas (U+0964, U+0965) are shared
    /// punctuation across Indic scripts and count as neutral.
    pub fn of(c: char) -> Option<Script> {
        match c as u32 {
            0x41..=0x5A | 0x61..=0x7A => Some(Script::Latin),
            0x0964 | 0x0965 => None,
            0x0900..=0x097F => Some(Script::Devanagari),
            0x0980..=0x09FF => Some(Script::Bengali),
            0x0A80..=0x0AFF => Some(Script::Gujarati),
            0x0B80..=0x0BFF => Some(Script::Tamil),
            0x0C00..=0x0C7F => Some(Script::Telugu),
            0x0C80..=0x0CFF => Some(Script::Kannada),
            0x0D00..=0x0D7F => Some(Script::Malayalam),
            _ => None,
        }
    }

    pub fn is_indic(self) -> bool {
        self != Script::Latin
    }
}
