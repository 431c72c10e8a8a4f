//! Translation pairs and the collated corpus: deduplication, pivoting through
//! English, statistics, holdout splitting and export.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::align::AlignParams;
use crate::embed::normalize_text;
use crate::lang::{LanguageCode, LanguagePair};

pub const HISTOGRAM_BINS: usize = 20;
pub const DEFAULT_TEST_TOP_K: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("pair {index} is missing lecture metadata")]
    MetadataMissing { index: usize },
    #[error("pair {index} is invalid: {reason}")]
    InvalidPair { index: usize, reason: String },
    #[error("pivot inputs come from different lectures ({expected} vs {found})")]
    LectureMismatch { expected: String, found: String },
    #[error("pivot input has no English side: {0}")]
    NotEnglishPivot(String),
    #[error("holdout size must be at least 1")]
    InvalidK,
    #[error("pair {index} cannot be written as TSV: {field} contains a tab or line break")]
    UnescapableText { index: usize, field: &'static str },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Half-open sentence index range `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AlignType {
    #[serde(rename = "1-1")]
    OneToOne,
    #[serde(rename = "1-n")]
    OneToMany,
    #[serde(rename = "n-1")]
    ManyToOne,
    #[serde(rename = "pivoted")]
    Pivoted,
}

impl AlignType {
    pub fn as_str(self) -> &'static str {
        match self {
            AlignType::OneToOne => "1-1",
            AlignType::OneToMany => "1-n",
            AlignType::ManyToOne => "n-1",
            AlignType::Pivoted => "pivoted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationPair {
    pub src_lang: LanguageCode,
    pub tgt_lang: LanguageCode,
    pub src_text: String,
    pub tgt_text: String,
    pub score: f64,
    pub lecture_id: String,
    pub course_id: String,
    pub src_span: Span,
    pub tgt_span: Span,
    pub align_type: AlignType,
}

/// (languages, normalized source text, normalized target text).
pub type PairKey = (LanguageCode, LanguageCode, String, String);

impl TranslationPair {
    pub fn language_pair(&self) -> LanguagePair {
        LanguagePair::new(self.src_lang, self.tgt_lang)
    }

    /// Dedup key: NFC plus whitespace collapsing, no case folding.
    pub fn key(&self) -> PairKey {
        (
            self.src_lang,
            self.tgt_lang,
            normalize_text(&self.src_text),
            normalize_text(&self.tgt_text),
        )
    }

    fn check(&self, index: usize) -> Result<(), CorpusError> {
        if self.lecture_id.trim().is_empty() || self.course_id.trim().is_empty() {
            return Err(CorpusError::MetadataMissing { index });
        }
        let invalid = |reason: &str| {
            Err(CorpusError::InvalidPair {
                index,
                reason: reason.to_string(),
            })
        };
        if self.src_text.trim().is_empty() || self.tgt_text.trim().is_empty() {
            return invalid("empty text");
        }
        if self.src_lang == self.tgt_lang {
            return invalid("source and target language are equal");
        }
        if !self.score.is_finite() {
            return invalid("score is not finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub pipeline_version: String,
    pub params: Option<AlignParams>,
    pub pattern_set_version: Option<String>,
    pub embedding_model: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub pairs: Vec<TranslationPair>,
    pub provenance: Provenance,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Concatenates per-lecture pair lists, ordered by lecture id and source span.
/// The sort is stable, so repeated lecture ids keep their input order.
pub fn collate(
    lectures: Vec<Vec<TranslationPair>>,
    provenance: Provenance,
) -> Result<Corpus, CorpusError> {
    let mut pairs: Vec<TranslationPair> = lectures.into_iter().flatten().collect();
    for (i, p) in pairs.iter().enumerate() {
        p.check(i)?;
    }
    pairs.sort_by(|a, b| {
        (a.lecture_id.as_str(), a.src_span).cmp(&(b.lecture_id.as_str(), b.src_span))
    });
    Ok(Corpus { pairs, provenance })
}

/// Keeps the best-scoring pair per [`PairKey`]; ties go to the earlier pair.
/// Survivors keep their relative order.
pub fn dedup(corpus: Corpus) -> Corpus {
    let mut winner: HashMap<PairKey, usize> = HashMap::new();
    for (i, p) in corpus.pairs.iter().enumerate() {
        winner
            .entry(p.key())
            .and_modify(|w| {
                if p.score > corpus.pairs[*w].score {
                    *w = i;
                }
            })
            .or_insert(i);
    }
    let keep: HashSet<usize> = winner.into_values().collect();
    let pairs = corpus
        .pairs
        .into_iter()
        .enumerate()
        .filter_map(|(i, p)| keep.contains(&i).then_some(p))
        .collect();
    Corpus {
        pairs,
        provenance: corpus.provenance,
    }
}

struct PivotSide<'a> {
    en_span: Span,
    lang: LanguageCode,
    text: &'a str,
    span: Span,
    pair: &'a TranslationPair,
}

fn pivot_side(p: &TranslationPair) -> Result<PivotSide<'_>, CorpusError> {
    if p.src_lang == LanguageCode::En && p.tgt_lang != LanguageCode::En {
        Ok(PivotSide {
            en_span: p.src_span,
            lang: p.tgt_lang,
            text: &p.tgt_text,
            span: p.tgt_span,
            pair: p,
        })
    } else if p.tgt_lang == LanguageCode::En && p.src_lang != LanguageCode::En {
        Ok(PivotSide {
            en_span: p.tgt_span,
            lang: p.src_lang,
            text: &p.src_text,
            span: p.src_span,
            pair: p,
        })
    } else {
        Err(CorpusError::NotEnglishPivot(p.language_pair().to_string()))
    }
}

/// Joins two English-anchored alignments of one lecture on identical English
/// spans, producing `xx -> yy` pairs scored by the weaker parent.
pub fn pivot(
    en_xx: &[TranslationPair],
    en_yy: &[TranslationPair],
) -> Result<Vec<TranslationPair>, CorpusError> {
    let Some(first) = en_xx.iter().chain(en_yy).next() else {
        return Ok(Vec::new());
    };
    if let Some(other) = en_xx
        .iter()
        .chain(en_yy)
        .find(|p| p.lecture_id != first.lecture_id)
    {
        return Err(CorpusError::LectureMismatch {
            expected: first.lecture_id.clone(),
            found: other.lecture_id.clone(),
        });
    }
    let xx: Vec<PivotSide> = en_xx.iter().map(pivot_side).collect::<Result<_, _>>()?;
    let yy: Vec<PivotSide> = en_yy.iter().map(pivot_side).collect::<Result<_, _>>()?;
    let by_span: HashMap<Span, &PivotSide> = yy.iter().map(|s| (s.en_span, s)).collect();
    Ok(xx
        .iter()
        .filter_map(|x| {
            let y = by_span.get(&x.en_span)?;
            if x.lang == y.lang {
                return None;
            }
            Some(TranslationPair {
                src_lang: x.lang,
                tgt_lang: y.lang,
                src_text: x.text.to_string(),
                tgt_text: y.text.to_string(),
                score: x.pair.score.min(y.pair.score),
                lecture_id: x.pair.lecture_id.clone(),
                course_id: x.pair.course_id.clone(),
                src_span: x.span,
                tgt_span: y.span,
                align_type: AlignType::Pivoted,
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub count: usize,
    /// Absent when `count` is zero.
    pub mean_score: Option<f64>,
    pub min_score: Option<f64>,
    pub max_score: Option<f64>,
    /// Twenty equal bins over [0, 1]; negative scores land in the first bin.
    pub histogram: Vec<usize>,
    pub align_types: BTreeMap<String, usize>,
}

impl Default for PairStats {
    fn default() -> Self {
        PairStats {
            count: 0,
            mean_score: None,
            min_score: None,
            max_score: None,
            histogram: vec![0; HISTOGRAM_BINS],
            align_types: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_pairs: usize,
    pub language_pair_count: usize,
    pub english_indic_pairs: usize,
    pub indic_indic_pairs: usize,
    /// Keyed by `src-tgt`.
    pub per_pair: BTreeMap<String, PairStats>,
    pub align_types: BTreeMap<String, usize>,
}

pub fn histogram_bin(score: f64) -> usize {
    ((score.max(0.0) * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
}

pub fn compute_stats(corpus: &Corpus) -> CorpusStats {
    let mut sums: BTreeMap<LanguagePair, (PairStats, f64)> = BTreeMap::new();
    let mut stats = CorpusStats::default();
    for p in &corpus.pairs {
        let (s, sum) = sums.entry(p.language_pair()).or_default();
        s.count += 1;
        *sum += p.score;
        s.min_score = Some(s.min_score.map_or(p.score, |m| m.min(p.score)));
        s.max_score = Some(s.max_score.map_or(p.score, |m| m.max(p.score)));
        s.histogram[histogram_bin(p.score)] += 1;
        *s.align_types.entry(p.align_type.as_str().into()).or_default() += 1;
        *stats.align_types.entry(p.align_type.as_str().into()).or_default() += 1;
    }
    stats.total_pairs = corpus.len();
    stats.language_pair_count = sums.len();
    for (lp, (mut s, sum)) in sums {
        if lp.is_english_indic() {
            stats.english_indic_pairs += 1;
        } else {
            stats.indic_indic_pairs += 1;
        }
        s.mean_score = (s.count > 0).then(|| sum / s.count as f64);
        stats.per_pair.insert(lp.to_string(), s);
    }
    stats
}

/// Plain-text table: pair counts in thousands and mean score per language pair.
pub fn render_stats_table(stats: &CorpusStats) -> String {
    let mut out = String::new();
    out.push_str("pair\tpairs_k\tmean_score\n");
    for (lp, s) in &stats.per_pair {
        let mean = s.mean_score.map_or("-".to_string(), |m| format!("{m:.4}"));
        out.push_str(&format!("{lp}\t{:.3}\t{mean}\n", s.count as f64 / 1000.0));
    }
    out.push_str(&format!(
        "total\t{:.3}\t{} language pairs ({} en-indic, {} indic-indic)\n",
        stats.total_pairs as f64 / 1000.0,
        stats.language_pair_count,
        stats.english_indic_pairs,
        stats.indic_indic_pairs
    ));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shortfall {
    pub language_pair: String,
    pub available: usize,
    pub requested: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSplit {
    pub train: Corpus,
    pub test: Corpus,
    /// Language pairs with fewer than `k` held-out pairs.
    pub shortfalls: Vec<Shortfall>,
    /// Held-out lecture ids that do not occur in the corpus.
    pub unknown_lectures: Vec<String>,
}

/// Test set: for each language pair, the `k` best-scoring pairs from held-out
/// lectures (ties by corpus order). Train: every other pair whose key does not
/// occur in the test set.
pub fn split_holdout(
    corpus: &Corpus,
    held_out_lectures: &BTreeSet<String>,
    k: usize,
) -> Result<HoldoutSplit, CorpusError> {
    if k == 0 {
        return Err(CorpusError::InvalidK);
    }
    let present: BTreeSet<&str> = corpus.pairs.iter().map(|p| p.lecture_id.as_str()).collect();
    let unknown_lectures = held_out_lectures
        .iter()
        .filter(|l| !present.contains(l.as_str()))
        .cloned()
        .collect();

    let mut candidates: BTreeMap<LanguagePair, Vec<usize>> = BTreeMap::new();
    for (i, p) in corpus.pairs.iter().enumerate() {
        let entry = candidates.entry(p.language_pair()).or_default();
        if held_out_lectures.contains(&p.lecture_id) {
            entry.push(i);
        }
    }
    let mut test_idx = Vec::new();
    let mut shortfalls = Vec::new();
    for (lp, mut idx) in candidates {
        idx.sort_by(|&a, &b| corpus.pairs[b].score.total_cmp(&corpus.pairs[a].score));
        if idx.len() < k {
            shortfalls.push(Shortfall {
                language_pair: lp.to_string(),
                available: idx.len(),
                requested: k,
            });
        }
        idx.truncate(k);
        test_idx.extend(idx);
    }
    let test_keys: HashSet<PairKey> = test_idx.iter().map(|&i| corpus.pairs[i].key()).collect();
    let in_test: HashSet<usize> = test_idx.iter().copied().collect();
    let train = corpus
        .pairs
        .iter()
        .enumerate()
        .filter(|(i, p)| !in_test.contains(i) && !test_keys.contains(&p.key()))
        .map(|(_, p)| p.clone())
        .collect();
    let test = test_idx.iter().map(|&i| corpus.pairs[i].clone()).collect();
    Ok(HoldoutSplit {
        train: Corpus {
            pairs: train,
            provenance: corpus.provenance.clone(),
        },
        test: Corpus {
            pairs: test,
            provenance: corpus.provenance.clone(),
        },
        shortfalls,
        unknown_lectures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Jsonl,
    Tsv,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Jsonl => "jsonl",
            ExportFormat::Tsv => "tsv",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(ExportFormat::Jsonl),
            "tsv" => Ok(ExportFormat::Tsv),
            other => Err(format!("unknown export format `{other}` (jsonl or tsv)")),
        }
    }
}

/// One JSON object per line, `\n` terminated.
pub fn write_jsonl<W: Write>(pairs: &[TranslationPair], mut w: W) -> Result<(), CorpusError> {
    for p in pairs {
        serde_json::to_writer(&mut w, p).map_err(|source| CorpusError::Json { line: 0, source })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<TranslationPair>, CorpusError> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| CorpusError::Json { line: n + 1, source })?,
        );
    }
    Ok(out)
}

/// Header plus `src_lang, tgt_lang, src_text, tgt_text, score` rows. Nothing is
/// written if any text contains a tab or line break.
pub fn write_tsv<W: Write>(pairs: &[TranslationPair], mut w: W) -> Result<(), CorpusError> {
    let unsafe_text = |t: &str| t.contains(['\t', '\n', '\r']);
    for (index, p) in pairs.iter().enumerate() {
        if unsafe_text(&p.src_text) {
            return Err(CorpusError::UnescapableText { index, field: "src_text" });
        }
        if unsafe_text(&p.tgt_text) {
            return Err(CorpusError::UnescapableText { index, field: "tgt_text" });
        }
    }
    writeln!(w, "src_lang\ttgt_lang\tsrc_text\ttgt_text\tscore")?;
    for p in pairs {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            p.src_lang, p.tgt_lang, p.src_text, p.tgt_text, p.score
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn export<W: Write>(pairs: &[TranslationPair], format: ExportFormat, w: W) -> Result<(), CorpusError> {
    match format {
        ExportFormat::Jsonl => write_jsonl(pairs, w),
        ExportFormat::Tsv => write_tsv(pairs, w),
    }
}
