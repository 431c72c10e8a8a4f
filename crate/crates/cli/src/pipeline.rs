use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use lecmine_core::align::{align_coarse_to_fine, extract_pairs};
use lecmine_core::corpus::{
    collate, compute_stats, dedup, export, pivot, read_jsonl, render_stats_table, split_holdout,
    write_jsonl, Corpus, CorpusStats, Provenance, Shortfall,
};
use lecmine_core::embed::{
    cache_key, embed_texts, CachedProvider, EmbeddingProvider, FileCache, MockProvider, RemoteConfig,
    RemoteProvider,
};
use lecmine_core::ingest::{parse_document, split_bilingual, ArtifactPatternSet, SplitDocument};
use lecmine_core::segment::{MonoDocument, SentenceSegmenter};
use lecmine_core::{AlignParams, LanguageCode, TranslationPair};
use log::info;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{Backend, PipelineConfig};
use crate::manifest::{file_safe, load_manifest};
use crate::{DocumentFailure, PipelineError, PipelineReport, Stage, StageReport};

const REPORT_FILE: &str = "_report.json";
const CACHE_FILE: &str = "cache.bin";
/// Sentences longer than this are flagged in the align summary.
pub const LONG_SENTENCE_CHARS: usize = 512;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Runtime(format!("{}: {e}", path.display())))
}

fn write_pairs(path: &Path, pairs: &[TranslationPair]) -> Result<(), PipelineError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_jsonl(pairs, BufWriter::new(file)).map_err(|e| PipelineError::Runtime(format!("{}: {e}", path.display())))
}

fn read_pairs(path: &Path) -> Result<Vec<TranslationPair>, PipelineError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_jsonl(BufReader::new(file)).map_err(|e| PipelineError::Runtime(format!("{}: {e}", path.display())))
}

/// Names of files in `dir` ending in `suffix`, minus the suffix, sorted.
/// Files starting with `_` are stage bookkeeping and skipped.
fn list(dir: &Path, suffix: &str) -> Result<Vec<String>, PipelineError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let name = entry.map_err(io_err(dir))?.file_name().to_string_lossy().into_owned();
        if name.starts_with('_') {
            continue;
        }
        if let Some(stem) = name.strip_suffix(suffix) {
            out.push(stem.to_string());
        }
    }
    out.sort();
    Ok(out)
}

/// Both sides of one transcript after segmentation, source first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentedPair {
    pub src: MonoDocument,
    pub tgt: MonoDocument,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedRecord {
    pub model_id: String,
    pub dimension: usize,
    pub src_sentences: usize,
    pub tgt_sentences: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub count: usize,
    pub mean_score: Option<f64>,
}

impl ScoreSummary {
    fn of(scores: impl Iterator<Item = f64>) -> Self {
        let (count, sum) = scores.fold((0usize, 0.0), |(c, s), x| (c + 1, s + x));
        ScoreSummary {
            count,
            mean_score: (count > 0).then(|| sum / count as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongSentence {
    pub language: LanguageCode,
    pub index: usize,
    pub chars: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedDocument {
    pub document: String,
    pub lecture_id: String,
    pub language_pair: String,
    pub src_sentences: usize,
    pub tgt_sentences: usize,
    pub links: usize,
    pub skips: usize,
    pub total_cost: f64,
    /// All non-skip links, before the score threshold.
    pub pre_filter: ScoreSummary,
    /// Links kept as pairs.
    pub post_filter: ScoreSummary,
    pub long_sentences: Vec<LongSentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignSummary {
    pub params: AlignParams,
    pub documents: Vec<AlignedDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub corpus: CorpusStats,
    /// Per language pair, every aligned link before thresholding. English-Indic only.
    pub pre_filter: BTreeMap<String, ScoreSummary>,
    pub long_sentences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub held_out: Vec<String>,
    pub test_top_k: usize,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub shortfalls: Vec<Shortfall>,
    pub unknown_lectures: Vec<String>,
}

pub struct Pipeline {
    config: PipelineConfig,
    pool: rayon::ThreadPool,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| PipelineError::Runtime(e.to_string()))?;
        Ok(Pipeline { config, pool })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.config.workspace.join(stage.name())
    }

    pub fn is_complete(&self, stage: Stage) -> bool {
        self.stage_dir(stage).join(REPORT_FILE).is_file()
    }

    fn stage_report(&self, stage: Stage) -> Result<StageReport, PipelineError> {
        read_json(&self.stage_dir(stage).join(REPORT_FILE))
    }

    /// Empties the stage directory. The embedding cache survives reruns.
    fn prepare(&self, stage: Stage) -> Result<PathBuf, PipelineError> {
        let dir = self.stage_dir(stage);
        if dir.exists() {
            for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
                let path = entry.map_err(io_err(&dir))?.path();
                let name = path.file_name().unwrap_or_default().to_string_lossy();
                if stage == Stage::Embed && name.starts_with(CACHE_FILE) {
                    continue;
                }
                if path.is_dir() {
                    fs::remove_dir_all(&path).map_err(io_err(&path))?;
                } else {
                    fs::remove_file(&path).map_err(io_err(&path))?;
                }
            }
        }
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(dir)
    }

    pub fn run_stage(&self, stage: Stage) -> Result<StageReport, PipelineError> {
        for &need in stage.requires() {
            if !self.is_complete(need) {
                return Err(PipelineError::MissingPriorStage { stage, missing: need });
            }
        }
        info!("{stage}: starting");
        let dir = self.prepare(stage)?;
        let mut report = self.pool.install(|| match stage {
            Stage::Ingest => self.ingest(&dir),
            Stage::Segment => self.segment(&dir),
            Stage::Embed => self.embed(&dir),
            Stage::Align => self.align(&dir),
            Stage::Pivot => self.pivot(&dir),
            Stage::Collate => self.collate(&dir),
            Stage::Stats => self.stats(&dir),
            Stage::Split => self.split(&dir),
            Stage::Export => self.export(&dir),
        })?;
        for f in &report.failures {
            log::warn!("{stage}: {}: {}", f.document, f.error);
        }
        report.failures.sort_by(|a, b| a.document.cmp(&b.document));
        write_json(&dir.join(REPORT_FILE), &report)?;
        info!(
            "{stage}: {} documents, {} pairs, {} failures",
            report.documents,
            report.pairs,
            report.failures.len()
        );
        Ok(report)
    }

    /// Runs every stage in order, stopping at the first fatal error. Outputs of
    /// completed stages are kept.
    pub fn run_all(&self) -> (PipelineReport, Option<PipelineError>) {
        let mut report = PipelineReport {
            stages: Vec::new(),
            stats: None,
            error: None,
        };
        for stage in Stage::ALL {
            match self.run_stage(stage) {
                Ok(r) => report.stages.push(r),
                Err(e) => {
                    report.error = Some(e.to_string());
                    return (report, Some(e));
                }
            }
        }
        match read_json::<StatsFile>(&self.stage_dir(Stage::Stats).join("stats.json")) {
            Ok(s) => report.stats = Some(s.corpus),
            Err(e) => return (report, Some(e)),
        }
        (report, None)
    }

    fn patterns(&self) -> Result<ArtifactPatternSet, PipelineError> {
        match &self.config.patterns {
            Some(p) => ArtifactPatternSet::load(p).map_err(|e| PipelineError::ConfigInvalid(e.to_string())),
            None => Ok(ArtifactPatternSet::default()),
        }
    }

    fn ingest(&self, dir: &Path) -> Result<StageReport, PipelineError> {
        let manifest = self
            .config
            .manifest
            .as_ref()
            .ok_or_else(|| PipelineError::ConfigInvalid("ingest needs a manifest (--manifest)".into()))?;
        let entries = load_manifest(manifest)?;
        let patterns = self.patterns()?;
        let mut report = StageReport::new(Stage::Ingest);
        report.detail("pattern_set_version", &patterns.version);
        if entries.is_empty() {
            report.warn(format!("manifest {} lists no transcripts", manifest.display()));
        }
        let results: Vec<(String, Result<SplitDocument, String>)> = entries
            .par_iter()
            .map(|entry| {
                let id = entry.document_id();
                let split = fs::read(&entry.meta.source_path)
                    .map_err(|e| format!("{}: {e}", entry.meta.source_path.display()))
                    .and_then(|raw| parse_document(&raw, entry.meta.clone(), &patterns).map_err(|e| e.to_string()))
                    .and_then(|doc| split_bilingual(doc).map_err(|e| e.to_string()));
                (id, split)
            })
            .collect();
        let mut lectures = BTreeSet::new();
        let mut flagged = 0;
        for (id, res) in results {
            match res {
                Ok(split) => {
                    write_json(&dir.join(format!("{id}.json")), &split)?;
                    lectures.insert(split.meta.lecture_id.clone());
                    flagged += split.flagged().count();
                    report.documents += 1;
                }
                Err(error) => report.failures.push(DocumentFailure { document: id, error }),
            }
        }
        report.lectures = lectures.len();
        report.detail("flagged_blocks", flagged);
        Ok(report)
    }

    fn segment(&self, dir: &Path) -> Result<StageReport, PipelineError> {
        let src_dir = self.stage_dir(Stage::Ingest);
        let segmenter = match &self.config.abbreviations {
            Some(p) => SentenceSegmenter::from_file(p).map_err(io_err(p))?,
            None => SentenceSegmenter::default(),
        };
        let ids = list(&src_dir, ".json")?;
        let results: Vec<(String, Result<SegmentedPair, PipelineError>)> = ids
            .par_iter()
            .map(|id| {
                let res = read_json::<SplitDocument>(&src_dir.join(format!("{id}.json"))).map(|split| {
                    let meta = split.meta;
                    let en = MonoDocument::from_blocks(meta.clone(), LanguageCode::En, &split.english, &segmenter);
                    let indic = MonoDocument::from_blocks(meta.clone(), split.indic_language, &split.indic, &segmenter);
                    if meta.language_pair.source == LanguageCode::En {
                        SegmentedPair { src: en, tgt: indic }
                    } else {
                        SegmentedPair { src: indic, tgt: en }
                    }
                });
                (id.clone(), res)
            })
            .collect();
        let mut report = StageReport::new(Stage::Segment);
        let mut lectures = BTreeSet::new();
        for (id, res) in results {
            let seg = res?;
            if let Some(empty) = [&seg.src, &seg.tgt].into_iter().find(|d| d.is_empty()) {
                report.failures.push(DocumentFailure {
                    document: id,
                    error: format!("no {} sentences", empty.language),
                });
                continue;
            }
            for d in [&seg.src, &seg.tgt] {
                let consistency = d.script_consistency();
                if consistency < 0.9 {
                    report.warn(format!(
                        "{id}: only {:.0}% of {} sentences are in the expected script",
                        consistency * 100.0,
                        d.language
                    ));
                }
                let lines: String = d.sentences.iter().map(|s| format!("{}\n", s.text)).collect();
                let path = dir.join(format!("{id}.{}.txt", d.language));
                fs::write(&path, lines).map_err(io_err(&path))?;
            }
            write_json(&dir.join(format!("{id}.json")), &seg)?;
            lectures.insert(seg.src.meta.lecture_id.clone());
            report.documents += 1;
        }
        report.lectures = lectures.len();
        Ok(report)
    }

    fn provider(&self) -> Result<Box<dyn EmbeddingProvider>, PipelineError> {
        let p = &self.config.provider;
        match p.backend {
            Backend::Mock => {
                let mut mock = MockProvider::new(p.dimension);
                if let Some(path) = &p.mock_aliases {
                    mock = mock.load_aliases(path).map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
                }
                Ok(Box::new(mock))
            }
            Backend::Remote => {
                let mut rc = RemoteConfig::new(p.endpoint.clone().unwrap_or_default());
                rc.batch_size = p.batch_size;
                rc.max_in_flight = p.max_in_flight;
                rc.max_retries = p.retries;
                Ok(Box::new(RemoteProvider::connect(rc).map_err(PipelineError::Embedding)?))
            }
        }
    }

    fn embed(&self, dir: &Path) -> Result<StageReport, PipelineError> {
        let seg_dir = self.stage_dir(Stage::Segment);
        let ids = list(&seg_dir, ".json")?;
        let docs: Vec<(String, SegmentedPair)> = ids
            .into_iter()
            .map(|id| read_json(&seg_dir.join(format!("{id}.json"))).map(|d| (id, d)))
            .collect::<Result<_, _>>()?;

        let provider = self.provider()?;
        let (model_id, dimension) = (provider.model_id().to_string(), provider.dimension());
        let cache = FileCache::open(dir.join(CACHE_FILE)).map_err(PipelineError::Embedding)?;
        let mut seen = HashSet::new();
        let mut total = 0usize;
        let mut missing = Vec::new();
        for (_, d) in &docs {
            for s in d.src.sentences.iter().chain(&d.tgt.sentences) {
                let key = cache_key(&s.text, &model_id, dimension);
                if seen.insert(key) {
                    total += 1;
                    if !cache.contains(key) {
                        missing.push(s.text.clone());
                    }
                }
            }
        }
        info!("embed: {} distinct sentences, {} not cached", total, missing.len());
        let cached = CachedProvider::with_fallback(cache, provider);
        let chunk = self.config.provider.batch_size * self.config.provider.max_in_flight;
        embed_texts(&missing, None, &cached, chunk).map_err(PipelineError::Embedding)?;
        cached.cache().flush().map_err(PipelineError::Embedding)?;

        let mut report = StageReport::new(Stage::Embed);
        let mut lectures = BTreeSet::new();
        for (id, d) in &docs {
            let record = EmbedRecord {
                model_id: model_id.clone(),
                dimension,
                src_sentences: d.src.len(),
                tgt_sentences: d.tgt.len(),
            };
            write_json(&dir.join(format!("{id}.json")), &record)?;
            lectures.insert(d.src.meta.lecture_id.clone());
            report.documents += 1;
        }
        report.lectures = lectures.len();
        report.detail("model_id", &model_id);
        report.detail("dimension", dimension);
        report.detail("distinct_sentences", total);
        report.detail("newly_embedded", missing.len());
        Ok(report)
    }

    fn align(&self, dir: &Path) -> Result<StageReport, PipelineError> {
        let seg_dir = self.stage_dir(Stage::Segment);
        let emb_dir = self.stage_dir(Stage::Embed);
        let ids = list(&emb_dir, ".json")?;
        let cache = FileCache::open(emb_dir.join(CACHE_FILE)).map_err(PipelineError::Embedding)?;
        let params = &self.config.align;

        let align_one = |id: &String| -> Result<Result<(AlignedDocument, Vec<TranslationPair>), String>, PipelineError> {
            let seg: SegmentedPair = read_json(&seg_dir.join(format!("{id}.json")))?;
            let rec: EmbedRecord = read_json(&emb_dir.join(format!("{id}.json")))?;
            let lookup = |d: &MonoDocument| {
                d.sentences
                    .iter()
                    .map(|s| cache.get(&s.text, &rec.model_id, rec.dimension))
                    .collect::<Result<Vec<_>, _>>()
            };
            let vectors = lookup(&seg.src).and_then(|s| Ok((s, lookup(&seg.tgt)?)));
            let (sv, tv) = match vectors {
                Ok(v) => v,
                Err(e) => return Ok(Err(e.to_string())),
            };
            let path = match align_coarse_to_fine(&sv, &tv, params) {
                Ok(p) => p,
                Err(e) => return Ok(Err(e.to_string())),
            };
            let pairs = extract_pairs(&path, &seg.src, &seg.tgt, params);
            let links_path = dir.join(format!("{id}.links.tsv"));
            let mut w = BufWriter::new(File::create(&links_path).map_err(io_err(&links_path))?);
            path.write_tsv(&mut w)
                .and_then(|_| w.flush())
                .map_err(io_err(&links_path))?;
            write_pairs(&dir.join(format!("{id}.pairs.jsonl")), &pairs)?;
            let long_sentences = [&seg.src, &seg.tgt]
                .into_iter()
                .flat_map(|d| {
                    d.sentences.iter().filter_map(move |s| {
                        let chars = s.text.chars().count();
                        (chars > LONG_SENTENCE_CHARS).then_some(LongSentence {
                            language: d.language,
                            index: s.index,
                            chars,
                        })
                    })
                })
                .collect();
            let summary = AlignedDocument {
                document: id.clone(),
                lecture_id: seg.src.meta.lecture_id.clone(),
                language_pair: seg.src.meta.language_pair.to_string(),
                src_sentences: seg.src.len(),
                tgt_sentences: seg.tgt.len(),
                links: path.links.len(),
                skips: path.links.iter().filter(|l| l.is_skip()).count(),
                total_cost: path.total_cost,
                pre_filter: ScoreSummary::of(path.matches().filter_map(|l| l.score)),
                post_filter: ScoreSummary::of(pairs.iter().map(|p| p.score)),
                long_sentences,
            };
            Ok(Ok((summary, pairs)))
        };
        let results: Vec<_> = ids.par_iter().map(|id| (id.clone(), align_one(id))).collect();

        let mut report = StageReport::new(Stage::Align);
        let mut summary = AlignSummary {
            params: params.clone(),
            documents: Vec::new(),
        };
        let mut lectures = BTreeSet::new();
        for (id, res) in results {
            match res? {
                Ok((doc, pairs)) => {
                    report.pairs += pairs.len();
                    report.documents += 1;
                    lectures.insert(doc.lecture_id.clone());
                    if !doc.long_sentences.is_empty() {
                        report.warn(format!(
                            "{id}: {} sentences longer than {LONG_SENTENCE_CHARS} characters",
                            doc.long_sentences.len()
                        ));
                    }
                    summary.documents.push(doc);
                }
                Err(error) => report.failures.push(DocumentFailure { document: id, error }),
            }
        }
        report.lectures = lectures.len();
        report.detail("params", params);
        write_json(&dir.join("summary.json"), &summary)?;
        Ok(report)
    }

    fn pivot(&self, dir: &Path) -> Result<StageReport, PipelineError> {
        let align_dir = self.stage_dir(Stage::Align);
        let summary: AlignSummary = read_json(&align_dir.join("summary.json"))?;
        // lecture -> Indic language -> document id
        let mut by_lecture: BTreeMap<&str, BTreeMap<LanguageCode, &str>> = BTreeMap::new();
        let mut report = StageReport::new(Stage::Pivot);
        for d in &summary.documents {
            let pair: lecmine_core::LanguagePair = d
                .language_pair
                .parse()
                .map_err(|e| PipelineError::Runtime(format!("{}: {e}", d.document)))?;
            let Some(indic) = pair.indic_side() else { continue };
            let slot = by_lecture.entry(&d.lecture_id).or_default();
            if let Some(prev) = slot.insert(indic, &d.document) {
                report.warn(format!(
                    "{}: {prev} and {} share a language; using {}",
                    d.lecture_id, d.document, d.document
                ));
            }
        }
        for (lecture, docs) in &by_lecture {
            let docs: Vec<(&LanguageCode, &&str)> = docs.iter().collect();
            if docs.len() < 2 {
                continue;
            }
            report.lectures += 1;
            for (i, (x, xdoc)) in docs.iter().enumerate() {
                for (y, ydoc) in &docs[i + 1..] {
                    let px = read_pairs(&align_dir.join(format!("{xdoc}.pairs.jsonl")))?;
                    let py = read_pairs(&align_dir.join(format!("{ydoc}.pairs.jsonl")))?;
                    let name = format!("{}.{x}-{y}", file_safe(lecture));
                    match pivot(&px, &py) {
                        Ok(pairs) => {
                            write_pairs(&dir.join(format!("{name}.jsonl")), &pairs)?;
                            report.pairs += pairs.len();
                            report.documents += 1;
                        }
                        Err(e) => report.failures.push(DocumentFailure {
                            document: name,
                            error: e.to_string(),
                        }),
                    }
                }
            }
        }
        Ok(report)
    }

    fn collate(&self, dir: &Path) -> Result<StageReport, PipelineError> {
        let align_dir = self.stage_dir(Stage::Align);
        let pivot_dir = self.stage_dir(Stage::Pivot);
        let mut groups = Vec::new();
        for id in list(&align_dir, ".pairs.jsonl")? {
            groups.push(read_pairs(&align_dir.join(format!("{id}.pairs.jsonl")))?);
        }
        for id in list(&pivot_dir, ".jsonl")? {
            groups.push(read_pairs(&pivot_dir.join(format!("{id}.jsonl")))?);
        }
        let ingest = self.stage_report(Stage::Ingest)?;
        let embed = self.stage_report(Stage::Embed)?;
        let summary: AlignSummary = read_json(&align_dir.join("summary.json"))?;
        let text = |r: &StageReport, k: &str| r.details.get(k).and_then(|v| v.as_str()).map(str::to_string);
        let provenance = Provenance {
            pipeline_version: env!("CARGO_PKG_VERSION").to_string(),
            params: Some(summary.params),
            pattern_set_version: text(&ingest, "pattern_set_version"),
            embedding_model: text(&embed, "model_id"),
        };
        let corpus = collate(groups, provenance).map_err(|e| PipelineError::Runtime(e.to_string()))?;
        let before = corpus.len();
        let corpus = dedup(corpus);
        write_pairs(&dir.join("corpus.jsonl"), &corpus.pairs)?;
        write_json(&dir.join("provenance.json"), &corpus.provenance)?;

        let mut report = StageReport::new(Stage::Collate);
        report.pairs = corpus.len();
        report.lectures = corpus.pairs.iter().map(|p| &p.lecture_id).collect::<BTreeSet<_>>().len();
        report.detail("pairs_before_dedup", before);
        report.detail("duplicates_removed", before - corpus.len());
        if corpus.is_empty() {
            report.warn("the collated corpus is empty".into());
        }
        Ok(report)
    }

    fn load_corpus(&self) -> Result<Corpus, PipelineError> {
        let dir = self.stage_dir(Stage::Collate);
        Ok(Corpus {
            pairs: read_pairs(&dir.join("corpus.jsonl"))?,
            provenance: read_json(&dir.join("provenance.json"))?,
        })
    }

    fn stats(&self, dir: &Path) -> Result<StageReport, PipelineError> {
        let corpus = self.load_corpus()?;
        let summary: AlignSummary = read_json(&self.stage_dir(Stage::Align).join("summary.json"))?;
        let mut sums: BTreeMap<String, (usize, f64)> = BTreeMap::new();
        for d in &summary.documents {
            let e = sums.entry(d.language_pair.clone()).or_default();
            e.0 += d.pre_filter.count;
            e.1 += d.pre_filter.mean_score.unwrap_or(0.0) * d.pre_filter.count as f64;
        }
        let pre_filter = sums
            .into_iter()
            .map(|(k, (count, sum))| {
                let s = ScoreSummary {
                    count,
                    mean_score: (count > 0).then(|| sum / count as f64),
                };
                (k, s)
            })
            .collect();
        let file = StatsFile {
            corpus: compute_stats(&corpus),
            pre_filter,
            long_sentences: summary.documents.iter().map(|d| d.long_sentences.len()).sum(),
        };
        write_json(&dir.join("stats.json"), &file)?;
        let table = render_stats_table(&file.corpus);
        let path = dir.join("stats.txt");
        fs::write(&path, &table).map_err(io_err(&path))?;
        eprint!("{table}");

        let mut report = StageReport::new(Stage::Stats);
        report.pairs = corpus.len();
        report.lectures = corpus.pairs.iter().map(|p| &p.lecture_id).collect::<BTreeSet<_>>().len();
        Ok(report)
    }

    fn split(&self, dir: &Path) -> Result<StageReport, PipelineError> {
        let corpus = self.load_corpus()?;
        let held: BTreeSet<String> = self.config.holdout.iter().cloned().collect();
        let k = self.config.test_top_k;
        let split = split_holdout(&corpus, &held, k).map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
        write_pairs(&dir.join("train.jsonl"), &split.train.pairs)?;
        write_pairs(&dir.join("test.jsonl"), &split.test.pairs)?;

        let mut report = StageReport::new(Stage::Split);
        if held.is_empty() {
            report.warn("no holdout lectures configured; the test set is empty".into());
        } else {
            for s in &split.shortfalls {
                report.warn(format!(
                    "{}: {} held-out pairs available for a test set of {}",
                    s.language_pair, s.available, s.requested
                ));
            }
        }
        for l in &split.unknown_lectures {
            report.warn(format!("holdout lecture {l} is not in the corpus"));
        }
        report.pairs = split.train.len() + split.test.len();
        report.detail("train_pairs", split.train.len());
        report.detail("test_pairs", split.test.len());
        write_json(
            &dir.join("split.json"),
            &SplitSummary {
                held_out: held.into_iter().collect(),
                test_top_k: k,
                train_pairs: split.train.len(),
                test_pairs: split.test.len(),
                shortfalls: split.shortfalls,
                unknown_lectures: split.unknown_lectures,
            },
        )?;
        Ok(report)
    }

    fn export(&self, dir: &Path) -> Result<StageReport, PipelineError> {
        let format = self.config.format;
        let mut sets = vec![("corpus", self.load_corpus()?.pairs)];
        if self.is_complete(Stage::Split) {
            let split_dir = self.stage_dir(Stage::Split);
            sets.push(("train", read_pairs(&split_dir.join("train.jsonl"))?));
            sets.push(("test", read_pairs(&split_dir.join("test.jsonl"))?));
        }
        let mut report = StageReport::new(Stage::Export);
        for (name, pairs) in &sets {
            let path = dir.join(format!("{name}.{}", format.extension()));
            let file = File::create(&path).map_err(io_err(&path))?;
            export(pairs, format, BufWriter::new(file))
                .map_err(|e| PipelineError::Runtime(format!("{}: {e}", path.display())))?;
            report.documents += 1;
        }
        report.pairs = sets[0].1.len();
        report.detail("format", format.extension());
        Ok(report)
    }
}
