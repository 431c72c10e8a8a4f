//! Embedding-based sentence alignment.
//!
//! Two documents are aligned by a monotone dynamic program over sentence
//! boundaries. A move consumes `a` source and `b` target sentences: skips are
//! `(1,0)` and `(0,1)`, matches are `(1,k)` or `(k,1)` with `k <= max_merge`.
//! A match costs the cosine distance of the merged-block embeddings weighted by
//! the number of sentences it covers; a skip costs `skip_cost` per sentence.
//!
//! [`align_exact`] fills the whole lattice. [`align_coarse_to_fine`] merges
//! neighbouring sentences until the lattice is small enough, aligns that, and
//! refines level by level inside a band around the projected path.

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{AlignType, Span, TranslationPair};
use crate::embed::{dot, EmbeddingVector};
use crate::segment::MonoDocument;

/// Sums with a smaller norm than this are treated as cancelled out.
pub const DEGENERATE_NORM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlignError {
    #[error("lattice {n}x{m} exceeds the exact alignment limit of {limit} cells")]
    InputTooLarge { n: usize, m: usize, limit: usize },
    #[error("merged block has zero norm")]
    DegenerateBlock,
    #[error("embedding dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("invalid alignment parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignParams {
    /// Largest n of a 1-n or n-1 link.
    pub max_merge: usize,
    /// Cost per skipped sentence.
    pub skip_cost: f64,
    /// Minimum link score for a pair to be extracted.
    pub keep_threshold: f64,
    /// Half-width of the refinement band, in sentences.
    pub band_width: usize,
    /// Largest lattice (n * m) aligned without coarsening.
    pub exact_limit: usize,
    /// Number of sampled sentences for margin correction; 0 disables it.
    #[serde(default)]
    pub margin_samples: usize,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            max_merge: 4,
            skip_cost: 0.35,
            keep_threshold: 0.70,
            band_width: 10,
            exact_limit: 10_000,
            margin_samples: 0,
        }
    }
}

impl AlignParams {
    pub fn validate(&self) -> Result<(), AlignError> {
        let bad = |m: String| Err(AlignError::InvalidParams(m));
        if self.max_merge < 1 {
            return bad("max_merge must be at least 1".into());
        }
        if !(self.skip_cost > 0.0 && self.skip_cost.is_finite()) {
            return bad(format!("skip_cost must be positive, got {}", self.skip_cost));
        }
        if !(-1.0..=1.0).contains(&self.keep_threshold) {
            return bad(format!(
                "keep_threshold must lie in [-1, 1], got {}",
                self.keep_threshold
            ));
        }
        if self.band_width < 1 {
            return bad("band_width must be at least 1".into());
        }
        if self.exact_limit < 1 {
            return bad("exact_limit must be at least 1".into());
        }
        Ok(())
    }

    /// Allowed moves in tie-break order: (1,1), then fewer sentences, then fewer
    /// source sentences. Skips come out ahead of merges because they are shorter.
    pub fn moves(&self) -> Vec<(usize, usize)> {
        let mut moves = vec![(1, 1), (0, 1), (1, 0)];
        for k in 2..=self.max_merge {
            moves.push((1, k));
            moves.push((k, 1));
        }
        moves
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub source: Span,
    pub target: Span,
    /// Cosine of the merged blocks; `None` for skips.
    pub score: Option<f64>,
}

impl Link {
    pub fn is_skip(&self) -> bool {
        self.source.is_empty() || self.target.is_empty()
    }

    pub fn align_type(&self) -> Option<AlignType> {
        match (self.source.len(), self.target.len()) {
            (0, _) | (_, 0) => None,
            (1, 1) => Some(AlignType::OneToOne),
            (1, _) => Some(AlignType::OneToMany),
            _ => Some(AlignType::ManyToOne),
        }
    }

    pub fn mirrored(&self) -> Link {
        Link {
            source: self.target,
            target: self.source,
            score: self.score,
        }
    }
}

impl fmt::Display for Link {
    /// Tab-separated `source  target  score  type`; spans are half-open `start..end`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let score = self.score.map_or("-".to_string(), |s| format!("{s:.6}"));
        let kind = self.align_type().map_or("skip", AlignType::as_str);
        write!(f, "{}\t{}\t{score}\t{kind}", self.source, self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentPath {
    pub links: Vec<Link>,
    pub total_cost: f64,
}

impl AlignmentPath {
    /// True when the links are monotone and cover `0..n` and `0..m` exactly once.
    pub fn is_partition(&self, n: usize, m: usize) -> bool {
        let (mut i, mut j) = (0, 0);
        for l in &self.links {
            if l.source.start != i || l.target.start != j || (l.source.is_empty() && l.target.is_empty()) {
                return false;
            }
            i = l.source.end;
            j = l.target.end;
        }
        i == n && j == m
    }

    pub fn matches(&self) -> impl Iterator<Item = &Link> {
        self.links.iter().filter(|l| !l.is_skip())
    }

    /// One line per link, see [`Link`]'s `Display`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for l in &self.links {
            writeln!(w, "{l}")?;
        }
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Componentwise sum in double precision; fails when it cancels out.
fn block_sum(vectors: &[&EmbeddingVector]) -> Result<Vec<f64>, AlignError> {
    let first = vectors.first().ok_or(AlignError::DegenerateBlock)?;
    let mut sum = vec![0.0f64; first.dim()];
    for v in vectors {
        if v.dim() != first.dim() {
            return Err(AlignError::DimensionMismatch(first.dim(), v.dim()));
        }
        for (s, x) in sum.iter_mut().zip(v.values()) {
            *s += f64::from(*x);
        }
    }
    if norm(&sum) < DEGENERATE_NORM {
        return Err(AlignError::DegenerateBlock);
    }
    Ok(sum)
}

/// Sum of the vectors, renormalized.
pub fn block_embedding(vectors: &[&EmbeddingVector]) -> Result<EmbeddingVector, AlignError> {
    EmbeddingVector::normalized(&block_sum(vectors)?).map_err(|_| AlignError::DegenerateBlock)
}

fn clamp_cos(c: f64) -> f64 {
    c.clamp(-1.0, 1.0)
}

fn match_cost(cos: f64, a: usize, b: usize) -> f64 {
    ((1.0 - cos) * (a + b) as f64 / 2.0).max(0.0)
}

/// Cost of linking two blocks; an empty side makes it a skip of the other.
pub fn link_cost(
    source: &[&EmbeddingVector],
    target: &[&EmbeddingVector],
    params: &AlignParams,
) -> Result<f64, AlignError> {
    match (source.len(), target.len()) {
        (0, 0) => Ok(0.0),
        (k, 0) | (0, k) => Ok(k as f64 * params.skip_cost),
        (a, b) => {
            let x = block_sum(source)?;
            let y = block_sum(target)?;
            if x.len() != y.len() {
                return Err(AlignError::DimensionMismatch(x.len(), y.len()));
            }
            let num: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
            Ok(match_cost(clamp_cos(num / (norm(&x) * norm(&y))), a, b))
        }
    }
}

/// Per-side precomputation: norms of every mergeable block and, optionally, the
/// margin term for it.
struct Side<'a> {
    vectors: &'a [EmbeddingVector],
    /// `norms[end * max_merge + size - 1]` for the block `end - size .. end`.
    norms: Vec<f64>,
    margins: Vec<f64>,
    max_merge: usize,
}

impl<'a> Side<'a> {
    fn new(vectors: &'a [EmbeddingVector], max_merge: usize) -> Result<Self, AlignError> {
        let n = vectors.len();
        let mut norms = vec![f64::NAN; (n + 1) * max_merge];
        for end in 1..=n {
            let mut sq = 0.0f64;
            for size in 1..=max_merge.min(end) {
                let k = end - size;
                let vk = vectors[k].values();
                sq += dot(vk, vk);
                for l in k + 1..end {
                    sq += 2.0 * dot(vk, vectors[l].values());
                }
                let norm = sq.max(0.0).sqrt();
                if norm < DEGENERATE_NORM {
                    return Err(AlignError::DegenerateBlock);
                }
                norms[end * max_merge + size - 1] = norm;
            }
        }
        Ok(Side {
            vectors,
            norms,
            margins: Vec::new(),
            max_merge,
        })
    }

    fn norm(&self, end: usize, size: usize) -> f64 {
        self.norms[end * self.max_merge + size - 1]
    }

    fn margin(&self, end: usize, size: usize) -> f64 {
        if self.margins.is_empty() {
            0.0
        } else {
            self.margins[end * self.max_merge + size - 1]
        }
    }

    /// Mean cosine of each block to `samples` sentences of the other side, picked
    /// by a fixed stride so the result is deterministic.
    fn compute_margins(&mut self, other: &[EmbeddingVector], samples: usize) {
        if samples == 0 || other.is_empty() {
            return;
        }
        let picks: Vec<&EmbeddingVector> = (0..samples)
            .map(|s| &other[(s * 7919 + 13) % other.len()])
            .collect();
        let n = self.vectors.len();
        let mut margins = vec![0.0; (n + 1) * self.max_merge];
        for end in 1..=n {
            for size in 1..=self.max_merge.min(end) {
                let norm = self.norm(end, size);
                let mut total = 0.0;
                for p in &picks {
                    let num: f64 = (end - size..end)
                        .map(|k| dot(self.vectors[k].values(), p.values()))
                        .sum();
                    total += num / (norm * p.norm());
                }
                margins[end * self.max_merge + size - 1] = total / picks.len() as f64;
            }
        }
        self.margins = margins;
    }
}

/// Allowed DP nodes: for each row `i` in `0..=n`, columns `lo[i]..=hi[i]`.
struct Band {
    lo: Vec<usize>,
    hi: Vec<usize>,
}

impl Band {
    fn full(n: usize, m: usize) -> Self {
        Band {
            lo: vec![0; n + 1],
            hi: vec![m; n + 1],
        }
    }

    fn contains(&self, i: usize, j: usize) -> bool {
        j >= self.lo[i] && j <= self.hi[i]
    }

    fn cells(&self) -> usize {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l + 1).sum()
    }
}

/// Sentence similarities for the cells the DP can touch, stored row by row.
struct Similarities {
    lo: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl Similarities {
    fn new(src: &[EmbeddingVector], tgt: &[EmbeddingVector], band: &Band, max_merge: usize) -> Self {
        let n = src.len();
        let m = tgt.len();
        let mut lo = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n);
        for r in 0..n {
            // Nodes i in r+1 ..= r+max_merge reach back to sentence row r.
            let last = (r + max_merge).min(n);
            let from = (r + 1..=last).map(|i| band.lo[i]).min().unwrap_or(0);
            let to = (r + 1..=last).map(|i| band.hi[i]).max().unwrap_or(0);
            if m == 0 || to == 0 {
                lo.push(0);
                rows.push(Vec::new());
                continue;
            }
            let start = from.saturating_sub(max_merge);
            let end = to.min(m);
            lo.push(start);
            rows.push(
                (start..end)
                    .map(|c| dot(src[r].values(), tgt[c].values()))
                    .collect(),
            );
        }
        Similarities { lo, rows }
    }

    fn get(&self, r: usize, c: usize) -> f64 {
        self.rows[r][c - self.lo[r]]
    }
}

fn check_dims(src: &[EmbeddingVector], tgt: &[EmbeddingVector]) -> Result<(), AlignError> {
    let mut dims = src.iter().chain(tgt).map(EmbeddingVector::dim);
    if let Some(d) = dims.next() {
        if let Some(other) = dims.find(|&x| x != d) {
            return Err(AlignError::DimensionMismatch(d, other));
        }
    }
    Ok(())
}

fn banded_dp(
    src: &[EmbeddingVector],
    tgt: &[EmbeddingVector],
    band: &Band,
    params: &AlignParams,
) -> Result<AlignmentPath, AlignError> {
    let n = src.len();
    let m = tgt.len();
    let mm = params.max_merge;
    let mut src_side = Side::new(src, mm)?;
    let mut tgt_side = Side::new(tgt, mm)?;
    if params.margin_samples > 0 {
        src_side.compute_margins(tgt, params.margin_samples);
        tgt_side.compute_margins(src, params.margin_samples);
    }
    let sims = Similarities::new(src, tgt, band, mm);
    let moves = params.moves();

    // Cosine of the block ending at node (i, j) for a non-skip move (a, b).
    let cosine = |i: usize, j: usize, a: usize, b: usize| -> (f64, f64) {
        let num: f64 = if a == 1 {
            (j - b..j).map(|c| sims.get(i - 1, c)).sum()
        } else {
            (i - a..i).map(|r| sims.get(r, j - 1)).sum()
        };
        let cos = clamp_cos(num / (src_side.norm(i, a) * tgt_side.norm(j, b)));
        let adjusted = if params.margin_samples > 0 {
            clamp_cos(cos - (src_side.margin(i, a) + tgt_side.margin(j, b)) / 2.0)
        } else {
            cos
        };
        (cos, adjusted)
    };

    let mut cost: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut back: Vec<Vec<u8>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let (lo, hi) = (band.lo[i], band.hi[i]);
        let mut row_cost = vec![f64::INFINITY; hi - lo + 1];
        let mut row_back = vec![u8::MAX; hi - lo + 1];
        for j in lo..=hi {
            if i == 0 && j == 0 {
                row_cost[0] = 0.0;
                continue;
            }
            let mut best = f64::INFINITY;
            let mut best_move = u8::MAX;
            for (k, &(a, b)) in moves.iter().enumerate() {
                if a > i || b > j || !band.contains(i - a, j - b) {
                    continue;
                }
                let prev = if a == 0 {
                    row_cost[j - b - lo]
                } else {
                    cost[i - a][j - b - band.lo[i - a]]
                };
                if !prev.is_finite() {
                    continue;
                }
                let step = if a == 0 || b == 0 {
                    params.skip_cost
                } else {
                    match_cost(cosine(i, j, a, b).1, a, b)
                };
                let cand = prev + step;
                if cand < best {
                    best = cand;
                    best_move = k as u8;
                }
            }
            row_cost[j - lo] = best;
            row_back[j - lo] = best_move;
        }
        cost.push(row_cost);
        back.push(row_back);
    }

    let total_cost = cost[n][m - band.lo[n]];
    debug_assert!(total_cost.is_finite(), "band admits no path");
    let mut links = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let (a, b) = moves[back[i][j - band.lo[i]] as usize];
        let score = (a > 0 && b > 0).then(|| cosine(i, j, a, b).0);
        links.push(Link {
            source: Span::new(i - a, i),
            target: Span::new(j - b, j),
            score,
        });
        i -= a;
        j -= b;
    }
    links.reverse();
    Ok(AlignmentPath { links, total_cost })
}

/// Minimum-cost alignment over the full lattice.
pub fn align_exact(
    src: &[EmbeddingVector],
    tgt: &[EmbeddingVector],
    params: &AlignParams,
) -> Result<AlignmentPath, AlignError> {
    params.validate()?;
    check_dims(src, tgt)?;
    let (n, m) = (src.len(), tgt.len());
    if n.saturating_mul(m) > params.exact_limit {
        return Err(AlignError::InputTooLarge {
            n,
            m,
            limit: params.exact_limit,
        });
    }
    banded_dp(src, tgt, &Band::full(n, m), params)
}

/// Merges sentence pairs `(0,1), (2,3), ...`; an odd last sentence stays alone.
fn halve(vectors: &[EmbeddingVector]) -> Result<Vec<EmbeddingVector>, AlignError> {
    if vectors.len() <= 1 {
        return Ok(vectors.to_vec());
    }
    vectors
        .chunks(2)
        .map(|c| match c {
            [a, b] => block_embedding(&[a, b]),
            [a] => Ok(a.clone()),
            _ => unreachable!(),
        })
        .collect()
}

/// Band of half-width `w` around a coarse path scaled up by two.
fn project(coarse: &AlignmentPath, n: usize, m: usize, w: usize) -> Band {
    let mut nodes = vec![(0usize, 0usize)];
    for l in &coarse.links {
        nodes.push(((2 * l.source.end).min(n), (2 * l.target.end).min(m)));
    }
    let mut row_lo = vec![usize::MAX; n + 1];
    let mut row_hi = vec![0usize; n + 1];
    let mut visit = |i: usize, j: usize| {
        row_lo[i] = row_lo[i].min(j);
        row_hi[i] = row_hi[i].max(j);
    };
    visit(0, 0);
    for pair in nodes.windows(2) {
        let (i0, j0) = pair[0];
        let (i1, j1) = pair[1];
        let (mut i, mut j) = (i0, j0);
        // Unit staircase hugging the segment from (i0, j0) to (i1, j1).
        while (i, j) != (i1, j1) {
            let step_row = i < i1 && (j == j1 || (i - i0) * (j1 - j0) <= (j - j0) * (i1 - i0));
            if step_row {
                i += 1;
            } else {
                j += 1;
            }
            visit(i, j);
        }
    }
    let lo = row_lo.iter().map(|&l| l.saturating_sub(w)).collect();
    let hi = row_hi.iter().map(|&h| (h + w).min(m)).collect();
    Band { lo, hi }
}

/// Alignment through successively coarser documents; equal to [`align_exact`]
/// whenever the lattice already fits under `exact_limit`.
pub fn align_coarse_to_fine(
    src: &[EmbeddingVector],
    tgt: &[EmbeddingVector],
    params: &AlignParams,
) -> Result<AlignmentPath, AlignError> {
    params.validate()?;
    check_dims(src, tgt)?;
    let (n, m) = (src.len(), tgt.len());
    if n.saturating_mul(m) <= params.exact_limit {
        return align_exact(src, tgt, params);
    }
    let coarse_src = halve(src)?;
    let coarse_tgt = halve(tgt)?;
    let coarse = align_coarse_to_fine(&coarse_src, &coarse_tgt, params)?;
    let band = project(&coarse, n, m, params.band_width);
    log::trace!("refining {n}x{m} within {} cells", band.cells());
    banded_dp(src, tgt, &band, params)
}

/// Turns every match scoring at least `keep_threshold` into a translation pair.
pub fn extract_pairs(
    path: &AlignmentPath,
    src_doc: &MonoDocument,
    tgt_doc: &MonoDocument,
    params: &AlignParams,
) -> Vec<TranslationPair> {
    let join = |doc: &MonoDocument, span: Span| {
        doc.sentences[span.start..span.end]
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    };
    path.links
        .iter()
        .filter_map(|l| {
            let kind = l.align_type()?;
            let score = l.score?;
            (score >= params.keep_threshold).then(|| TranslationPair {
                src_lang: src_doc.language,
                tgt_lang: tgt_doc.language,
                src_text: join(src_doc, l.source),
                tgt_text: join(tgt_doc, l.target),
                score,
                lecture_id: src_doc.meta.lecture_id.clone(),
                course_id: src_doc.meta.course_id.clone(),
                src_span: l.source,
                tgt_span: l.target,
                align_type: kind,
            })
        })
        .collect()
}
