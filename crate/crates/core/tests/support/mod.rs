//! Test-only helpers: a brute-force alignment oracle, planted-link fixtures,
//! link F1, text oracles and one `check_*` function per acceptance criterion.
//! Shared with the acceptance suite in the cli crate.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};
use std::time::Instant;

use lecmine_core::corpus::{dedup, pivot, split_holdout, Corpus};
use lecmine_core::embed::{noisy_copy, random_unit};
use lecmine_core::ingest::{parse_document, split_bilingual, strip_artifacts, ArtifactPatternSet, IngestError};
use lecmine_core::segment::{classify_script, segment_sentences, ScriptClass};
use lecmine_core::{
    align_coarse_to_fine, align_exact, AlignParams, AlignType, AlignmentPath, EmbeddingVector, LanguageCode, LectureMeta,
    Script, Span, TranslationPair,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Result of enumerating every monotone move sequence.
pub struct Enumeration {
    pub best_cost: f64,
    /// Moves `(a, b)` of one minimum-cost path.
    pub best_moves: Vec<(usize, usize)>,
    /// Number of paths within 1e-9 of the minimum.
    pub ties: usize,
    pub paths: u64,
}

fn sum(vs: &[EmbeddingVector]) -> Vec<f64> {
    let mut s = vec![0.0; vs[0].dim()];
    for v in vs {
        for (a, x) in s.iter_mut().zip(v.values()) {
            *a += *x as f64;
        }
    }
    s
}

/// Cost of one move, computed straight from the definition.
pub fn oracle_move_cost(
    src: &[EmbeddingVector],
    tgt: &[EmbeddingVector],
    i: usize,
    j: usize,
    a: usize,
    b: usize,
    sigma: f64,
) -> f64 {
    if a == 0 || b == 0 {
        return (a + b) as f64 * sigma;
    }
    let x = sum(&src[i..i + a]);
    let y = sum(&tgt[j..j + b]);
    let dot: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
    let nx = x.iter().map(|p| p * p).sum::<f64>().sqrt();
    let ny = y.iter().map(|p| p * p).sum::<f64>().sqrt();
    let cos = (dot / (nx * ny)).clamp(-1.0, 1.0);
    (1.0 - cos) * (a + b) as f64 / 2.0
}

/// Depth-first enumeration of all paths from (0,0) to (n,m).
pub fn enumerate(src: &[EmbeddingVector], tgt: &[EmbeddingVector], max_merge: usize, sigma: f64) -> Enumeration {
    let (n, m) = (src.len(), tgt.len());
    let mut moves = vec![(0, 1), (1, 0)];
    for a in 1..=max_merge {
        for b in 1..=max_merge {
            if a.min(b) == 1 {
                moves.push((a, b));
            }
        }
    }
    // cost[i][j][k] for move k starting at (i, j)
    let mut cost = vec![vec![vec![f64::NAN; moves.len()]; m + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=m {
            for (k, &(a, b)) in moves.iter().enumerate() {
                if i + a <= n && j + b <= m {
                    cost[i][j][k] = oracle_move_cost(src, tgt, i, j, a, b, sigma);
                }
            }
        }
    }
    struct St<'a> {
        n: usize,
        m: usize,
        moves: &'a [(usize, usize)],
        cost: &'a [Vec<Vec<f64>>],
        stack: Vec<(usize, usize)>,
        out: Enumeration,
    }
    fn dfs(st: &mut St, i: usize, j: usize, acc: f64) {
        if i == st.n && j == st.m {
            st.out.paths += 1;
            if acc < st.out.best_cost - 1e-9 {
                st.out.best_cost = acc;
                st.out.best_moves = st.stack.clone();
                st.out.ties = 1;
            } else if (acc - st.out.best_cost).abs() <= 1e-9 {
                st.out.ties += 1;
                if acc < st.out.best_cost {
                    st.out.best_cost = acc;
                }
            }
            return;
        }
        for k in 0..st.moves.len() {
            let (a, b) = st.moves[k];
            if i + a > st.n || j + b > st.m {
                continue;
            }
            let c = st.cost[i][j][k];
            st.stack.push((a, b));
            dfs(st, i + a, j + b, acc + c);
            st.stack.pop();
        }
    }
    let mut st = St {
        n,
        m,
        moves: &moves,
        cost: &cost,
        stack: Vec::new(),
        out: Enumeration {
            best_cost: f64::INFINITY,
            best_moves: Vec::new(),
            ties: 0,
            paths: 0,
        },
    };
    dfs(&mut st, 0, 0, 0.0);
    st.out
}

pub fn path_moves(path: &AlignmentPath) -> Vec<(usize, usize)> {
    path.links.iter().map(|l| (l.source.len(), l.target.len())).collect()
}

/// Random instance with some shared structure so that merges and skips occur.
pub fn random_instance(rng: &mut ChaCha8Rng, max_len: usize, dim: usize) -> (Vec<EmbeddingVector>, Vec<EmbeddingVector>) {
    let n = rng.random_range(0..=max_len);
    let m = rng.random_range(0..=max_len);
    let anchors: Vec<EmbeddingVector> = (0..max_len.max(1)).map(|_| random_unit(rng.random(), dim)).collect();
    let draw = |len: usize, rng: &mut ChaCha8Rng| -> Vec<EmbeddingVector> {
        (0..len)
            .map(|_| {
                if rng.random_bool(0.6) {
                    let a = &anchors[rng.random_range(0..anchors.len())];
                    noisy_copy(a, rng.random_range(0.05..0.8), rng.random())
                } else {
                    random_unit(rng.random(), dim)
                }
            })
            .collect()
    };
    let src = draw(n, rng);
    let tgt = draw(m, rng);
    (src, tgt)
}

/// Planted alignment with its gold non-skip links.
pub struct Planted {
    pub src: Vec<EmbeddingVector>,
    pub tgt: Vec<EmbeddingVector>,
    pub gold: Vec<(Span, Span)>,
}

fn sum_unit(vs: &[&EmbeddingVector]) -> EmbeddingVector {
    let mut s = vec![0.0f64; vs[0].dim()];
    for v in vs {
        for (a, x) in s.iter_mut().zip(v.values()) {
            *a += *x as f64;
        }
    }
    EmbeddingVector::normalized(&s).unwrap()
}

/// Draws units until the source side holds `len` sentences: 1-1 links, 1-2 and
/// 2-1 merges, and single-sentence skips on either side with probability `skip`.
/// Every sentence is a noisy copy of its unit's meaning.
pub fn planted(seed: u64, len: usize, noise: f64, skip: f64, dim: usize) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Planted {
        src: Vec::new(),
        tgt: Vec::new(),
        gold: Vec::new(),
    };
    let fresh = |rng: &mut ChaCha8Rng| random_unit(rng.random(), dim);
    while p.src.len() < len {
        let r: f64 = rng.random();
        let (i, j) = (p.src.len(), p.tgt.len());
        if r < skip {
            let v = fresh(&mut rng);
            if rng.random_bool(0.5) {
                p.src.push(v);
            } else {
                p.tgt.push(v);
            }
            continue;
        }
        let kind: f64 = rng.random();
        if kind < 0.8 {
            let u = fresh(&mut rng);
            p.src.push(noisy_copy(&u, noise, rng.random()));
            p.tgt.push(noisy_copy(&u, noise, rng.random()));
            p.gold.push((Span::new(i, i + 1), Span::new(j, j + 1)));
        } else {
            let (u1, u2) = (fresh(&mut rng), fresh(&mut rng));
            let whole = sum_unit(&[&u1, &u2]);
            let (one, two) = if kind < 0.9 { (&mut p.src, &mut p.tgt) } else { (&mut p.tgt, &mut p.src) };
            one.push(noisy_copy(&whole, noise, rng.random()));
            two.push(noisy_copy(&u1, noise, rng.random()));
            two.push(noisy_copy(&u2, noise, rng.random()));
            if kind < 0.9 {
                p.gold.push((Span::new(i, i + 1), Span::new(j, j + 2)));
            } else {
                p.gold.push((Span::new(i, i + 2), Span::new(j, j + 1)));
            }
        }
    }
    p
}

pub fn links_of(path: &AlignmentPath) -> Vec<(Span, Span)> {
    path.matches().map(|l| (l.source, l.target)).collect()
}

/// F1 between two sets of non-skip links; 1.0 when both are empty.
pub fn link_f1(predicted: &[(Span, Span)], gold: &[(Span, Span)]) -> f64 {
    if predicted.is_empty() && gold.is_empty() {
        return 1.0;
    }
    let g: HashSet<_> = gold.iter().collect();
    let hits = predicted.iter().filter(|l| g.contains(l)).count() as f64;
    if hits == 0.0 {
        return 0.0;
    }
    let precision = hits / predicted.len() as f64;
    let recall = hits / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

pub fn params(max_merge: usize, sigma: f64) -> AlignParams {
    AlignParams {
        max_merge,
        skip_cost: sigma,
        ..AlignParams::default()
    }
}

/// Dimension of planted fixtures.
pub const DIM: usize = 64;

pub fn check_oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut unique, mut total_paths) = (0, 0u64);
    let cases = 300;
    for case in 0..cases {
        let (src, tgt) = random_instance(&mut rng, 8, 12);
        let max_merge = rng.random_range(1..=3);
        let sigma = rng.random_range(0.1..0.8);
        let got = align_exact(&src, &tgt, &params(max_merge, sigma)).map_err(|e| e.to_string())?;
        let want = enumerate(&src, &tgt, max_merge, sigma);
        total_paths += want.paths;
        ensure!(got.is_partition(src.len(), tgt.len()), "case {case}: not a partition");
        ensure!(
            (got.total_cost - want.best_cost).abs() <= 1e-9,
            "case {case}: dp {} vs oracle {}",
            got.total_cost,
            want.best_cost
        );
        let moves = path_moves(&got);
        let (mut i, mut j, mut recomputed) = (0, 0, 0.0);
        for &(a, b) in &moves {
            recomputed += oracle_move_cost(&src, &tgt, i, j, a, b, sigma);
            i += a;
            j += b;
        }
        ensure!((recomputed - got.total_cost).abs() <= 1e-9, "case {case}: reported cost is off");
        if want.ties == 1 {
            ensure!(moves == want.best_moves, "case {case}: {moves:?} vs {:?}", want.best_moves);
            unique += 1;
        }
    }
    let took = start.elapsed().as_secs_f64();
    ensure!(unique >= 200, "only {unique} instances had a unique optimum");
    ensure!(took < 10.0, "took {took:.2}s");
    Ok(format!(
        "{cases} instances ({total_paths} paths enumerated), costs within 1e-9, {unique} unique optima with equal paths, {took:.2}s"
    ))
}

pub fn check_planted_recovery() -> Check {
    let p = AlignParams::default();
    let mut f1s = Vec::new();
    for seed in 0..50u64 {
        let len = 100 + (seed as usize * 37) % 201;
        let fx = planted(seed, len, 0.1, 0.05, DIM);
        let path = align_coarse_to_fine(&fx.src, &fx.tgt, &p).map_err(|e| e.to_string())?;
        ensure!(path.is_partition(fx.src.len(), fx.tgt.len()), "seed {seed}: not a partition");
        f1s.push(link_f1(&links_of(&path), &fx.gold));
    }
    let mean = f1s.iter().sum::<f64>() / f1s.len() as f64;
    let worst = f1s.iter().cloned().fold(1.0, f64::min);
    ensure!(mean >= 0.95, "mean F1 {mean:.4}");
    Ok(format!("50 fixtures, mean F1 {mean:.4} (>= 0.95), worst {worst:.4}"))
}

pub fn check_coarse_fidelity() -> Check {
    let p = AlignParams::default();
    let wide = AlignParams {
        exact_limit: usize::MAX,
        ..p.clone()
    };
    let mut worst = 1.0f64;
    for seed in 0..20u64 {
        let fx = planted(1000 + seed, 500, 0.1, 0.05, DIM);
        let exact = align_exact(&fx.src, &fx.tgt, &wide).map_err(|e| e.to_string())?;
        let coarse = align_coarse_to_fine(&fx.src, &fx.tgt, &p).map_err(|e| e.to_string())?;
        ensure!(coarse.is_partition(fx.src.len(), fx.tgt.len()), "seed {seed}: not a partition");
        ensure!(coarse.total_cost >= exact.total_cost - 1e-9, "seed {seed}: coarse beats exact");
        worst = worst.min(link_f1(&links_of(&coarse), &links_of(&exact)));
    }
    ensure!(worst >= 0.99, "worst F1 {worst:.4}");
    let fx = planted(42, 10_000, 0.1, 0.05, DIM);
    let start = Instant::now();
    let path = align_coarse_to_fine(&fx.src, &fx.tgt, &p).map_err(|e| e.to_string())?;
    let took = start.elapsed().as_secs_f64();
    ensure!(path.is_partition(fx.src.len(), fx.tgt.len()), "10k: not a partition");
    ensure!(took < 60.0, "10k took {took:.1}s");
    Ok(format!(
        "20 fixtures of 500, worst F1 vs exact {worst:.4} (>= 0.99); {}x{} in {took:.2}s (< 60s)",
        fx.src.len(),
        fx.tgt.len()
    ))
}

pub fn check_self_alignment() -> Check {
    let p = AlignParams {
        exact_limit: 400,
        ..AlignParams::default()
    };
    let mut worst = 0.0f64;
    for seed in 0..40u64 {
        let n = (seed as usize * 7) % 150;
        let v: Vec<_> = (0..n).map(|i| random_unit(seed * 1000 + i as u64, 32)).collect();
        let path = align_coarse_to_fine(&v, &v, &p).map_err(|e| e.to_string())?;
        ensure!(path.links.len() == n, "n={n}: {} links", path.links.len());
        ensure!(path.total_cost <= 1e-6, "n={n}: total cost {}", path.total_cost);
        for (i, l) in path.links.iter().enumerate() {
            ensure!(
                (l.source.start, l.source.len(), l.target.start, l.target.len()) == (i, 1, i, 1),
                "n={n}: link {i} is {} -> {}",
                l.source,
                l.target
            );
            let score = l.score.ok_or("skip link")?;
            worst = worst.max((score - 1.0).abs());
        }
    }
    ensure!(worst <= 1e-6, "score off by {worst:e}");
    Ok(format!("40 documents up to 148 sentences, all (1,1), max |score - 1| {worst:.1e}"))
}

// Text oracles

pub const INDIC_BLOCKS: [(u32, u32, &str); 7] = [
    (0x0900, 0x097F, "Devanagari"),
    (0x0980, 0x09FF, "Bengali"),
    (0x0A80, 0x0AFF, "Gujarati"),
    (0x0B80, 0x0BFF, "Tamil"),
    (0x0C00, 0x0C7F, "Telugu"),
    (0x0C80, 0x0CFF, "Kannada"),
    (0x0D00, 0x0D7F, "Malayalam"),
];

/// Independent counting: ASCII letters are Latin, the block ranges above are
/// Indic, dandas and everything else count for nothing.
pub fn script_oracle(text: &str) -> (Vec<(&'static str, usize)>, usize) {
    let mut counts: Vec<(&'static str, usize)> = vec![("Latin", 0)];
    counts.extend(INDIC_BLOCKS.iter().map(|b| (b.2, 0)));
    for c in text.chars() {
        let cp = c as u32;
        if c.is_ascii_alphabetic() {
            counts[0].1 += 1;
        } else if let Some(k) = (cp != 0x0964 && cp != 0x0965)
            .then(|| INDIC_BLOCKS.iter().position(|b| (b.0..=b.1).contains(&cp)))
            .flatten()
        {
            counts[k + 1].1 += 1;
        }
    }
    let total = counts.iter().map(|c| c.1).sum();
    (counts, total)
}

pub fn script_name(s: Script) -> &'static str {
    match s {
        Script::Latin => "Latin",
        Script::Devanagari => "Devanagari",
        Script::Bengali => "Bengali",
        Script::Gujarati => "Gujarati",
        Script::Kannada => "Kannada",
        Script::Malayalam => "Malayalam",
        Script::Tamil => "Tamil",
        Script::Telugu => "Telugu",
    }
}

pub fn random_mixed(rng: &mut ChaCha8Rng) -> String {
    let scripts: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(0..10)).collect();
    let len = rng.random_range(0..40);
    (0..len)
        .map(|_| match scripts[rng.random_range(0..scripts.len())] {
            0 => rng.random_range('a'..='z'),
            1 => rng.random_range('A'..='Z'),
            2 => [' ', '1', '.', '।', '॥', 'é', '∑', '中', '?'][rng.random_range(0..9)],
            k => {
                let (lo, hi, _) = INDIC_BLOCKS[k - 3];
                char::from_u32(rng.random_range(lo..=hi)).unwrap()
            }
        })
        .collect()
}

pub fn check_classifier_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut seen = [0usize; 3];
    for _ in 0..1000 {
        let text = random_mixed(&mut rng);
        let got = classify_script(&text);
        let (counts, total) = script_oracle(&text);
        if total == 0 {
            ensure!(got.label == ScriptClass::Neutral, "{text:?}: {:?}", got.label);
            seen[0] += 1;
            continue;
        }
        let max = counts.iter().map(|c| c.1).max().unwrap();
        let ratio = max as f64 / total as f64;
        ensure!((got.dominant_ratio - ratio).abs() < 1e-12, "{text:?}: ratio {} vs {ratio}", got.dominant_ratio);
        let leaders: Vec<_> = counts.iter().filter(|c| c.1 == max).map(|c| c.0).collect();
        let dominant = got.dominant.ok_or_else(|| format!("{text:?}: no dominant script"))?;
        ensure!(leaders.contains(&script_name(dominant)), "{text:?}: {dominant:?} not among {leaders:?}");
        let want = if ratio < 0.9 {
            seen[1] += 1;
            ScriptClass::Mixed
        } else {
            seen[2] += 1;
            ScriptClass::Pure(dominant)
        };
        ensure!(got.label == want, "{text:?}: {:?} vs {want:?}", got.label);
    }
    ensure!(seen.iter().all(|&s| s > 20), "class coverage too thin: {seen:?}");
    Ok(format!("1000 strings agree ({} neutral, {} mixed, {} pure)", seen[0], seen[1], seen[2]))
}

pub const GUARD_TABLE: &[(&str, &[&str])] = &[
    ("Dr. Rao teaches. Students learn.", &["Dr. Rao teaches.", "Students learn."]),
    ("The value is 3.14 exactly.", &["The value is 3.14 exactly."]),
    ("Mr. and Mrs. Iyer met Prof. Sen.", &["Mr. and Mrs. Iyer met Prof. Sen."]),
    ("See Fig. 3 and Eq. 2 for details.", &["See Fig. 3 and Eq. 2 for details."]),
    ("Apples, pears etc. are fruit. Yes!", &["Apples, pears etc. are fruit.", "Yes!"]),
    ("Use e.g. a tree, i.e. a graph.", &["Use e.g. a tree, i.e. a graph."]),
    ("Cats vs. dogs. No. 5 wins.", &["Cats vs. dogs.", "No. 5 wins."]),
    ("Version 2.0.1 shipped. Done?", &["Version 2.0.1 shipped.", "Done?"]),
    ("It ends here. 4.5 is next.", &["It ends here.", "4.5 is next."]),
    ("Is it? Yes. Really!", &["Is it?", "Yes.", "Really!"]),
    ("Wait...", &["Wait..."]),
];

pub const INDIC_GUARD_TABLE: &[(LanguageCode, &str, &[&str])] = &[
    (LanguageCode::Hi, "यह पहला वाक्य है। यह दूसरा है।", &["यह पहला वाक्य है।", "यह दूसरा है।"]),
    (LanguageCode::Hi, "मान 3.14 है। ठीक है।", &["मान 3.14 है।", "ठीक है।"]),
    (LanguageCode::Ta, "ஒன்று. இரண்டு॥ மூன்று", &["ஒன்று.", "இரண்டு॥", "மூன்று"]),
    (LanguageCode::Ta, "மதிப்பு 2.5 ஆகும். சரி.", &["மதிப்பு 2.5 ஆகும்.", "சரி."]),
];

pub fn check_guard_tables() -> Check {
    let texts = |text: &str, lang| -> Vec<String> { segment_sentences(text, lang).into_iter().map(|s| s.text).collect() };
    for (text, want) in GUARD_TABLE {
        let got = texts(text, LanguageCode::En);
        ensure!(&got == want, "{text:?} -> {got:?}");
    }
    for (lang, text, want) in INDIC_GUARD_TABLE {
        let got = texts(text, *lang);
        ensure!(&got == want, "{text:?} -> {got:?}");
    }
    Ok(format!("{} English and {} Indic cases", GUARD_TABLE.len(), INDIC_GUARD_TABLE.len()))
}

const ARTIFACT_PIECES: &[&str] = &[
    "Hello", "world.", "नमस्ते", "।", "(Refer Slide Time: 00:14)", "(Refer", "Time:", "12:34", "3:2", "\n", "\n\n", "  ",
    "Page", "7", "Slide 4 of 9", "01:02:03", ")", "-->", "वाक्य", "(refer time: 1:02:03)", "Page 3 of 12",
];

fn random_transcript(rng: &mut ChaCha8Rng) -> String {
    (0..rng.random_range(0..30))
        .map(|_| ARTIFACT_PIECES[rng.random_range(0..ARTIFACT_PIECES.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

pub fn check_strip_idempotence() -> Check {
    let p = ArtifactPatternSet::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut changed = 0;
    for _ in 0..1000 {
        let text = random_transcript(&mut rng);
        let once = strip_artifacts(&text, &p);
        ensure!(strip_artifacts(&once, &p) == once, "{text:?} not idempotent");
        ensure!(once.is_empty() || !p.matches(&once), "{once:?} still matches a rule");
        changed += usize::from(once != text);
    }
    ensure!(changed > 100, "only {changed} inputs contained artifacts");
    Ok(format!("1000 random transcripts, {changed} changed, stripping twice equals once"))
}

pub fn check_partitions() -> Check {
    let p = ArtifactPatternSet::default();
    let meta = LectureMeta::new("L", "C", "en-hi".parse().unwrap(), "x.txt").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut docs = 0;
    for _ in 0..500 {
        let text = random_transcript(&mut rng);
        let doc = match parse_document(text.as_bytes(), meta.clone(), &p) {
            Ok(d) => d,
            Err(IngestError::EmptyDocument) => continue,
            Err(e) => return Err(e.to_string()),
        };
        let input = doc.blocks.clone();
        let split = split_bilingual(doc).map_err(|e| e.to_string())?;
        let mut routed: Vec<_> = split.english.iter().chain(&split.indic).map(|b| (b.original_order, b.text.clone())).collect();
        routed.sort();
        let want: Vec<_> = input.iter().map(|b| (b.original_order, b.text.clone())).collect();
        ensure!(routed == want, "{text:?}: blocks lost or duplicated in routing");
        docs += 1;
    }
    let words = ["Dr.", "3.14", "value", "यह", "है।", "॥", "end.", "why?", "no!", " ", "\n", "e.g.", "x", "2.5"];
    let mut sentences = 0;
    for _ in 0..500 {
        let text: String = (0..rng.random_range(1..25))
            .map(|_| words[rng.random_range(0..words.len())])
            .collect::<Vec<_>>()
            .join(" ");
        for lang in [LanguageCode::En, LanguageCode::Hi] {
            let out = segment_sentences(&text, lang);
            let joined: String = out.iter().map(|s| s.text.as_str()).collect();
            ensure!(squash(&joined) == squash(&text), "{text:?}: segmentation does not round-trip");
            for (i, s) in out.iter().enumerate() {
                ensure!(s.index == i, "{text:?}: index {} at {i}", s.index);
                let again = segment_sentences(&s.text, lang);
                ensure!(again.len() == 1 && again[0].text == s.text, "{:?} re-splits", s.text);
            }
            sentences += out.len();
        }
    }
    Ok(format!("{docs} documents routed without loss; 1000 segmentations ({sentences} sentences) round-trip"))
}

// Corpus fixtures

pub fn random_corpus(seed: u64, len: usize) -> Corpus {
    use LanguageCode::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let langs = [(En, Hi), (En, Ta), (Hi, Ta), (En, Bn)];
    let words = ["alpha", "beta", "gamma", "delta", "नमस्ते", "ரூ"];
    let text = |rng: &mut ChaCha8Rng| {
        let w: Vec<&str> = (0..rng.random_range(1..3)).map(|_| words[rng.random_range(0..words.len())]).collect();
        // Occasional padding exercises whitespace normalization in the key.
        if rng.random_bool(0.2) {
            format!(" {}  ", w.join("  "))
        } else {
            w.join(" ")
        }
    };
    let pairs = (0..len)
        .map(|i| {
            let (s, t) = langs[rng.random_range(0..langs.len())];
            TranslationPair {
                src_lang: s,
                tgt_lang: t,
                src_text: text(&mut rng),
                tgt_text: text(&mut rng),
                score: (rng.random_range(50..100) as f64) / 100.0,
                lecture_id: format!("L{:02}", rng.random_range(0..20)),
                course_id: "C".into(),
                src_span: Span::new(i, i + 1),
                tgt_span: Span::new(i, i + 1),
                align_type: AlignType::OneToOne,
            }
        })
        .collect();
    Corpus {
        pairs,
        ..Default::default()
    }
}

pub fn pair_key(p: &TranslationPair) -> (LanguageCode, LanguageCode, String, String) {
    let squash = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    (p.src_lang, p.tgt_lang, squash(&p.src_text), squash(&p.tgt_text))
}

pub fn check_dedup() -> Check {
    let corpus = random_corpus(1, 10_000);
    let once = dedup(corpus.clone());
    let twice = dedup(once.clone());
    ensure!(once == twice, "dedup is not idempotent");
    let keys: HashSet<_> = once.pairs.iter().map(pair_key).collect();
    ensure!(keys.len() == once.len(), "{} keys for {} pairs", keys.len(), once.len());
    let all: HashSet<_> = corpus.pairs.iter().map(pair_key).collect();
    ensure!(keys == all, "dedup lost a key");
    let mut best: HashMap<_, f64> = HashMap::new();
    for p in &corpus.pairs {
        let b = best.entry(pair_key(p)).or_insert(f64::MIN);
        *b = b.max(p.score);
    }
    for kept in &once.pairs {
        ensure!(kept.score == best[&pair_key(kept)], "kept a lower-scoring duplicate");
    }
    Ok(format!("10000 pairs -> {} unique keys, idempotent, best score kept", once.len()))
}

pub fn link(lecture: &str, s: LanguageCode, t: LanguageCode, src: (usize, usize), tgt: (usize, usize), text: (&str, &str), score: f64) -> TranslationPair {
    TranslationPair {
        src_lang: s,
        tgt_lang: t,
        src_text: text.0.into(),
        tgt_text: text.1.into(),
        score,
        lecture_id: lecture.into(),
        course_id: "C".into(),
        src_span: Span::new(src.0, src.1),
        tgt_span: Span::new(tgt.0, tgt.1),
        align_type: if src.1 - src.0 > 1 {
            AlignType::ManyToOne
        } else if tgt.1 - tgt.0 > 1 {
            AlignType::OneToMany
        } else {
            AlignType::OneToOne
        },
    }
}

pub fn check_pivot_fixture() -> Check {
    use LanguageCode::*;
    let en_hi = vec![
        link("L", En, Hi, (0, 1), (0, 1), ("e0", "h0"), 0.90),
        link("L", En, Hi, (1, 3), (1, 2), ("e1 e2", "h1"), 0.80),
        link("L", En, Hi, (3, 4), (2, 4), ("e3", "h2 h3"), 0.95),
        link("L", En, Hi, (5, 6), (5, 6), ("e5", "h5"), 0.75),
    ];
    let en_ta = vec![
        link("L", En, Ta, (0, 1), (0, 1), ("e0", "t0"), 0.85),
        link("L", En, Ta, (1, 2), (1, 2), ("e1", "t1"), 0.99),
        link("L", En, Ta, (2, 3), (2, 3), ("e2", "t2"), 0.99),
        link("L", En, Ta, (3, 4), (3, 4), ("e3", "t3"), 0.97),
        link("L", En, Ta, (4, 5), (4, 5), ("e4", "t4"), 0.90),
    ];
    // Only e0 and e3 are linked with the same English span on both sides.
    let want = vec![
        (Hi, Ta, "h0".to_string(), "t0".to_string(), 0.85, Span::new(0, 1), Span::new(0, 1), AlignType::Pivoted),
        (Hi, Ta, "h2 h3".to_string(), "t3".to_string(), 0.95, Span::new(2, 4), Span::new(3, 4), AlignType::Pivoted),
    ];
    let got: Vec<_> = pivot(&en_hi, &en_ta)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|p| (p.src_lang, p.tgt_lang, p.src_text, p.tgt_text, p.score, p.src_span, p.tgt_span, p.align_type))
        .collect();
    ensure!(got == want, "{got:?}");

    let swapped: Vec<_> = en_ta
        .iter()
        .map(|p| TranslationPair {
            src_lang: p.tgt_lang,
            tgt_lang: p.src_lang,
            src_text: p.tgt_text.clone(),
            tgt_text: p.src_text.clone(),
            src_span: p.tgt_span,
            tgt_span: p.src_span,
            ..p.clone()
        })
        .collect();
    let back = pivot(&swapped, &en_hi).map_err(|e| e.to_string())?;
    ensure!(back.len() == 2, "reversed join gave {} pairs", back.len());
    ensure!((back[1].src_lang, back[1].tgt_lang, back[1].score) == (Ta, Hi, 0.95), "{:?}", back[1]);
    ensure!(pivot(&en_hi, &[link("M", En, Ta, (0, 1), (0, 1), ("e0", "t0"), 0.9)]).is_err(), "lecture mismatch accepted");
    Ok("2 hand-enumerated hi-ta pairs with min scores 0.85 and 0.95, both input orders".into())
}

pub fn check_holdout() -> Check {
    let corpus = dedup(random_corpus(9, 10_000));
    let held: BTreeSet<String> = ["L03", "L07", "L11"].iter().map(|s| s.to_string()).collect();
    let k = 40;
    let split = split_holdout(&corpus, &held, k).map_err(|e| e.to_string())?;
    let test_keys: HashSet<_> = split.test.pairs.iter().map(pair_key).collect();
    let leaked = split.train.pairs.iter().filter(|p| test_keys.contains(&pair_key(p))).count();
    ensure!(leaked == 0, "{leaked} train pairs share a key with test");
    ensure!(split.train.len() + split.test.len() == corpus.len(), "split lost pairs");

    let mut langs: Vec<(LanguageCode, LanguageCode)> = corpus.pairs.iter().map(|p| (p.src_lang, p.tgt_lang)).collect();
    langs.sort();
    langs.dedup();
    for &(s, t) in &langs {
        let mut cands: Vec<(usize, f64)> = corpus
            .pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.src_lang == s && p.tgt_lang == t && held.contains(&p.lecture_id))
            .map(|(i, p)| (i, p.score))
            .collect();
        cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let want: Vec<&TranslationPair> = cands.iter().take(k).map(|(i, _)| &corpus.pairs[*i]).collect();
        let got: Vec<&TranslationPair> = split.test.pairs.iter().filter(|p| p.src_lang == s && p.tgt_lang == t).collect();
        ensure!(got == want, "{s}-{t}: test set is not the top {k} by score");
    }
    ensure!(split.shortfalls.is_empty(), "{:?}", split.shortfalls);
    Ok(format!("{} test / {} train, zero leakage, top-{k} exact for {} language pairs", split.test.len(), split.train.len(), langs.len()))
}
