//! One-to-one token alignment between the source translation and a target.
//!
//! Lexical translation tables are estimated with EM on the word-based
//! translation likelihood (a NULL word is available on the conditioning
//! side). A verse is then aligned by greedy bidirectional matching over
//! `t_fwd(tgt | src) * t_rev(src | tgt)`, which yields at most one link per
//! token on either side.
//!
//! Alignments from external tools can be read in Pharaoh format.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use rayon::prelude::*;

use crate::corpus::{intersect_verses, ParallelCorpus};
use crate::error::{read_to_string, Error, Result};
use crate::NOMATCH;

/// Reserved conditioning word for unaligned output tokens.
pub const NULL_TOKEN: &str = "<NULL>";

/// Number of sentence pairs per E-step work unit. Counts are merged in
/// chunk order, so results do not depend on the thread count.
const EM_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `t(target | source)`
    SrcToTgt,
    /// `t(source | target)`
    TgtToSrc,
}

#[derive(Debug, Clone, Default)]
struct Vocab {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    fn intern(&mut self, w: &str) -> u32 {
        if let Some(&id) = self.index.get(w) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(w.to_string());
        self.index.insert(w.to_string(), id);
        id
    }

    fn get(&self, w: &str) -> Option<u32> {
        self.index.get(w).copied()
    }
}

/// Lexical translation probabilities `t(out | cond)`.
#[derive(Debug, Clone)]
pub struct LexTable {
    cond: Vocab,
    out: Vocab,
    probs: HashMap<(u32, u32), f64>,
}

impl LexTable {
    /// `t(out | cond)`; `cond` may be [`NULL_TOKEN`]. Unseen pairs are 0.
    pub fn prob(&self, out: &str, cond: &str) -> f64 {
        match (self.cond.get(cond), self.out.get(out)) {
            (Some(c), Some(o)) => self.probs.get(&(c, o)).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Sum of each conditioning word's distribution, by word.
    pub fn row_sums(&self) -> BTreeMap<String, f64> {
        let mut sums: BTreeMap<String, f64> = BTreeMap::new();
        for (&(c, _), &p) in &self.probs {
            *sums.entry(self.cond.words[c as usize].clone()).or_default() += p;
        }
        sums
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

struct EncodedPair {
    cond: Vec<u32>,
    out: Vec<u32>,
}

#[derive(Default)]
struct Counts {
    pair: HashMap<(u32, u32), f64>,
    total: HashMap<u32, f64>,
    loglik: f64,
}

fn expectation(pairs: &[EncodedPair], probs: &HashMap<(u32, u32), f64>) -> Counts {
    let mut counts = Counts::default();
    for p in pairs {
        let norm = (p.cond.len() as f64).ln();
        for &o in &p.out {
            let denom: f64 = p.cond.iter().map(|&c| probs[&(c, o)]).sum();
            counts.loglik += denom.ln() - norm;
            for &c in &p.cond {
                let frac = probs[&(c, o)] / denom;
                *counts.pair.entry((c, o)).or_default() += frac;
                *counts.total.entry(c).or_default() += frac;
            }
        }
    }
    counts
}

/// Trains on explicit (conditioning, output) token sequences.
///
/// Returns the table and the log-likelihood under each successive parameter
/// set (initial table first, final table last; `iters + 1` values).
pub fn train_on_pairs<S: AsRef<str>>(pairs: &[(Vec<S>, Vec<S>)], iters: usize) -> Result<(LexTable, Vec<f64>)> {
    if iters == 0 {
        return Err(Error::InvalidArgument("EM iterations must be at least 1".into()));
    }
    if pairs.is_empty() {
        return Err(Error::Alignment("no sentence pairs to train on".into()));
    }
    let mut cond = Vocab::default();
    let mut out = Vocab::default();
    cond.intern(NULL_TOKEN);
    let encoded: Vec<EncodedPair> = pairs
        .iter()
        .map(|(c, o)| EncodedPair {
            cond: std::iter::once(0)
                .chain(c.iter().map(|w| cond.intern(w.as_ref())))
                .collect(),
            out: o.iter().map(|w| out.intern(w.as_ref())).collect(),
        })
        .collect();

    // uniform over co-occurring outputs
    let mut cooc: HashMap<u32, Vec<u32>> = HashMap::new();
    for p in &encoded {
        for &c in &p.cond {
            cooc.entry(c).or_default().extend(p.out.iter().copied());
        }
    }
    let mut probs = HashMap::new();
    for (c, mut outs) in cooc {
        outs.sort_unstable();
        outs.dedup();
        let u = 1.0 / outs.len() as f64;
        for o in outs {
            probs.insert((c, o), u);
        }
    }

    let mut trace = Vec::with_capacity(iters + 1);
    for _ in 0..iters {
        let partial: Vec<Counts> = encoded
            .par_chunks(EM_CHUNK)
            .map(|chunk| expectation(chunk, &probs))
            .collect();
        let mut merged = Counts::default();
        for part in partial {
            merged.loglik += part.loglik;
            for (k, v) in part.pair {
                *merged.pair.entry(k).or_default() += v;
            }
            for (k, v) in part.total {
                *merged.total.entry(k).or_default() += v;
            }
        }
        trace.push(merged.loglik);
        for (&(c, o), p) in probs.iter_mut() {
            let total = merged.total[&c];
            *p = merged.pair.get(&(c, o)).copied().unwrap_or(0.0) / total;
        }
    }
    let final_ll: f64 = encoded
        .par_chunks(EM_CHUNK)
        .map(|chunk| expectation(chunk, &probs).loglik)
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    trace.push(final_ll);
    Ok((LexTable { cond, out, probs }, trace))
}

fn verse_pairs<'a>(corpus: &'a ParallelCorpus, code: &str) -> Result<Vec<(&'a [String], &'a [String])>> {
    let target = corpus.target(code)?;
    let ids = intersect_verses(corpus, code)?;
    if ids.is_empty() {
        return Err(Error::Alignment(format!("{code}: no verses shared with the source")));
    }
    Ok(ids
        .iter()
        .map(|id| (&corpus.source[id].tokens[..], &target.verses[id].tokens[..]))
        .collect())
}

pub fn train_lex_table(corpus: &ParallelCorpus, code: &str, direction: Direction, iters: usize) -> Result<LexTable> {
    train_lex_table_traced(corpus, code, direction, iters).map(|(t, _)| t)
}

pub fn train_lex_table_traced(
    corpus: &ParallelCorpus,
    code: &str,
    direction: Direction,
    iters: usize,
) -> Result<(LexTable, Vec<f64>)> {
    if iters == 0 {
        return Err(Error::InvalidArgument("EM iterations must be at least 1".into()));
    }
    let pairs: Vec<(Vec<&str>, Vec<&str>)> = verse_pairs(corpus, code)?
        .into_iter()
        .map(|(s, t)| {
            let s: Vec<&str> = s.iter().map(String::as_str).collect();
            let t: Vec<&str> = t.iter().map(String::as_str).collect();
            match direction {
                Direction::SrcToTgt => (s, t),
                Direction::TgtToSrc => (t, s),
            }
        })
        .collect();
    train_on_pairs(&pairs, iters)
}

/// Token-level alignment of one verse. `src_to_tgt[i]` is the target index
/// linked to source token `i`, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerseAlignment {
    pub verse_id: String,
    pub tgt_len: usize,
    pub src_to_tgt: Vec<Option<usize>>,
}

/// A single link; `None` on either side is a NULL alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignmentLink {
    pub src_idx: Option<usize>,
    pub tgt_idx: Option<usize>,
}

impl VerseAlignment {
    pub fn links(&self) -> impl Iterator<Item = AlignmentLink> + '_ {
        self.src_to_tgt.iter().enumerate().map(|(i, t)| AlignmentLink {
            src_idx: Some(i),
            tgt_idx: *t,
        })
    }

    pub fn target_of(&self, src_idx: usize) -> Option<usize> {
        self.src_to_tgt.get(src_idx).copied().flatten()
    }

    /// True when no target index is used twice.
    pub fn is_one_to_one(&self) -> bool {
        let mut seen = vec![false; self.tgt_len];
        for t in self.src_to_tgt.iter().flatten() {
            if *t >= self.tgt_len || seen[*t] {
                return false;
            }
            seen[*t] = true;
        }
        true
    }
}

/// Greedy one-to-one matching. Pairs scoring at or below `threshold` are
/// never linked. Ties go to the smaller `|i - j|`, then the smaller `i`.
pub fn align_verse(
    fwd: &LexTable,
    rev: &LexTable,
    src: &[String],
    tgt: &[String],
    threshold: f64,
) -> Vec<Option<usize>> {
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (i, s) in src.iter().enumerate() {
        for (j, t) in tgt.iter().enumerate() {
            let score = fwd.prob(t, s) * rev.prob(s, t);
            if score > threshold {
                cands.push((score, i, j));
            }
        }
    }
    cands.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.abs_diff(a.2).cmp(&b.1.abs_diff(b.2)))
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
    });
    let mut src_to_tgt = vec![None; src.len()];
    let mut tgt_used = vec![false; tgt.len()];
    for (_, i, j) in cands {
        if src_to_tgt[i].is_none() && !tgt_used[j] {
            src_to_tgt[i] = Some(j);
            tgt_used[j] = true;
        }
    }
    src_to_tgt
}

/// All verse alignments of one target language, keyed by verse id.
#[derive(Debug, Clone, Default)]
pub struct LanguageAlignment {
    pub code: String,
    pub verses: BTreeMap<String, VerseAlignment>,
}

#[derive(Debug, Clone, Copy)]
pub struct AlignerSettings {
    pub iters: usize,
    pub threshold: f64,
}

impl Default for AlignerSettings {
    fn default() -> Self {
        AlignerSettings {
            iters: 10,
            threshold: 1e-4,
        }
    }
}

/// Trains both directions and aligns every shared verse.
pub fn align_language(corpus: &ParallelCorpus, code: &str, settings: AlignerSettings) -> Result<LanguageAlignment> {
    let (fwd, rev) = rayon::join(
        || train_lex_table(corpus, code, Direction::SrcToTgt, settings.iters),
        || train_lex_table(corpus, code, Direction::TgtToSrc, settings.iters),
    );
    let (fwd, rev) = (fwd?, rev?);
    let target = corpus.target(code)?;
    let ids = intersect_verses(corpus, code)?;
    let verses: BTreeMap<String, VerseAlignment> = ids
        .par_iter()
        .map(|id| {
            let src = &corpus.source[id].tokens;
            let tgt = &target.verses[id].tokens;
            let src_to_tgt = align_verse(&fwd, &rev, src, tgt, settings.threshold);
            (
                id.clone(),
                VerseAlignment {
                    verse_id: id.clone(),
                    tgt_len: tgt.len(),
                    src_to_tgt,
                },
            )
        })
        .collect();
    Ok(LanguageAlignment {
        code: code.to_string(),
        verses,
    })
}

/// Pharaoh text: one line per verse (in `verses` order), `i-j` pairs.
pub fn format_pharaoh(alignment: &LanguageAlignment) -> String {
    let mut out = String::new();
    for va in alignment.verses.values() {
        let pairs: Vec<String> = va
            .src_to_tgt
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.map(|j| format!("{i}-{j}")))
            .collect();
        let _ = writeln!(out, "{}", pairs.join(" "));
    }
    out
}

/// Source and target lengths of a verse, used to validate imported links.
#[derive(Debug, Clone)]
pub struct VerseShape {
    pub verse_id: String,
    pub src_len: usize,
    pub tgt_len: usize,
}

pub fn verse_shapes(corpus: &ParallelCorpus, code: &str) -> Result<Vec<VerseShape>> {
    let target = corpus.target(code)?;
    Ok(intersect_verses(corpus, code)?
        .into_iter()
        .map(|id| VerseShape {
            src_len: corpus.source[&id].tokens.len(),
            tgt_len: target.verses[&id].tokens.len(),
            verse_id: id,
        })
        .collect())
}

/// Parses Pharaoh lines against the given verse shapes. Links that would
/// break one-to-one are dropped, keeping the first occurrence.
pub fn parse_pharaoh(text: &str, code: &str, shapes: &[VerseShape]) -> Result<LanguageAlignment> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != shapes.len() {
        return Err(Error::Alignment(format!(
            "{code}: {} alignment lines for {} verses",
            lines.len(),
            shapes.len()
        )));
    }
    let mut verses = BTreeMap::new();
    for (lineno, (line, shape)) in lines.iter().zip(shapes).enumerate() {
        let mut src_to_tgt = vec![None; shape.src_len];
        let mut tgt_used = vec![false; shape.tgt_len];
        for pair in line.split_whitespace() {
            let (i, j) = pair
                .split_once('-')
                .and_then(|(i, j)| Some((i.parse::<usize>().ok()?, j.parse::<usize>().ok()?)))
                .ok_or_else(|| Error::parse(code, lineno + 1, format!("bad alignment pair {pair:?}")))?;
            if i >= shape.src_len || j >= shape.tgt_len {
                return Err(Error::Alignment(format!(
                    "{code}: verse {}: pair {i}-{j} out of range ({}x{} tokens)",
                    shape.verse_id, shape.src_len, shape.tgt_len
                )));
            }
            if src_to_tgt[i].is_some() || tgt_used[j] {
                warn!("{code}: verse {}: dropping {i}-{j}, violates one-to-one", shape.verse_id);
                continue;
            }
            src_to_tgt[i] = Some(j);
            tgt_used[j] = true;
        }
        verses.insert(
            shape.verse_id.clone(),
            VerseAlignment {
                verse_id: shape.verse_id.clone(),
                tgt_len: shape.tgt_len,
                src_to_tgt,
            },
        );
    }
    Ok(LanguageAlignment {
        code: code.to_string(),
        verses,
    })
}

pub fn import_pharaoh(path: &Path, code: &str, shapes: &[VerseShape]) -> Result<LanguageAlignment> {
    parse_pharaoh(&read_to_string(path)?, code, shapes)
}

/// One occurrence of the pivot with its parallel label in every language.
#[derive(Debug, Clone, PartialEq)]
pub struct UsagePoint {
    pub id: usize,
    pub verse_id: String,
    pub pivot_idx: usize,
    /// Index of this occurrence among pivot tokens of the same verse.
    pub occurrence: usize,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UsageSet {
    pub languages: Vec<String>,
    pub points: Vec<UsagePoint>,
}

impl UsageSet {
    pub fn language_index(&self, code: &str) -> Result<usize> {
        self.languages
            .iter()
            .position(|c| c == code)
            .ok_or_else(|| Error::UnknownLanguage(code.to_string()))
    }

    pub fn column(&self, code: &str) -> Result<Vec<&str>> {
        let k = self.language_index(code)?;
        Ok(self.points.iter().map(|p| p.labels[k].as_str()).collect())
    }

    /// Replaces one language's labels.
    pub fn set_column(&mut self, code: &str, labels: Vec<String>) -> Result<()> {
        let k = self.language_index(code)?;
        if labels.len() != self.points.len() {
            return Err(Error::InvalidArgument(format!(
                "{code}: {} labels for {} points",
                labels.len(),
                self.points.len()
            )));
        }
        for (p, l) in self.points.iter_mut().zip(labels) {
            p.labels[k] = l;
        }
        Ok(())
    }

    pub fn rows(&self) -> Vec<Vec<String>> {
        self.points.iter().map(|p| p.labels.clone()).collect()
    }
}

/// Collects every source occurrence of `pivot` with its aligned target token
/// per language (or NOMATCH).
pub fn extract_usage_points(
    corpus: &ParallelCorpus,
    alignments: &BTreeMap<String, LanguageAlignment>,
    pivot: &str,
) -> Result<UsageSet> {
    let languages: Vec<String> = alignments.keys().cloned().collect();
    let mut targets = Vec::with_capacity(languages.len());
    for code in &languages {
        targets.push(corpus.target(code)?);
    }
    let mut points = Vec::new();
    for (verse_id, verse) in &corpus.source {
        let mut occurrence = 0;
        for (idx, tok) in verse.tokens.iter().enumerate() {
            if tok != pivot {
                continue;
            }
            let labels = languages
                .iter()
                .zip(&targets)
                .map(|(code, target)| {
                    let linked = alignments[code]
                        .verses
                        .get(verse_id)
                        .and_then(|va| va.target_of(idx))
                        .and_then(|j| target.verses.get(verse_id).map(|v| v.tokens[j].clone()));
                    linked.unwrap_or_else(|| NOMATCH.to_string())
                })
                .collect();
            points.push(UsagePoint {
                id: points.len(),
                verse_id: verse_id.clone(),
                pivot_idx: idx,
                occurrence,
                labels,
            });
            occurrence += 1;
        }
    }
    if points.is_empty() {
        return Err(Error::PivotAbsent(pivot.to_string()));
    }
    Ok(UsageSet { languages, points })
}

/// Tab-separated: `point_id verse_id pivot_idx occurrence <labels...>`.
pub fn format_usage(set: &UsageSet) -> String {
    let mut out = String::from("point_id\tverse_id\tpivot_idx\toccurrence");
    for l in &set.languages {
        out.push('\t');
        out.push_str(l);
    }
    out.push('\n');
    for p in &set.points {
        let _ = write!(out, "{}\t{}\t{}\t{}", p.id, p.verse_id, p.pivot_idx, p.occurrence);
        for l in &p.labels {
            out.push('\t');
            out.push_str(l);
        }
        out.push('\n');
    }
    out
}

pub fn parse_usage(text: &str, origin: &str) -> Result<UsageSet> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "empty usage file"))?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < 4 || cols[..4] != ["point_id", "verse_id", "pivot_idx", "occurrence"] {
        return Err(Error::parse(origin, 1, "unexpected usage header"));
    }
    let languages: Vec<String> = cols[4..].iter().map(|s| s.to_string()).collect();
    let mut points = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 + languages.len() {
            return Err(Error::parse(origin, lineno + 1, "wrong column count"));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(origin, lineno + 1, format!("bad integer {s:?}")))
        };
        points.push(UsagePoint {
            id: num(f[0])?,
            verse_id: f[1].to_string(),
            pivot_idx: num(f[2])?,
            occurrence: num(f[3])?,
            labels: f[4..].iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(UsageSet { languages, points })
}
