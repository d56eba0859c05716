//! Refinement of raw pivot alignments into lexified and morphological labels.
//!
//! Per target language:
//! 1. target tokens strongly tied to a source stopword are pruned;
//! 2. the token(s) with maximal association to the pivot are kept verbatim
//!    when their p-value is below the threshold ("lexified");
//! 3. every other usage point contributes its aligned token and the token
//!    aligned to the head verb of the pivot clause;
//! 4. all 2..=9 character substrings of those tokens are scored against the
//!    rest of the language's text;
//! 5. the strongest grams are selected and
//! 6. clustered into allomorph sets labeled `ngram_1..`;
//! 7. usage points are relabeled with a lexified token, a cluster label or
//!    NOMATCH.

pub mod cluster;
pub mod conllu;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;

use crate::aligner::{LanguageAlignment, UsageSet};
use crate::assoc::{score_units, top_scoring, AssociationScore, Counting, Event};
use crate::corpus::{ParallelCorpus, TargetText};
use crate::error::{read_to_string, Error, Result};
use crate::NOMATCH;

pub use cluster::{cluster_allomorphs, ClusterSettings};
pub use conllu::{load_conllu, parse_conllu, DependencyDoc};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    words: BTreeSet<String>,
}

impl StopwordList {
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: BTreeSet<String> = words.into_iter().map(Into::into).collect();
        if words.is_empty() {
            return Err(Error::Config {
                field: "stopwords".into(),
                msg: "list is empty".into(),
            });
        }
        if let Some(w) = words.iter().find(|w| w.is_empty() || w.to_lowercase() != **w) {
            return Err(Error::Config {
                field: "stopwords".into(),
                msg: format!("{w:?} is not a nonempty lowercase word"),
            });
        }
        Ok(StopwordList { words })
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

impl Default for StopwordList {
    fn default() -> Self {
        StopwordList::new(["and", "behold", "then", "jesus", "herod", "peter", "paul"]).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramCandidate {
    pub gram: String,
    pub score: AssociationScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramCluster {
    pub label: String,
    /// Sorted by gram.
    pub members: Vec<NgramCandidate>,
    pub total_cooccurrence: u64,
}

#[derive(Debug, Clone)]
pub struct NgramSettings {
    pub pivot: String,
    pub stopwords: StopwordList,
    pub epsilon: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub top_chi2: usize,
    pub top_cooccurrence: usize,
    pub cluster: ClusterSettings,
    pub verbal_pos: Vec<String>,
}

impl Default for NgramSettings {
    fn default() -> Self {
        NgramSettings {
            pivot: "when".into(),
            stopwords: StopwordList::default(),
            epsilon: 1e-10,
            n_min: 2,
            n_max: 9,
            top_chi2: 200,
            top_cooccurrence: 20,
            cluster: ClusterSettings::default(),
            verbal_pos: vec!["VERB".into()],
        }
    }
}

/// Source-slot events for one language: one per source token, carrying the
/// aligned target word (if any). `pivot` marks slots whose source token is
/// `word`.
fn link_events<'a>(
    corpus: &'a ParallelCorpus,
    target: &'a TargetText,
    alignment: &LanguageAlignment,
    word: &str,
) -> Vec<Event<'a>> {
    let mut events = Vec::new();
    for (id, va) in &alignment.verses {
        let (Some(src), Some(tgt)) = (corpus.source.get(id), target.verses.get(id)) else {
            continue;
        };
        for (i, s) in src.tokens.iter().enumerate() {
            events.push(Event {
                pivot: s == word,
                word: va.target_of(i).map(|j| tgt.tokens[j].as_str()),
            });
        }
    }
    events
}

fn aligned_to<'a>(events: &[Event<'a>]) -> Vec<String> {
    let set: BTreeSet<&str> = events.iter().filter(|e| e.pivot).filter_map(|e| e.word).collect();
    set.into_iter().map(String::from).collect()
}

/// Target tokens with a significant positive association to any stopword.
pub fn prune_stopword_echo(
    corpus: &ParallelCorpus,
    code: &str,
    alignment: &LanguageAlignment,
    stopwords: &StopwordList,
    epsilon: f64,
) -> Result<BTreeSet<String>> {
    let target = corpus.target(code)?;
    let mut removed = BTreeSet::new();
    for sw in stopwords.words() {
        let events = link_events(corpus, target, alignment, sw);
        let units = aligned_to(&events);
        for s in score_units(&events, &units, Counting::Token) {
            if s.p_value < epsilon && s.table.is_positive() {
                removed.insert(s.unit);
            }
        }
    }
    Ok(removed)
}

/// Tokens tied at the maximal chi2 whose p-value is below `epsilon`.
pub fn keep_lexified(scores: &[AssociationScore], epsilon: f64) -> BTreeSet<String> {
    top_scoring(scores)
        .into_iter()
        .filter(|s| s.p_value < epsilon && s.table.is_positive())
        .map(|s| s.unit.clone())
        .collect()
}

/// Target token aligned to the head verb of the pivot, or NOMATCH.
pub fn head_verb_fallback(
    deps: &DependencyDoc,
    alignment: &LanguageAlignment,
    target: &TargetText,
    verse_id: &str,
    pivot_idx: usize,
    verbal: &[String],
) -> Result<String> {
    let Some(verb) = deps.head_verb(verse_id, pivot_idx, verbal)? else {
        return Ok(NOMATCH.to_string());
    };
    let linked = alignment
        .verses
        .get(verse_id)
        .and_then(|va| va.target_of(verb))
        .and_then(|j| target.verses.get(verse_id).map(|v| v.tokens[j].clone()));
    Ok(linked.unwrap_or_else(|| NOMATCH.to_string()))
}

/// Every contiguous substring of `token` with `n_min..=n_max` scalar
/// values, one per start position.
pub fn char_ngrams(token: &str, n_min: usize, n_max: usize) -> Vec<&str> {
    let bounds: Vec<usize> = token.char_indices().map(|(i, _)| i).chain([token.len()]).collect();
    let nchars = bounds.len() - 1;
    let mut out = Vec::new();
    for n in n_min.max(1)..=n_max.min(nchars) {
        for s in 0..=nchars - n {
            out.push(&token[bounds[s]..bounds[s + n]]);
        }
    }
    out
}

/// Scores every distinct substring of the candidate tokens. Only grams
/// over-represented among pivot events are returned, sorted by gram.
pub fn mine_ngrams(candidates: &BTreeSet<String>, events: &[Event], n_min: usize, n_max: usize) -> Vec<NgramCandidate> {
    let grams: BTreeSet<&str> = candidates
        .iter()
        .flat_map(|t| char_ngrams(t, n_min, n_max))
        .collect();
    let units: Vec<String> = grams.into_iter().map(String::from).collect();
    score_units(events, &units, Counting::Substring)
        .into_iter()
        .filter(|s| s.table.is_positive())
        .map(|s| NgramCandidate {
            gram: s.unit.clone(),
            score: s,
        })
        .collect()
}

/// Top `top_chi2` by chi2, then the first `top_cooccurrence` of those by
/// cooccurrence. All ties are broken by total orders.
pub fn select_candidates(scored: &[NgramCandidate], top_chi2: usize, top_cooccurrence: usize) -> Vec<NgramCandidate> {
    let mut by_chi: Vec<&NgramCandidate> = scored.iter().collect();
    by_chi.sort_by(|a, b| {
        b.score
            .chi2
            .total_cmp(&a.score.chi2)
            .then_with(|| b.score.cooccurrence.cmp(&a.score.cooccurrence))
            .then_with(|| a.gram.cmp(&b.gram))
    });
    by_chi.truncate(top_chi2);
    by_chi.sort_by(|a, b| {
        b.score
            .cooccurrence
            .cmp(&a.score.cooccurrence)
            .then_with(|| b.score.chi2.total_cmp(&a.score.chi2))
            .then_with(|| a.gram.cmp(&b.gram))
    });
    by_chi.into_iter().take(top_cooccurrence).cloned().collect()
}

/// Label for one usage point given its aligned token and its candidate
/// tokens (aligned and head-verb tokens not pruned or lexified).
pub fn relabel_point(
    aligned: Option<&str>,
    candidates: &[&str],
    clusters: &[NgramCluster],
    lexified: &BTreeSet<String>,
) -> String {
    if let Some(a) = aligned {
        if lexified.contains(a) {
            return a.to_string();
        }
    }
    let mut best: Option<(usize, u64, &NgramCluster)> = None;
    for c in clusters {
        let longest = c
            .members
            .iter()
            .filter(|m| candidates.iter().any(|t| t.contains(m.gram.as_str())))
            .map(|m| m.gram.chars().count())
            .max();
        let Some(len) = longest else { continue };
        let better = match best {
            None => true,
            Some((bl, bt, _)) => (len, c.total_cooccurrence) > (bl, bt),
        };
        if better {
            best = Some((len, c.total_cooccurrence, c));
        }
    }
    best.map_or_else(|| NOMATCH.to_string(), |(_, _, c)| c.label.clone())
}

/// Everything the pipeline derives for one language.
#[derive(Debug, Clone)]
pub struct LanguageResult {
    pub code: String,
    pub removed: BTreeSet<String>,
    pub token_scores: Vec<AssociationScore>,
    pub lexified: BTreeSet<String>,
    pub mined: usize,
    pub selected: Vec<NgramCandidate>,
    pub clusters: Vec<NgramCluster>,
    /// One label per usage point, in usage-set order.
    pub labels: Vec<String>,
}

pub fn run_language(
    corpus: &ParallelCorpus,
    alignment: &LanguageAlignment,
    usage: &UsageSet,
    deps: Option<&DependencyDoc>,
    settings: &NgramSettings,
) -> Result<LanguageResult> {
    let code = alignment.code.as_str();
    let target = corpus.target(code)?;
    let removed = prune_stopword_echo(corpus, code, alignment, &settings.stopwords, settings.epsilon)?;

    let pivot_events = link_events(corpus, target, alignment, &settings.pivot);
    let units: Vec<String> = aligned_to(&pivot_events)
        .into_iter()
        .filter(|u| !removed.contains(u))
        .collect();
    let token_scores = score_units(&pivot_events, &units, Counting::Token);
    let lexified = keep_lexified(&token_scores, settings.epsilon);

    let aligned_col = usage.column(code)?;
    let usable = |w: &str| w != NOMATCH && !removed.contains(w) && !lexified.contains(w);
    // per point: (aligned token, candidate target positions)
    let mut per_point: Vec<(Option<&str>, Vec<usize>)> = Vec::with_capacity(usage.points.len());
    let mut marked: HashSet<(&str, usize)> = HashSet::new();
    for (p, aligned) in usage.points.iter().zip(&aligned_col) {
        let aligned = (*aligned != NOMATCH).then_some(*aligned);
        let mut positions = Vec::new();
        if aligned.is_some_and(|a| lexified.contains(a)) {
            per_point.push((aligned, positions));
            continue;
        }
        let va = alignment.verses.get(&p.verse_id);
        let tgt = target.verses.get(&p.verse_id);
        if let (Some(va), Some(tgt)) = (va, tgt) {
            if let Some(j) = va.target_of(p.pivot_idx) {
                if usable(&tgt.tokens[j]) {
                    positions.push(j);
                }
            }
            if let Some(deps) = deps {
                if let Some(v) = deps.head_verb(&p.verse_id, p.pivot_idx, &settings.verbal_pos)? {
                    if let Some(j) = va.target_of(v) {
                        if usable(&tgt.tokens[j]) && !positions.contains(&j) {
                            positions.push(j);
                        }
                    }
                }
            }
            for &j in &positions {
                marked.insert((p.verse_id.as_str(), j));
            }
        }
        per_point.push((aligned, positions));
    }

    // every target token occurrence is an event; candidates are the pivot side
    let mut events = Vec::new();
    let mut candidates = BTreeSet::new();
    for id in alignment.verses.keys() {
        let Some(tgt) = target.verses.get(id) else { continue };
        for (j, w) in tgt.tokens.iter().enumerate() {
            let pivot = marked.contains(&(id.as_str(), j));
            if pivot {
                candidates.insert(w.clone());
            }
            events.push(Event {
                pivot,
                word: Some(w.as_str()),
            });
        }
    }
    let mined = mine_ngrams(&candidates, &events, settings.n_min, settings.n_max);
    let selected = select_candidates(&mined, settings.top_chi2, settings.top_cooccurrence);
    let clusters = cluster_allomorphs(&selected, settings.cluster);

    let labels = usage
        .points
        .iter()
        .zip(&per_point)
        .map(|(p, (aligned, positions))| {
            let tokens: Vec<&str> = match target.verses.get(&p.verse_id) {
                Some(tgt) => positions.iter().map(|&j| tgt.tokens[j].as_str()).collect(),
                None => Vec::new(),
            };
            relabel_point(*aligned, &tokens, &clusters, &lexified)
        })
        .collect();
    info!(
        "{code}: {} pruned, {} lexified, {} grams mined, {} clusters",
        removed.len(),
        lexified.len(),
        mined.len(),
        clusters.len()
    );
    Ok(LanguageResult {
        code: code.to_string(),
        removed,
        token_scores,
        lexified,
        mined: mined.len(),
        selected,
        clusters,
        labels,
    })
}

/// Runs every language of `usage` in parallel; results are keyed by code.
pub fn run_all(
    corpus: &ParallelCorpus,
    alignments: &BTreeMap<String, LanguageAlignment>,
    usage: &UsageSet,
    deps: Option<&DependencyDoc>,
    settings: &NgramSettings,
) -> Result<BTreeMap<String, LanguageResult>> {
    if let Some(d) = deps {
        d.check_against(&corpus.source)?;
    } else {
        warn!("no dependency annotation; head-verb fallback disabled");
    }
    usage
        .languages
        .par_iter()
        .map(|code| {
            let al = alignments
                .get(code)
                .ok_or_else(|| Error::UnknownLanguage(code.clone()))?;
            Ok((code.clone(), run_language(corpus, al, usage, deps, settings)?))
        })
        .collect()
}

/// Usage set with every column replaced by the refined labels.
pub fn relabeled_usage(usage: &UsageSet, results: &BTreeMap<String, LanguageResult>) -> Result<UsageSet> {
    let mut out = usage.clone();
    for (code, r) in results {
        out.set_column(code, r.labels.clone())?;
    }
    Ok(out)
}

/// Tab-separated cluster report. Lexified tokens appear as their own label.
pub fn format_cluster_report(r: &LanguageResult) -> String {
    let mut out = String::from("label\tmember\tchi2\tp\tcooccurrence\n");
    for s in r.token_scores.iter().filter(|s| r.lexified.contains(&s.unit)) {
        let _ = writeln!(out, "{}\t{}\t{:e}\t{:e}\t{}", s.unit, s.unit, s.chi2, s.p_value, s.cooccurrence);
    }
    for c in &r.clusters {
        for m in &c.members {
            let s = &m.score;
            let _ = writeln!(out, "{}\t{}\t{:e}\t{:e}\t{}", c.label, m.gram, s.chi2, s.p_value, s.cooccurrence);
        }
    }
    out
}

/// Members per label, as written by [`format_cluster_report`].
pub fn parse_cluster_report(text: &str, origin: &str) -> Result<BTreeMap<String, Vec<String>>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        if k == 0 {
            if !line.starts_with("label\tmember") {
                return Err(Error::parse(origin, 1, "unexpected cluster report header"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(Error::parse(origin, k + 1, "wrong column count"));
        }
        out.entry(f[0].to_string()).or_default().push(f[1].to_string());
    }
    Ok(out)
}

pub fn load_cluster_report(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    parse_cluster_report(&read_to_string(path)?, &path.display().to_string())
}
