//! In-memory chaining of the stages: align, extract, n-gram refinement,
//! semantic map and evaluation.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::aligner::{align_language, extract_usage_points, LanguageAlignment, UsageSet};
use crate::config::PipelineConfig;
use crate::corpus::ParallelCorpus;
use crate::error::Result;
use crate::evalharness::{
    cluster_marker, occurrence_indices, predictions_from_map, score_alignment, GoldSample, MarkerSuffixes, Prf,
};
use crate::ngram::{relabeled_usage, run_all, DependencyDoc, LanguageResult};
use crate::semmap::{build_map, Embedding, SemanticMap};

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub alignments: BTreeMap<String, LanguageAlignment>,
    /// Raw aligned tokens per point.
    pub usage: UsageSet,
    pub ngram: BTreeMap<String, LanguageResult>,
    /// Refined labels per point.
    pub labels: UsageSet,
    pub map: SemanticMap,
    pub embedding: Embedding,
}

/// Aligns every target language, in parallel, keyed by code.
pub fn align_all(corpus: &ParallelCorpus, cfg: &PipelineConfig) -> Result<BTreeMap<String, LanguageAlignment>> {
    let settings = cfg.aligner_settings();
    corpus
        .codes()
        .par_iter()
        .map(|code| Ok((code.clone(), align_language(corpus, code, settings)?)))
        .collect()
}

pub fn run(corpus: &ParallelCorpus, deps: Option<&DependencyDoc>, cfg: &PipelineConfig) -> Result<PipelineRun> {
    let alignments = align_all(corpus, cfg)?;
    let usage = extract_usage_points(corpus, &alignments, &cfg.pivot)?;
    let ngram = run_all(corpus, &alignments, &usage, deps, &cfg.ngram_settings()?)?;
    let labels = relabeled_usage(&usage, &ngram)?;
    let (map, embedding) = build_map(&labels)?;
    Ok(PipelineRun {
        alignments,
        usage,
        ngram,
        labels,
        map,
        embedding,
    })
}

/// Cluster label to marker name, for clusters whose members point to one
/// marker.
pub fn cluster_markers(result: &LanguageResult, suffixes: &MarkerSuffixes) -> BTreeMap<String, String> {
    result
        .clusters
        .iter()
        .filter_map(|c| {
            let grams: Vec<String> = c.members.iter().map(|m| m.gram.clone()).collect();
            cluster_marker(&grams, suffixes).map(|m| (c.label.clone(), m.to_string()))
        })
        .collect()
}

/// Scores one language's map labels against gold, renaming clusters to
/// their markers first.
pub fn evaluate_language(
    map: &SemanticMap,
    result: &LanguageResult,
    gold: &GoldSample,
    suffixes: &MarkerSuffixes,
) -> Result<Prf> {
    let occ = occurrence_indices(map.points.iter().map(|p| &p.verse_id));
    let rename = cluster_markers(result, suffixes);
    let pred = predictions_from_map(map, &result.code, &occ, &rename)?;
    score_alignment(&pred, gold)
}
