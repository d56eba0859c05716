use std::collections::BTreeMap;

use typomap_core::config::PipelineConfig;
use typomap_core::corpus::{parse_metadata, parse_verses, ParallelCorpus};
use typomap_core::evalharness::{parse_gold, MarkerSuffixes};
use typomap_core::ngram::{format_cluster_report, parse_conllu};
use typomap_core::pipeline::{cluster_markers, evaluate_language, run, PipelineRun};
use typomap_core::semmap::format_map;
use typomap_core::synth::{generate, Strategy, SynthCorpus, SynthSpec};

fn corpus_of(s: &SynthCorpus) -> ParallelCorpus {
    let metas = parse_metadata(&s.metadata, "languages.tsv").unwrap();
    let targets = metas
        .iter()
        .map(|m| (m.clone(), parse_verses(&s.targets[&m.code], &m.code).unwrap()))
        .collect();
    ParallelCorpus::new(parse_verses(&s.source, "eng").unwrap(), targets).unwrap()
}

fn run_synth(spec: &SynthSpec) -> (SynthCorpus, PipelineRun) {
    let s = generate(spec).unwrap();
    let deps = parse_conllu(&s.conllu, "eng.conllu").unwrap();
    let r = run(&corpus_of(&s), Some(&deps), &PipelineConfig::default()).unwrap();
    (s, r)
}

fn suffixes() -> MarkerSuffixes {
    MarkerSuffixes::new([("ka", "SS"), ("ku", "DS")]).unwrap()
}

#[test]
fn mixed_strategy_recovers_both_markers() {
    let (s, r) = run_synth(&SynthSpec::standard(200, 1));
    let res = &r.ngram["mix"];
    assert_eq!(res.lexified.iter().collect::<Vec<_>>(), ["quepa"]);
    assert!(res.clusters.len() >= 2);
    let markers: Vec<String> = cluster_markers(res, &suffixes()).into_values().collect();
    assert!(markers.contains(&"SS".to_string()) && markers.contains(&"DS".to_string()));
    let gold = parse_gold(&s.gold["mix"], "gold").unwrap();
    let prf = evaluate_language(&r.map, res, &gold, &suffixes()).unwrap();
    assert!(prf.precision >= 0.9 && prf.recall >= 0.9, "{prf:?}");
}

#[test]
fn every_strategy_scores_well() {
    let (s, r) = run_synth(&SynthSpec::standard(200, 1));
    for (code, res) in &r.ngram {
        let gold = parse_gold(&s.gold[code], "gold").unwrap();
        let prf = evaluate_language(&r.map, res, &gold, &suffixes()).unwrap();
        assert!(prf.f1 >= 0.9, "{code}: {prf:?}");
    }
}

#[test]
fn stopword_echoes_are_pruned() {
    let (_, r) = run_synth(&SynthSpec::standard(200, 1));
    // and, then, behold and the four names
    for res in r.ngram.values() {
        assert_eq!(res.removed.len(), 7, "{}: {:?}", res.code, res.removed);
    }
}

#[test]
fn lexified_only_has_one_token_and_no_clusters() {
    let spec = SynthSpec::single(200, 1, Strategy::LexifiedOnly { connector: "tuan".into() });
    let (_, r) = run_synth(&spec);
    let res = &r.ngram["tgt"];
    assert_eq!(res.lexified.iter().collect::<Vec<_>>(), ["tuan"]);
    assert!(res.clusters.is_empty(), "{:?}", res.clusters);
    assert!(res.labels.iter().all(|l| l == "tuan"));
}

#[test]
fn pipeline_is_deterministic() {
    let spec = SynthSpec::standard(120, 7);
    let (_, a) = run_synth(&spec);
    let (_, b) = run_synth(&spec);
    assert_eq!(format_map(&a.map), format_map(&b.map));
    let reports = |r: &PipelineRun| -> BTreeMap<String, String> {
        r.ngram.iter().map(|(c, res)| (c.clone(), format_cluster_report(res))).collect()
    };
    assert_eq!(reports(&a), reports(&b));
}
