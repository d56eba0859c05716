//! Deterministic inputs for the benchmarks.

use typomap_core::aligner::{align_language, extract_usage_points, AlignerSettings, LanguageAlignment};
use typomap_core::corpus::{parse_metadata, parse_verses, ParallelCorpus};
use typomap_core::ngram::parse_conllu;
use typomap_core::synth::{generate, SynthSpec};
use typomap_core::{DependencyDoc, UsageSet};

pub struct Fixture {
    pub corpus: ParallelCorpus,
    pub deps: DependencyDoc,
}

/// The standard synthetic corpus with `verses` verses and seed 1.
pub fn synthetic(verses: usize) -> Fixture {
    let s = generate(&SynthSpec::standard(verses, 1)).expect("valid spec");
    let metas = parse_metadata(&s.metadata, "languages.tsv").expect("generated metadata");
    let targets = metas
        .iter()
        .map(|m| (m.clone(), parse_verses(&s.targets[&m.code], &m.code).expect("generated verses")))
        .collect();
    let source = parse_verses(&s.source, "eng").expect("generated verses");
    Fixture {
        corpus: ParallelCorpus::new(source, targets).expect("consistent corpus"),
        deps: parse_conllu(&s.conllu, "eng.conllu").expect("generated annotation"),
    }
}

/// Alignments for every language and the resulting usage points.
pub fn aligned(f: &Fixture) -> (std::collections::BTreeMap<String, LanguageAlignment>, UsageSet) {
    let alignments = f
        .corpus
        .codes()
        .into_iter()
        .map(|c| {
            let al = align_language(&f.corpus, &c, AlignerSettings::default()).expect("alignable");
            (c, al)
        })
        .collect();
    let usage = extract_usage_points(&f.corpus, &alignments, "when").expect("pivot present");
    (alignments, usage)
}

/// A reproducible pseudo-random sequence in `[0, 1)` (splitmix64).
pub fn unit_stream(seed: u64) -> impl Iterator<Item = f64> {
    let mut state = seed;
    std::iter::repeat_with(move || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    })
}
