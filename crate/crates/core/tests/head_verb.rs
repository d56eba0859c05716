use std::collections::BTreeMap;

use typomap_core::aligner::{LanguageAlignment, VerseAlignment};
use typomap_core::corpus::{parse_verses, LanguageMeta, ParallelCorpus};
use typomap_core::ngram::{head_verb_fallback, parse_conllu};
use typomap_core::NOMATCH;

const DEPS: &str = "# sent_id = v1
1\twhen\t_\tSCONJ\t_\t_\t3\tmark\t_\t_
2\the\t_\tPRON\t_\t_\t3\tnsubj\t_\t_
3\tarrived\t_\tVERB\t_\t_\t6\tadvcl\t_\t_
4\t,\t_\tPUNCT\t_\t_\t3\tpunct\t_\t_
5\tthey\t_\tPRON\t_\t_\t6\tnsubj\t_\t_
6\tleft\t_\tVERB\t_\t_\t0\troot\t_\t_

# sent_id = v2
1\twhen\t_\tSCONJ\t_\t_\t2\tmark\t_\t_
2\tevening\t_\tNOUN\t_\t_\t0\troot\t_\t_

";

fn setup(links: Vec<Option<usize>>) -> (ParallelCorpus, LanguageAlignment) {
    let src = parse_verses("v1\twhen he arrived, they left\nv2\twhen evening\n", "src").unwrap();
    let tgt = parse_verses("v1\tne tomaka ti wese\nv2\tquepa tarde\n", "tgt").unwrap();
    let meta = LanguageMeta::new("tgt", "Target", 0.0, 0.0).unwrap();
    let corpus = ParallelCorpus::new(src, vec![(meta, tgt)]).unwrap();
    let mut verses = BTreeMap::new();
    verses.insert(
        "v1".to_string(),
        VerseAlignment {
            verse_id: "v1".into(),
            tgt_len: 4,
            src_to_tgt: links,
        },
    );
    verses.insert(
        "v2".to_string(),
        VerseAlignment {
            verse_id: "v2".into(),
            tgt_len: 2,
            src_to_tgt: vec![Some(0), Some(1)],
        },
    );
    (corpus, LanguageAlignment { code: "tgt".into(), verses })
}

fn verbal() -> Vec<String> {
    vec!["VERB".into()]
}

#[test]
fn follows_head_chain_to_verb() {
    let deps = parse_conllu(DEPS, "deps").unwrap();
    let (corpus, al) = setup(vec![None, Some(0), Some(1), Some(2), Some(3)]);
    let t = corpus.target("tgt").unwrap();
    assert_eq!(head_verb_fallback(&deps, &al, t, "v1", 0, &verbal()).unwrap(), "tomaka");
}

#[test]
fn root_without_verb_is_nomatch() {
    let deps = parse_conllu(DEPS, "deps").unwrap();
    let (corpus, al) = setup(vec![None, Some(0), Some(1), Some(2), Some(3)]);
    let t = corpus.target("tgt").unwrap();
    assert_eq!(head_verb_fallback(&deps, &al, t, "v2", 0, &verbal()).unwrap(), NOMATCH);
}

#[test]
fn null_aligned_verb_is_nomatch() {
    let deps = parse_conllu(DEPS, "deps").unwrap();
    let (corpus, al) = setup(vec![None, Some(0), None, Some(2), Some(3)]);
    let t = corpus.target("tgt").unwrap();
    assert_eq!(head_verb_fallback(&deps, &al, t, "v1", 0, &verbal()).unwrap(), NOMATCH);
}

#[test]
fn verse_missing_from_deps_is_an_error() {
    let deps = parse_conllu(DEPS, "deps").unwrap();
    let (corpus, mut al) = setup(vec![None, Some(0), Some(1), Some(2), Some(3)]);
    let t = corpus.target("tgt").unwrap();
    al.verses.get_mut("v1").unwrap().verse_id = "v9".into();
    let err = head_verb_fallback(&deps, &al, t, "v9", 0, &verbal()).unwrap_err();
    assert!(err.to_string().contains("v9"), "{err}");
}
