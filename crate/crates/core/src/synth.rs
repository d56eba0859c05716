//! Synthetic parallel corpus with known subordination strategies.
//!
//! The source language is English-like. Each verse belongs to one context
//! class: a same-subject `when` clause, a different-subject `when` clause, a
//! temporal-setting `when` clause, or a plain clause without the pivot.
//! Target languages realize the three `when` classes with a connector word
//! and/or a verbal suffix, according to their strategy. Verb suffixes carry
//! an echo vowel (`-aka`, `-uku`) so marked verbs end in `ka` or `ku`.
//!
//! Output: one verse file per language, a metadata table, dependency
//! annotation of the source and one gold file per target.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{format_metadata, LanguageMeta};
use crate::error::{Error, Result};
use crate::ngram::conllu::format_sentence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContextClass {
    SameSubject,
    DifferentSubject,
    Setting,
    Plain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strategy {
    /// Every `when` clause takes the connector.
    LexifiedOnly { connector: String },
    /// Same/different subject by suffix; setting clauses take the
    /// different-subject suffix.
    MorphologicalOnly,
    /// Suffixes for same/different subject, connector for settings.
    Mixed { connector: String },
    /// Connector for same/different subject, same-subject suffix for
    /// settings.
    InvertedMixed { connector: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthLanguage {
    pub meta: LanguageMeta,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub verses: usize,
    pub seed: u64,
    /// Number of distinct verbs.
    pub vocab: usize,
    pub languages: Vec<SynthLanguage>,
}

pub const SOURCE_CODE: &str = "eng";
pub const SS_SUFFIX: &str = "aka";
pub const DS_SUFFIX: &str = "uku";
const FINITE: &str = "e";

const VERBS: [&str; 24] = [
    "came", "went", "ate", "saw", "spoke", "heard", "slept", "walked", "wept", "prayed", "sat", "stood", "rose",
    "fell", "left", "arrived", "returned", "entered", "departed", "rested", "sang", "fished", "built", "taught",
];
const NOUNS: [&str; 16] = [
    "bread", "water", "fish", "house", "boat", "mountain", "sea", "road", "temple", "field", "wine", "stone", "door",
    "sheep", "garden", "net",
];
const TIMES: [&str; 5] = ["evening", "morning", "night", "day", "sabbath"];
const PRONOUNS: [&str; 4] = ["he", "she", "they", "we"];
const NAMES: [&str; 4] = ["jesus", "peter", "paul", "herod"];
const FUNCTION: [&str; 3] = ["and", "then", "behold"];

fn lang(code: &str, name: &str, lon: f64, lat: f64, strategy: Strategy) -> SynthLanguage {
    SynthLanguage {
        meta: LanguageMeta::new(code, name, lon, lat).expect("valid built-in coordinates"),
        strategy,
    }
}

impl SynthSpec {
    /// The bundled benchmark: one language per strategy inside Latin
    /// America and one outside it.
    pub fn standard(verses: usize, seed: u64) -> Self {
        SynthSpec {
            verses,
            seed,
            vocab: 20,
            languages: vec![
                lang("mix", "Mixed", -104.5, 22.0, Strategy::Mixed { connector: "quepa".into() }),
                lang("lex", "Lexified", -99.1, 19.4, Strategy::LexifiedOnly { connector: "tuan".into() }),
                lang("mor", "Morphological", -75.0, -10.0, Strategy::MorphologicalOnly),
                lang("inv", "Inverted", -58.4, -34.6, Strategy::InvertedMixed { connector: "ima".into() }),
                lang("far", "Distant", 10.0, 50.0, Strategy::LexifiedOnly { connector: "dan".into() }),
            ],
        }
    }

    /// Only the given strategy, one language coded `tgt`.
    pub fn single(verses: usize, seed: u64, strategy: Strategy) -> Self {
        SynthSpec {
            verses,
            seed,
            vocab: 20,
            languages: vec![lang("tgt", "Target", -90.0, 15.0, strategy)],
        }
    }
}

/// Generated files, as text.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub source: String,
    /// Verse file per target code.
    pub targets: BTreeMap<String, String>,
    pub metadata: String,
    pub conllu: String,
    /// Gold file per target code.
    pub gold: BTreeMap<String, String>,
    /// Context class per verse id.
    pub classes: BTreeMap<String, ContextClass>,
}

impl SynthCorpus {
    /// Writes `eng.txt`, `<code>.txt`, `languages.tsv`, `eng.conllu` and
    /// `gold_<code>.tsv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: String, body: &str| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        write(format!("{SOURCE_CODE}.txt"), &self.source)?;
        for (code, body) in &self.targets {
            write(format!("{code}.txt"), body)?;
        }
        write("languages.tsv".into(), &self.metadata)?;
        write(format!("{SOURCE_CODE}.conllu"), &self.conllu)?;
        for (code, body) in &self.gold {
            write(format!("gold_{code}.tsv"), body)?;
        }
        Ok(())
    }
}

struct WordMaker<'a> {
    rng: &'a mut ChaCha8Rng,
    used: HashSet<String>,
}

impl WordMaker<'_> {
    // consonants without k so that "ka"/"ku" only arise from suffixes
    const C: &'static [u8] = b"bdgjlmnprstvwz";

    fn fresh(&mut self, make: impl Fn(&mut ChaCha8Rng) -> String) -> String {
        loop {
            let w = make(self.rng);
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn word(&mut self) -> String {
        self.fresh(|rng| {
            let syl = rng.gen_range(2..=3);
            (0..syl)
                .map(|_| {
                    let c = Self::C[rng.gen_range(0..Self::C.len())] as char;
                    let v = b"aeiou"[rng.gen_range(0..5)] as char;
                    format!("{c}{v}")
                })
                .collect()
        })
    }

    // stems use e/i/o and end in a sonorant or s/t
    fn stem(&mut self) -> String {
        self.fresh(|rng| {
            let syl = rng.gen_range(1..=2);
            let mut s: String = (0..syl)
                .map(|_| {
                    let c = Self::C[rng.gen_range(0..Self::C.len())] as char;
                    let v = b"eio"[rng.gen_range(0..3)] as char;
                    format!("{c}{v}")
                })
                .collect();
            s.push(b"lmnrst"[rng.gen_range(0..6)] as char);
            s
        })
    }
}

struct Lexicon {
    words: BTreeMap<&'static str, String>,
    stems: BTreeMap<&'static str, String>,
}

fn lexicon(rng: &mut ChaCha8Rng, verbs: &[&'static str], reserved: &[&str]) -> Lexicon {
    let mut maker = WordMaker {
        rng,
        used: reserved.iter().map(|s| s.to_string()).collect(),
    };
    let mut stems = BTreeMap::new();
    for v in verbs {
        stems.insert(*v, maker.stem());
    }
    // stem forms must not collide with ordinary words
    for s in stems.values() {
        for suffix in [FINITE, SS_SUFFIX, DS_SUFFIX] {
            maker.used.insert(format!("{s}{suffix}"));
        }
    }
    let mut words = BTreeMap::new();
    for w in NOUNS.iter().chain(&TIMES).chain(&PRONOUNS).chain(&NAMES).chain(&FUNCTION) {
        words.insert(*w, maker.word());
    }
    Lexicon { words, stems }
}

struct Clause {
    class: ContextClass,
    and: bool,
    pron1: &'static str,
    pron2: &'static str,
    verb1: &'static str,
    verb2: &'static str,
    obj: &'static str,
    time: &'static str,
    opener: Option<&'static str>,
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

// Source tokens with (upos, head, deprel); heads are 1-based.
fn source_sentence(c: &Clause) -> Vec<(&'static str, &'static str, usize, &'static str)> {
    let mut rows: Vec<(&'static str, &'static str, usize, &'static str)> = Vec::new();
    let off = usize::from(c.and);
    match c.class {
        ContextClass::SameSubject | ContextClass::DifferentSubject | ContextClass::Setting => {
            // [and] when X verb1 , pron2 verb2 obj
            let verb1 = off + 3;
            let verb2 = off + 6;
            if c.and {
                rows.push(("and", "CCONJ", verb2, "cc"));
            }
            rows.push(("when", "SCONJ", verb1, "mark"));
            if c.class == ContextClass::Setting {
                rows.push((c.time, "NOUN", verb1, "nsubj"));
                rows.push(("came", "VERB", verb2, "advcl"));
            } else {
                rows.push((c.pron1, "PRON", verb1, "nsubj"));
                rows.push((c.verb1, "VERB", verb2, "advcl"));
            }
            rows.push((",", "PUNCT", verb1, "punct"));
            rows.push((c.pron2, "PRON", verb2, "nsubj"));
            rows.push((c.verb2, "VERB", 0, "root"));
            rows.push((c.obj, "NOUN", verb2, "obj"));
        }
        ContextClass::Plain => {
            let verb = if c.opener.is_some() { 3 } else { 2 };
            if let Some(o) = c.opener {
                let pos = if o == "behold" { "INTJ" } else { "ADV" };
                rows.push((o, pos, verb, "advmod"));
            }
            let subj = if c.opener == Some("behold") { c.pron2 } else { c.pron1 };
            let upos = if NAMES.contains(&subj) { "PROPN" } else { "PRON" };
            rows.push((subj, upos, verb, "nsubj"));
            rows.push((c.verb2, "VERB", 0, "root"));
            rows.push((c.obj, "NOUN", verb, "obj"));
        }
    }
    rows
}

fn source_text(rows: &[(&str, &str, usize, &str)]) -> String {
    let mut out = String::new();
    for (k, (form, ..)) in rows.iter().enumerate() {
        if *form == "," {
            out.push(',');
            continue;
        }
        if k > 0 {
            out.push(' ');
        }
        out.push_str(form);
    }
    let mut text = capitalize(&out);
    text.push('.');
    text
}

/// Target tokens, plus the gold label of the `when` clause if there is one.
fn target_sentence(c: &Clause, lang: &SynthLanguage, lex: &Lexicon) -> (Vec<String>, Option<String>) {
    let w = |k: &str| lex.words[k].clone();
    let v = |k: &str, suffix: &str| format!("{}{suffix}", lex.stems[k]);
    let mut toks = Vec::new();
    if c.and {
        toks.push(w("and"));
    }
    if c.class == ContextClass::Plain {
        if let Some(o) = c.opener {
            toks.push(w(o));
        }
        let subj = if c.opener == Some("behold") { c.pron2 } else { c.pron1 };
        toks.push(w(subj));
        toks.push(v(c.verb2, FINITE));
        toks.push(w(c.obj));
        return (toks, None);
    }
    // (connector, suffix of the subordinate verb)
    let (connector, suffix): (Option<&str>, &str) = match (&lang.strategy, c.class) {
        (Strategy::LexifiedOnly { connector }, _) => (Some(connector), FINITE),
        (Strategy::MorphologicalOnly, ContextClass::SameSubject) => (None, SS_SUFFIX),
        (Strategy::MorphologicalOnly, _) => (None, DS_SUFFIX),
        (Strategy::Mixed { connector }, ContextClass::Setting) => (Some(connector), FINITE),
        (Strategy::Mixed { .. }, ContextClass::SameSubject) => (None, SS_SUFFIX),
        (Strategy::Mixed { .. }, _) => (None, DS_SUFFIX),
        (Strategy::InvertedMixed { .. }, ContextClass::Setting) => (None, SS_SUFFIX),
        (Strategy::InvertedMixed { connector }, _) => (Some(connector), FINITE),
    };
    let gold = match (connector, suffix) {
        (Some(conn), _) => conn.to_string(),
        (None, s) if s == SS_SUFFIX => "SS".to_string(),
        _ => "DS".to_string(),
    };
    if let Some(conn) = connector {
        toks.push(conn.to_string());
    }
    if c.class == ContextClass::Setting {
        toks.push(w(c.time));
        toks.push(v("came", suffix));
    } else {
        toks.push(w(c.pron1));
        toks.push(v(c.verb1, suffix));
    }
    // a same-subject matrix clause drops its pronoun when marked
    let drop_subject = c.class == ContextClass::SameSubject && suffix == SS_SUFFIX;
    if !drop_subject {
        toks.push(w(c.pron2));
    }
    toks.push(v(c.verb2, FINITE));
    toks.push(w(c.obj));
    (toks, Some(gold))
}

fn target_text(toks: &[String]) -> String {
    let mut s = capitalize(&toks.join(" "));
    s.push('.');
    s
}

pub fn verse_id(k: usize) -> String {
    format!("40{:03}{:03}", k / 30 + 1, k % 30 + 1)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    if spec.verses < 50 {
        return Err(Error::InvalidArgument(format!("need at least 50 verses, got {}", spec.verses)));
    }
    if spec.vocab < 2 || spec.vocab > VERBS.len() {
        return Err(Error::InvalidArgument(format!("vocab must be in 2..={}", VERBS.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let verbs: Vec<&'static str> = {
        let mut v: Vec<&'static str> = VERBS[..spec.vocab].to_vec();
        if !v.contains(&"came") {
            v[0] = "came";
        }
        v
    };

    let classes_cycle = [
        ContextClass::SameSubject,
        ContextClass::DifferentSubject,
        ContextClass::Setting,
        ContextClass::Plain,
    ];
    let mut classes: Vec<ContextClass> = (0..spec.verses).map(|k| classes_cycle[k % 4]).collect();
    classes.shuffle(&mut rng);

    let clauses: Vec<Clause> = classes
        .iter()
        .map(|&class| {
            let pron1 = *PRONOUNS.choose(&mut rng).unwrap();
            let pron2 = match class {
                ContextClass::SameSubject => pron1,
                ContextClass::DifferentSubject => *PRONOUNS.iter().filter(|p| **p != pron1).collect::<Vec<_>>().choose(&mut rng).unwrap(),
                _ => *PRONOUNS.choose(&mut rng).unwrap(),
            };
            let opener = match rng.gen_range(0..4) {
                0 => Some("then"),
                1 => Some("behold"),
                _ => None,
            };
            let plain_subj = if rng.gen_bool(0.4) { *NAMES.choose(&mut rng).unwrap() } else { pron1 };
            let plain = class == ContextClass::Plain;
            Clause {
                class,
                and: rng.gen_bool(0.3),
                pron1: if plain { plain_subj } else { pron1 },
                pron2: if plain && opener == Some("behold") { plain_subj } else { pron2 },
                verb1: verbs.choose(&mut rng).copied().unwrap(),
                verb2: verbs.choose(&mut rng).copied().unwrap(),
                obj: NOUNS.choose(&mut rng).unwrap(),
                time: TIMES.choose(&mut rng).unwrap(),
                opener: if plain { opener } else { None },
            }
        })
        .collect();

    let mut source = String::new();
    let mut conllu = String::new();
    let mut class_map = BTreeMap::new();
    for (k, c) in clauses.iter().enumerate() {
        let id = verse_id(k);
        let rows = source_sentence(c);
        let _ = writeln!(source, "{id}\t{}", source_text(&rows));
        conllu.push_str(&format_sentence(&id, &rows));
        class_map.insert(id, c.class);
    }

    let mut targets = BTreeMap::new();
    let mut gold = BTreeMap::new();
    let mut metas = Vec::new();
    for lang in &spec.languages {
        let reserved: Vec<&str> = match &lang.strategy {
            Strategy::LexifiedOnly { connector }
            | Strategy::Mixed { connector }
            | Strategy::InvertedMixed { connector } => vec![connector.as_str()],
            Strategy::MorphologicalOnly => vec![],
        };
        let lex = lexicon(&mut rng, &verbs, &reserved);
        let mut text = String::new();
        let mut g = String::from("verse_id\toccurrence\tlabel\n");
        for (k, c) in clauses.iter().enumerate() {
            let id = verse_id(k);
            let (toks, label) = target_sentence(c, lang, &lex);
            let _ = writeln!(text, "{id}\t{}", target_text(&toks));
            if let Some(l) = label {
                let _ = writeln!(g, "{id}\t0\t{l}");
            }
        }
        targets.insert(lang.meta.code.clone(), text);
        gold.insert(lang.meta.code.clone(), g);
        metas.push(lang.meta.clone());
    }
    Ok(SynthCorpus {
        source,
        targets,
        metadata: format_metadata(&metas),
        conllu,
        gold,
        classes: class_map,
    })
}
