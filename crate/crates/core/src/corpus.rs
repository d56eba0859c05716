//! Verse-aligned parallel corpora.
//!
//! A corpus file holds one verse per line as `verse_id<TAB>raw text`; lines
//! starting with `#` are comments and blank lines are ignored. Text is
//! tokenized on load (see [`tokenize`]), and every language is keyed by the
//! verse ids it shares with the source translation.
//!
//! The language metadata file is tab-separated with the column order
//! `code  name  lon  lat`. A header line starting with `code` and `#`
//! comment lines are skipped.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::{is_nfc, UnicodeNormalization};

use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageMeta {
    pub code: String,
    pub name: String,
    pub lon: f64,
    pub lat: f64,
}

impl LanguageMeta {
    pub fn new(code: impl Into<String>, name: impl Into<String>, lon: f64, lat: f64) -> Result<Self> {
        let meta = LanguageMeta {
            code: code.into(),
            name: name.into(),
            lon,
            lat,
        };
        meta.validate()?;
        Ok(meta)
    }

    fn validate(&self) -> Result<()> {
        if self.code.is_empty() {
            return Err(Error::Metadata("empty language code".into()));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::Metadata(format!("{}: longitude {} out of range", self.code, self.lon)));
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(Error::Metadata(format!("{}: latitude {} out of range", self.code, self.lat)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerseText {
    pub verse_id: String,
    pub tokens: Vec<String>,
}

/// Verses of one translation, ordered by verse id.
pub type VerseMap = BTreeMap<String, VerseText>;

#[derive(Debug, Clone)]
pub struct TargetText {
    pub meta: LanguageMeta,
    pub verses: VerseMap,
}

#[derive(Debug, Clone)]
pub struct ParallelCorpus {
    pub source: VerseMap,
    pub targets: BTreeMap<String, TargetText>,
}

fn is_peripheral(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
            | MathSymbol
            | CurrencySymbol
            | ModifierSymbol
            | OtherSymbol
    )
}

// Simple (1:1) lowercase mapping. The only character whose full mapping
// expands is U+0130, whose simple mapping is its first char.
fn simple_lowercase(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

/// Lowercases, splits on whitespace and strips leading/trailing punctuation
/// and symbols from each token. Word-internal punctuation is kept.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect();
    normalized
        .split_whitespace()
        .filter_map(|raw| {
            let trimmed = raw.trim_matches(is_peripheral);
            if trimmed.is_empty() {
                return None;
            }
            let lowered: String = trimmed.chars().map(simple_lowercase).collect();
            Some(lowered.nfc().collect())
        })
        .collect()
}

/// Parses verse-per-line text. `origin` names the input in error messages.
pub fn parse_verses(text: &str, origin: &str) -> Result<VerseMap> {
    let mut verses = VerseMap::new();
    let mut not_nfc = 0usize;
    let mut dropped = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let Some((id, body)) = line.split_once('\t') else {
            return Err(Error::parse(origin, lineno, "expected `verse_id<TAB>text`"));
        };
        let id = id.trim();
        if id.is_empty() {
            return Err(Error::parse(origin, lineno, "empty verse id"));
        }
        if !is_nfc(body) {
            not_nfc += 1;
        }
        if verses.contains_key(id) {
            return Err(Error::DuplicateVerse {
                origin: origin.to_string(),
                verse_id: id.to_string(),
            });
        }
        let tokens = tokenize(body);
        if tokens.is_empty() {
            dropped += 1;
            continue;
        }
        verses.insert(
            id.to_string(),
            VerseText {
                verse_id: id.to_string(),
                tokens,
            },
        );
    }
    if not_nfc > 0 {
        info!("{origin}: {not_nfc} lines were not NFC and have been normalized");
    }
    if dropped > 0 {
        info!("{origin}: dropped {dropped} verses with no tokens");
    }
    Ok(verses)
}

pub fn load_verse_file(path: &Path) -> Result<VerseMap> {
    let text = read_to_string(path)?;
    parse_verses(&text, &path.display().to_string())
}

/// Serializes verses back to the corpus format with tokens joined by spaces.
pub fn format_verses(verses: &VerseMap) -> String {
    let mut out = String::new();
    for v in verses.values() {
        let _ = writeln!(out, "{}\t{}", v.verse_id, v.tokens.join(" "));
    }
    out
}

pub fn parse_metadata(text: &str, origin: &str) -> Result<Vec<LanguageMeta>> {
    let mut metas = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.starts_with('#') || line.trim().is_empty() || line.starts_with("code\t") {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::parse(origin, lineno, format!("expected 4 columns, found {}", cols.len())));
        }
        let num = |s: &str, what: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(origin, lineno, format!("bad {what} {s:?}")))
        };
        let meta = LanguageMeta {
            code: cols[0].trim().to_string(),
            name: cols[1].trim().to_string(),
            lon: num(cols[2], "longitude")?,
            lat: num(cols[3], "latitude")?,
        };
        meta.validate()?;
        if !seen.insert(meta.code.clone()) {
            return Err(Error::Metadata(format!("duplicate language code {}", meta.code)));
        }
        metas.push(meta);
    }
    Ok(metas)
}

pub fn load_metadata(path: &Path) -> Result<Vec<LanguageMeta>> {
    let text = read_to_string(path)?;
    parse_metadata(&text, &path.display().to_string())
}

pub fn format_metadata(metas: &[LanguageMeta]) -> String {
    let mut out = String::from("code\tname\tlon\tlat\n");
    for m in metas {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", m.code, m.name, m.lon, m.lat);
    }
    out
}

/// Path of the verse file for `code` inside a corpus directory.
pub fn verse_file(dir: &Path, code: &str) -> PathBuf {
    dir.join(format!("{code}.txt"))
}

impl ParallelCorpus {
    /// Builds a corpus, dropping target verses that the source lacks.
    pub fn new(source: VerseMap, targets: Vec<(LanguageMeta, VerseMap)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (meta, mut verses) in targets {
            meta.validate()?;
            let before = verses.len();
            verses.retain(|id, _| source.contains_key(id));
            let dropped = before - verses.len();
            if dropped > 0 {
                info!("{}: dropped {dropped} verses absent from the source", meta.code);
            }
            let code = meta.code.clone();
            if map.insert(code.clone(), TargetText { meta, verses }).is_some() {
                return Err(Error::Metadata(format!("duplicate language code {code}")));
            }
        }
        Ok(ParallelCorpus { source, targets: map })
    }

    /// Loads `<dir>/<source_code>.txt` and one file per metadata record.
    pub fn load(dir: &Path, source_code: &str, metas: &[LanguageMeta]) -> Result<Self> {
        let source = load_verse_file(&verse_file(dir, source_code))?;
        let mut targets = Vec::with_capacity(metas.len());
        for meta in metas {
            let verses = load_verse_file(&verse_file(dir, &meta.code))?;
            targets.push((meta.clone(), verses));
        }
        let corpus = ParallelCorpus::new(source, targets)?;
        for (code, t) in &corpus.targets {
            if t.verses.is_empty() {
                warn!("{code}: no verses shared with the source");
            }
        }
        Ok(corpus)
    }

    pub fn codes(&self) -> Vec<String> {
        self.targets.keys().cloned().collect()
    }

    pub fn target(&self, code: &str) -> Result<&TargetText> {
        self.targets
            .get(code)
            .ok_or_else(|| Error::UnknownLanguage(code.to_string()))
    }
}

/// Sorted verse ids present in both the source and target `code`.
pub fn intersect_verses(corpus: &ParallelCorpus, code: &str) -> Result<Vec<String>> {
    let target = corpus.target(code)?;
    Ok(target
        .verses
        .keys()
        .filter(|id| corpus.source.contains_key(*id))
        .cloned()
        .collect())
}

/// Verse ids of a map, as a set.
pub fn verse_ids(verses: &VerseMap) -> BTreeSet<String> {
    verses.keys().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vm(ids: &[&str]) -> VerseMap {
        ids.iter()
            .map(|id| {
                (
                    id.to_string(),
                    VerseText {
                        verse_id: id.to_string(),
                        tokens: vec!["x".into()],
                    },
                )
            })
            .collect()
    }

    fn meta(code: &str) -> LanguageMeta {
        LanguageMeta::new(code, code, 0.0, 0.0).unwrap()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("When he came, behold!"), vec!["when", "he", "came", "behold"]);
        assert_eq!(tokenize("me-'u'-axüa-cu müpaü"), vec!["me-'u'-axüa-cu", "müpaü"]);
        assert!(tokenize("  ").is_empty());
        assert_eq!(tokenize("«Hola» \u{2014} dijo."), vec!["hola", "dijo"]);
        assert_eq!(tokenize("\u{130}stanbul"), vec!["istanbul"]);
    }

    #[test]
    fn tokenize_normalizes_to_nfc() {
        // "ü" as u + combining diaeresis
        assert_eq!(tokenize("axu\u{308}a"), vec!["axüa"]);
    }

    #[test]
    fn parse_basic_line() {
        let v = parse_verses("40001001\tIn the beginning", "t").unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v["40001001"].tokens, vec!["in", "the", "beginning"]);
    }

    #[test]
    fn comments_only() {
        assert!(parse_verses("# a\n# b\n", "t").unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_rejected() {
        let err = parse_verses("40001001\tA\n40001001\tB", "t").unwrap_err();
        assert!(matches!(err, Error::DuplicateVerse { .. }));
    }

    #[test]
    fn malformed_line_names_line_number() {
        let err = parse_verses("# c\n40001001 no tab here", "t").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn punctuation_only_verse_dropped() {
        let v = parse_verses("1\t... !\n2\tok", "t").unwrap();
        assert_eq!(v.keys().collect::<Vec<_>>(), vec!["2"]);
    }

    #[test]
    fn intersect_examples() {
        let c = ParallelCorpus::new(vm(&["v1", "v2"]), vec![(meta("t"), vm(&["v2", "v3"]))]).unwrap();
        assert_eq!(intersect_verses(&c, "t").unwrap(), vec!["v2"]);
        let c = ParallelCorpus::new(vm(&["v1"]), vec![(meta("t"), vm(&["v3"]))]).unwrap();
        assert!(intersect_verses(&c, "t").unwrap().is_empty());
        let c = ParallelCorpus::new(vm(&["v1", "v2"]), vec![(meta("t"), vm(&["v1", "v2"]))]).unwrap();
        assert_eq!(intersect_verses(&c, "t").unwrap(), vec!["v1", "v2"]);
        assert!(matches!(intersect_verses(&c, "zz"), Err(Error::UnknownLanguage(_))));
    }

    #[test]
    fn metadata_roundtrip_and_validation() {
        let text = "code\tname\tlon\tlat\nhch\tHuichol\t-104.5\t22.0\n";
        let m = parse_metadata(text, "m").unwrap();
        assert_eq!(m[0].name, "Huichol");
        assert_eq!(parse_metadata(&format_metadata(&m), "m").unwrap(), m);
        assert!(parse_metadata("a\tA\t200\t0\n", "m").is_err());
        assert!(parse_metadata("a\tA\t0\t0\na\tB\t1\t1\n", "m").is_err());
        assert!(parse_metadata("a\tA\t0\n", "m").is_err());
    }

    proptest! {
        #[test]
        fn tokenize_idempotent(s in "\\PC{0,40}") {
            let once = tokenize(&s);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn reserialize_preserves_ids(words in proptest::collection::vec("[a-zA-Z,.!']{1,8}", 1..20)) {
            let text: String = words
                .iter()
                .enumerate()
                .map(|(i, w)| format!("{:08}\t{w} x\n", i))
                .collect();
            let first = parse_verses(&text, "p").unwrap();
            let second = parse_verses(&format_verses(&first), "p").unwrap();
            prop_assert_eq!(verse_ids(&first), verse_ids(&second));
        }
    }
}
