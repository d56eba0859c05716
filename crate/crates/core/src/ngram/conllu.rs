//! Dependency annotation of the source text, read from CoNLL-U.
//!
//! Only ID, FORM, UPOS and HEAD are used. Each sentence must carry a
//! `# sent_id = <verse_id>` comment. Multiword ranges and empty nodes are
//! skipped. Forms are run through [`tokenize`]; a form that tokenizes to
//! nothing (e.g. a comma) has no source position, and every other form must
//! reproduce exactly one source token.

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::{tokenize, VerseMap};
use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DepVerse {
    pub forms: Vec<String>,
    pub upos: Vec<String>,
    /// 1-based head node; 0 is the root.
    pub heads: Vec<usize>,
    /// Source token index of each node, `None` for punctuation-only forms.
    pub src_index: Vec<Option<usize>>,
}

impl DepVerse {
    fn tokens(&self) -> Vec<String> {
        self.forms.iter().flat_map(|f| tokenize(f)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DependencyDoc {
    pub verses: BTreeMap<String, DepVerse>,
}

fn finish(
    origin: &str,
    line: usize,
    sent_id: &mut Option<String>,
    rows: &mut Vec<(String, String, usize)>,
    out: &mut BTreeMap<String, DepVerse>,
) -> Result<()> {
    if rows.is_empty() {
        *sent_id = None;
        return Ok(());
    }
    let id = sent_id
        .take()
        .ok_or_else(|| Error::parse(origin, line, "sentence without sent_id"))?;
    let n = rows.len();
    let mut verse = DepVerse {
        forms: Vec::with_capacity(n),
        upos: Vec::with_capacity(n),
        heads: Vec::with_capacity(n),
        src_index: Vec::with_capacity(n),
    };
    let mut next_src = 0;
    for (form, upos, head) in rows.drain(..) {
        if head > n {
            return Err(Error::parse(origin, line, format!("{id}: head {head} out of range")));
        }
        let toks = tokenize(&form);
        let idx = match toks.len() {
            0 => None,
            1 => {
                next_src += 1;
                Some(next_src - 1)
            }
            _ => {
                return Err(Error::Dependency(format!(
                    "{id}: form {form:?} splits into several tokens"
                )))
            }
        };
        verse.forms.push(form);
        verse.upos.push(upos);
        verse.heads.push(head);
        verse.src_index.push(idx);
    }
    if out.insert(id.clone(), verse).is_some() {
        return Err(Error::DuplicateVerse {
            origin: origin.to_string(),
            verse_id: id,
        });
    }
    Ok(())
}

pub fn parse_conllu(text: &str, origin: &str) -> Result<DependencyDoc> {
    let mut verses = BTreeMap::new();
    let mut sent_id = None;
    let mut rows: Vec<(String, String, usize)> = Vec::new();
    let mut last = 0;
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        last = lineno;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(origin, lineno, &mut sent_id, &mut rows, &mut verses)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    sent_id = Some(value.trim().to_string());
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 7 {
            return Err(Error::parse(origin, lineno, "expected at least 7 tab-separated columns"));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id: usize = cols[0]
            .parse()
            .map_err(|_| Error::parse(origin, lineno, format!("bad token id {:?}", cols[0])))?;
        if id != rows.len() + 1 {
            return Err(Error::parse(origin, lineno, format!("token id {id} out of sequence")));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| Error::parse(origin, lineno, format!("bad head {:?}", cols[6])))?;
        rows.push((cols[1].to_string(), cols[3].to_string(), head));
    }
    finish(origin, last, &mut sent_id, &mut rows, &mut verses)?;
    Ok(DependencyDoc { verses })
}

pub fn load_conllu(path: &Path) -> Result<DependencyDoc> {
    parse_conllu(&read_to_string(path)?, &path.display().to_string())
}

impl DependencyDoc {
    /// Checks that every annotated verse present in `source` tokenizes to
    /// the same tokens.
    pub fn check_against(&self, source: &VerseMap) -> Result<()> {
        for (id, dv) in &self.verses {
            if let Some(v) = source.get(id) {
                if dv.tokens() != v.tokens {
                    return Err(Error::Dependency(format!(
                        "{id}: annotation tokens do not match the source verse"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Source index of the closest ancestor of `pivot_idx` whose UPOS is in
    /// `verbal`, or `None` if the root is reached first.
    pub fn head_verb(&self, verse_id: &str, pivot_idx: usize, verbal: &[String]) -> Result<Option<usize>> {
        let dv = self
            .verses
            .get(verse_id)
            .ok_or_else(|| Error::Dependency(format!("verse {verse_id} has no annotation")))?;
        let mut node = dv
            .src_index
            .iter()
            .position(|s| *s == Some(pivot_idx))
            .ok_or_else(|| Error::Dependency(format!("{verse_id}: no node for token {pivot_idx}")))?;
        for _ in 0..dv.heads.len() {
            let head = dv.heads[node];
            if head == 0 {
                return Ok(None);
            }
            node = head - 1;
            if verbal.iter().any(|p| *p == dv.upos[node]) {
                return Ok(dv.src_index[node]);
            }
        }
        Err(Error::Dependency(format!("{verse_id}: head cycle")))
    }
}

/// Formats one verse as a CoNLL-U sentence block.
pub fn format_sentence(verse_id: &str, rows: &[(&str, &str, usize, &str)]) -> String {
    let mut out = format!("# sent_id = {verse_id}\n");
    for (k, (form, upos, head, deprel)) in rows.iter().enumerate() {
        out.push_str(&format!("{}\t{form}\t_\t{upos}\t_\t_\t{head}\t{deprel}\t_\t_\n", k + 1));
    }
    out.push('\n');
    out
}
