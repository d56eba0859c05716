//! Pipeline stages over an on-disk workspace.
//!
//! Every stage reads its inputs from the workspace (or from configured
//! paths) and writes plain-text artifacts back, so any stage can be rerun
//! on its own. Workspace layout:
//!
//! ```text
//! corpus/<code>.txt, corpus/languages.tsv    ingest
//! languages.filtered.tsv                      filter-geo
//! align/<code>.pharaoh                        align
//! usage.tsv                                   extract
//! ngram/<code>.clusters.tsv, labels.tsv       ngram
//! map.tsv, map.stats.tsv                      map
//! krige/<code>.grids.tsv, .contours.tsv       krige
//! svg/<code>.svg                              render
//! eval/<code>.prf                             eval
//! manifests/<command>.txt                     every command
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use typomap_core::aligner::{
    align_language, extract_usage_points, format_pharaoh, format_usage, parse_pharaoh, parse_usage, verse_shapes,
};
use typomap_core::corpus::{format_metadata, format_verses, parse_metadata, parse_verses};
use typomap_core::evalharness::{
    cluster_marker, format_prf, occurrence_indices, parse_gold, predictions_from_map, score_alignment,
};
use typomap_core::geofilter::{filter_languages, parse_region};
use typomap_core::kriging::{format_contours, format_grids, krige_language, parse_contours};
use typomap_core::ngram::{format_cluster_report, parse_cluster_report, parse_conllu, relabeled_usage, run_all};
use typomap_core::semmap::{build_map, format_map, hamming_matrix, kruskal_stress, parse_map};
use typomap_core::{LanguageAlignment, LanguageMeta, ParallelCorpus, PipelineConfig, Prf, SemanticMap};

use crate::manifest::{format_manifest, sha256_hex};
use crate::render::{render_svg, SvgStyle};

pub const LANGUAGES: &str = "corpus/languages.tsv";
pub const FILTERED: &str = "languages.filtered.tsv";
pub const USAGE: &str = "usage.tsv";
pub const LABELS: &str = "labels.tsv";
pub const MAP: &str = "map.tsv";

/// One command's view of the workspace; records the inputs it reads.
pub struct Ctx {
    pub out: PathBuf,
    pub cfg: PipelineConfig,
    inputs: Mutex<BTreeMap<String, String>>,
    written: Mutex<BTreeSet<PathBuf>>,
}

impl Ctx {
    pub fn new(out: PathBuf, cfg: PipelineConfig) -> Self {
        Ctx {
            out,
            cfg,
            inputs: Mutex::new(BTreeMap::new()),
            written: Mutex::new(BTreeSet::new()),
        }
    }

    pub fn ws(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    // workspace files are named relative to the workspace so manifests do
    // not depend on where it lives
    fn display(&self, path: &Path) -> String {
        match path.strip_prefix(&self.out) {
            Ok(rel) => rel.display().to_string(),
            Err(_) => path.display().to_string(),
        }
    }

    /// Reads an input file and records its checksum, unless this command
    /// wrote the file itself.
    pub fn read(&self, path: &Path) -> Result<String> {
        if !path.is_file() {
            bail!("missing input: {}", path.display());
        }
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let text = String::from_utf8(bytes).map_err(|_| anyhow!("{} is not valid UTF-8", path.display()))?;
        if !self.written.lock().expect("poisoned").contains(path) {
            self.record(self.display(path), text.as_bytes());
        }
        Ok(text)
    }

    pub fn record(&self, name: String, bytes: &[u8]) {
        self.inputs.lock().expect("poisoned").insert(name, sha256_hex(bytes));
    }

    pub fn read_ws(&self, rel: &str) -> Result<String> {
        self.read(&self.ws(rel))
    }

    pub fn write_ws(&self, rel: &str, body: &str) -> Result<()> {
        let p = self.ws(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        std::fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
        self.written.lock().expect("poisoned").insert(p);
        Ok(())
    }

    pub fn write_manifest(&self, command: &str) -> Result<()> {
        let inputs = self.inputs.lock().expect("poisoned").clone();
        self.write_ws(&format!("manifests/{command}.txt"), &format_manifest(command, &self.cfg, &inputs))
    }

    fn configured<'a>(&self, p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        p.as_deref()
            .ok_or_else(|| anyhow!("missing input: no `{key}` configured (use --{} or --set {key}=...)", key.replace('_', "-")))
    }
}

pub fn ingest(ctx: &Ctx) -> Result<()> {
    let dir = ctx.configured(&ctx.cfg.corpus_dir, "corpus_dir")?;
    let meta_path = ctx.configured(&ctx.cfg.metadata, "metadata")?;
    let metas = parse_metadata(&ctx.read(meta_path)?, &meta_path.display().to_string())?;
    let load = |code: &str| -> Result<_> {
        let p = dir.join(format!("{code}.txt"));
        Ok(parse_verses(&ctx.read(&p)?, &p.display().to_string())?)
    };
    let source = load(&ctx.cfg.source)?;
    let mut targets = Vec::with_capacity(metas.len());
    for m in &metas {
        targets.push((m.clone(), load(&m.code)?));
    }
    let corpus = ParallelCorpus::new(source, targets)?;
    ctx.write_ws(&format!("corpus/{}.txt", ctx.cfg.source), &format_verses(&corpus.source))?;
    for (code, t) in &corpus.targets {
        if t.verses.is_empty() {
            warn!("{code}: no verses shared with the source");
        }
        ctx.write_ws(&format!("corpus/{code}.txt"), &format_verses(&t.verses))?;
    }
    ctx.write_ws(LANGUAGES, &format_metadata(&metas))?;
    info!("ingested {} source verses and {} languages", corpus.source.len(), metas.len());
    Ok(())
}

pub fn filter_geo(ctx: &Ctx) -> Result<()> {
    let region_path = ctx.configured(&ctx.cfg.region, "region")?;
    let region = parse_region(&ctx.read(region_path)?)?;
    let metas = parse_metadata(&ctx.read_ws(LANGUAGES)?, LANGUAGES)?;
    let kept = filter_languages(&metas, &region);
    info!("{} of {} languages inside the region", kept.len(), metas.len());
    ctx.write_ws(FILTERED, &format_metadata(&kept))
}

/// Languages in scope: the filtered list when present, else all ingested.
pub fn languages(ctx: &Ctx) -> Result<Vec<LanguageMeta>> {
    let rel = if ctx.ws(FILTERED).is_file() { FILTERED } else { LANGUAGES };
    Ok(parse_metadata(&ctx.read_ws(rel)?, rel)?)
}

pub fn load_corpus(ctx: &Ctx) -> Result<ParallelCorpus> {
    let metas = languages(ctx)?;
    let load = |code: &str| -> Result<_> {
        let rel = format!("corpus/{code}.txt");
        Ok(parse_verses(&ctx.read_ws(&rel)?, &rel)?)
    };
    let source = load(&ctx.cfg.source)?;
    let mut targets = Vec::with_capacity(metas.len());
    for m in &metas {
        targets.push((m.clone(), load(&m.code)?));
    }
    Ok(ParallelCorpus::new(source, targets)?)
}

/// Aligns every language, or imports `<dir>/<code>.pharaoh` when given.
pub fn align(ctx: &Ctx, import: Option<&Path>) -> Result<()> {
    let corpus = load_corpus(ctx)?;
    let settings = ctx.cfg.aligner_settings();
    let out: Vec<(String, LanguageAlignment)> = corpus
        .codes()
        .par_iter()
        .map(|code| -> Result<_> {
            let al = match import {
                Some(dir) => {
                    let p = dir.join(format!("{code}.pharaoh"));
                    parse_pharaoh(&ctx.read(&p)?, code, &verse_shapes(&corpus, code)?)?
                }
                None => align_language(&corpus, code, settings)?,
            };
            Ok((code.clone(), al))
        })
        .collect::<Result<_>>()?;
    for (code, al) in &out {
        ctx.write_ws(&format!("align/{code}.pharaoh"), &format_pharaoh(al))?;
    }
    Ok(())
}

pub fn load_alignments(ctx: &Ctx, corpus: &ParallelCorpus) -> Result<BTreeMap<String, LanguageAlignment>> {
    let mut out = BTreeMap::new();
    for code in corpus.codes() {
        let rel = format!("align/{code}.pharaoh");
        let al = parse_pharaoh(&ctx.read_ws(&rel)?, &code, &verse_shapes(corpus, &code)?)?;
        out.insert(code, al);
    }
    Ok(out)
}

pub fn extract(ctx: &Ctx) -> Result<()> {
    let corpus = load_corpus(ctx)?;
    let alignments = load_alignments(ctx, &corpus)?;
    let usage = extract_usage_points(&corpus, &alignments, &ctx.cfg.pivot)?;
    info!("{} usage points of {:?}", usage.points.len(), ctx.cfg.pivot);
    ctx.write_ws(USAGE, &format_usage(&usage))
}

pub fn ngram(ctx: &Ctx) -> Result<()> {
    let corpus = load_corpus(ctx)?;
    let alignments = load_alignments(ctx, &corpus)?;
    let usage = parse_usage(&ctx.read_ws(USAGE)?, USAGE)?;
    let deps = match &ctx.cfg.deps {
        Some(p) => Some(parse_conllu(&ctx.read(p)?, &p.display().to_string())?),
        None => None,
    };
    let results = run_all(&corpus, &alignments, &usage, deps.as_ref(), &ctx.cfg.ngram_settings()?)?;
    for (code, r) in &results {
        ctx.write_ws(&format!("ngram/{code}.clusters.tsv"), &format_cluster_report(r))?;
    }
    ctx.write_ws(LABELS, &format_usage(&relabeled_usage(&usage, &results)?))
}

pub fn map(ctx: &Ctx) -> Result<()> {
    let labels = parse_usage(&ctx.read_ws(LABELS)?, LABELS)?;
    let (map, emb) = build_map(&labels)?;
    let stress = kruskal_stress(&hamming_matrix(&labels.rows())?, &emb.coords);
    let stats = format!(
        "points\t{}\nlambda1\t{}\nlambda2\t{}\none_dimensional\t{}\nstress1\t{}\n",
        map.points.len(),
        emb.eigenvalues[0],
        emb.eigenvalues[1],
        emb.one_dimensional,
        stress
    );
    info!("map of {} points, stress-1 {stress:.4}", map.points.len());
    ctx.write_ws("map.stats.tsv", &stats)?;
    ctx.write_ws(MAP, &format_map(&map))
}

fn load_map(ctx: &Ctx, path: &Path) -> Result<SemanticMap> {
    Ok(parse_map(&ctx.read(path)?, &path.display().to_string())?)
}

pub fn krige(ctx: &Ctx) -> Result<()> {
    let map = load_map(ctx, &ctx.ws(MAP))?;
    let settings = ctx.cfg.krige_settings();
    for code in &map.languages {
        let surfaces = krige_language(&map, code, &settings)?;
        ctx.write_ws(&format!("krige/{code}.grids.tsv"), &format_grids(&surfaces))?;
        ctx.write_ws(&format!("krige/{code}.contours.tsv"), &format_contours(&surfaces))?;
    }
    Ok(())
}

/// One SVG per language of the map; contours are drawn when the krige
/// stage has produced them.
pub fn render(ctx: &Ctx, map_path: Option<&Path>) -> Result<()> {
    let map_path = map_path.map_or_else(|| ctx.ws(MAP), Path::to_path_buf);
    let map = load_map(ctx, &map_path)?;
    for code in &map.languages {
        let rel = format!("krige/{code}.contours.tsv");
        let contours = if ctx.ws(&rel).is_file() {
            parse_contours(&ctx.read_ws(&rel)?, &rel)?
        } else {
            BTreeMap::new()
        };
        let svg = render_svg(&map, code, &contours, &SvgStyle::default())?;
        ctx.write_ws(&format!("svg/{code}.svg"), &svg)?;
    }
    Ok(())
}

/// Scores every language with a `gold_<code>.tsv` in the gold directory,
/// or only `only`. Clusters are renamed to markers when markers are
/// configured.
pub fn eval(ctx: &Ctx, only: Option<&str>) -> Result<BTreeMap<String, Prf>> {
    let gold_dir = ctx.configured(&ctx.cfg.gold, "gold")?;
    let map = load_map(ctx, &ctx.ws(MAP))?;
    let suffixes = ctx.cfg.marker_suffixes()?;
    let occ = occurrence_indices(map.points.iter().map(|p| &p.verse_id));
    let mut out = BTreeMap::new();
    for code in &map.languages {
        if only.is_some_and(|o| o != code) {
            continue;
        }
        let gold_path = gold_dir.join(format!("gold_{code}.tsv"));
        if only.is_none() && !gold_path.is_file() {
            continue;
        }
        let gold = parse_gold(&ctx.read(&gold_path)?, &gold_path.display().to_string())?;
        let mut rename = BTreeMap::new();
        if let Some(sfx) = &suffixes {
            let rel = format!("ngram/{code}.clusters.tsv");
            for (label, members) in parse_cluster_report(&ctx.read_ws(&rel)?, &rel)? {
                if let Some(m) = cluster_marker(&members, sfx) {
                    rename.insert(label, m.to_string());
                }
            }
        }
        let prf = score_alignment(&predictions_from_map(&map, code, &occ, &rename)?, &gold)?;
        ctx.write_ws(&format!("eval/{code}.prf"), &format_prf(&prf))?;
        out.insert(code.clone(), prf);
    }
    if let Some(o) = only {
        if !out.contains_key(o) {
            bail!("language {o} is not in the map");
        }
    }
    if out.is_empty() {
        warn!("no gold files found in {}", gold_dir.display());
    }
    Ok(out)
}

/// Every stage in order. Geographic filtering runs when a region is
/// configured, evaluation when gold is configured.
pub fn pipeline(ctx: &Ctx) -> Result<BTreeMap<String, Prf>> {
    ingest(ctx)?;
    if ctx.cfg.region.is_some() {
        filter_geo(ctx)?;
    } else {
        let _ = std::fs::remove_file(ctx.ws(FILTERED));
    }
    align(ctx, None)?;
    extract(ctx)?;
    ngram(ctx)?;
    map(ctx)?;
    krige(ctx)?;
    render(ctx, None)?;
    if ctx.cfg.gold.is_some() {
        eval(ctx, None)
    } else {
        Ok(BTreeMap::new())
    }
}
