//! `typomap` command line: argument parsing, configuration loading and
//! dispatch to the pipeline stages.

pub mod manifest;
pub mod render;
pub mod stages;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use typomap_core::synth::{generate, SynthSpec};
use typomap_core::PipelineConfig;

use crate::stages::Ctx;

#[derive(Debug, Parser)]
#[command(name = "typomap", version, about = "Semantic maps of a pivot word from verse-aligned parallel corpora")]
pub struct Cli {
    /// Worker threads for per-language work [default: available parallelism]
    #[arg(long, global = true, env = "TYPOMAP_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Workspace directory holding all artifacts
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,

    /// Flat `key = value` configuration file; relative paths inside it are
    /// resolved against its directory
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Override one configuration key, e.g. `--set psill=0.2` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Directory with `<code>.txt` verse files [config: corpus_dir]
    #[arg(long)]
    pub corpus_dir: Option<PathBuf>,

    /// Language metadata table [config: metadata]
    #[arg(long)]
    pub metadata: Option<PathBuf>,

    /// GeoJSON region for language selection [config: region]
    #[arg(long)]
    pub region: Option<PathBuf>,

    /// CoNLL-U annotation of the source text [config: deps]
    #[arg(long)]
    pub deps: Option<PathBuf>,

    /// Directory with `gold_<code>.tsv` files [config: gold]
    #[arg(long)]
    pub gold: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and normalize the corpus into the workspace
    Ingest(Common),
    /// Keep languages whose coordinates fall inside the region
    FilterGeo(Common),
    /// Word-align every target language to the source
    Align {
        #[command(flatten)]
        common: Common,
        /// Import `<code>.pharaoh` files from this directory instead of training
        #[arg(long)]
        import: Option<PathBuf>,
    },
    /// Collect pivot usage points with their aligned tokens
    Extract(Common),
    /// Refine labels by lexified tokens and clustered n-grams
    Ngram(Common),
    /// Embed usage points by classical MDS over Hamming distances
    Map(Common),
    /// Indicator kriging and contours per label
    Krige(Common),
    /// Render one SVG per language
    Render {
        #[command(flatten)]
        common: Common,
        /// Map file [default: <out>/map.tsv]
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Score map labels against gold annotation
    Eval {
        #[command(flatten)]
        common: Common,
        /// Only this language
        #[arg(long)]
        lang: Option<String>,
    },
    /// Run every stage in order
    Pipeline(Common),
    /// Generate the synthetic benchmark corpus
    Synth {
        /// Output directory
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        verses: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of distinct verbs
        #[arg(long, default_value_t = 20)]
        vocab: usize,
    },
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

/// Defaults, then the config file, then `--set`, then path flags.
pub fn load_config(common: &Common) -> Result<(PipelineConfig, Option<String>)> {
    let (mut cfg, text) = match &common.config {
        Some(path) => {
            if !path.is_file() {
                bail!("missing input: {}", path.display());
            }
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut cfg = PipelineConfig::parse(&text, &path.display().to_string())?;
            let base = path.parent().unwrap_or(Path::new(""));
            for p in [&mut cfg.corpus_dir, &mut cfg.metadata, &mut cfg.region, &mut cfg.deps, &mut cfg.gold] {
                resolve(base, p);
            }
            (cfg, Some(text))
        }
        None => (PipelineConfig::default(), None),
    };
    cfg = cfg.with_overrides(&common.overrides)?;
    let flags = [
        (&common.corpus_dir, &mut cfg.corpus_dir),
        (&common.metadata, &mut cfg.metadata),
        (&common.region, &mut cfg.region),
        (&common.deps, &mut cfg.deps),
        (&common.gold, &mut cfg.gold),
    ];
    for (flag, slot) in flags {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    Ok((cfg, text))
}

fn context(common: &Common) -> Result<Ctx> {
    let (cfg, text) = load_config(common)?;
    let ctx = Ctx::new(common.out.clone(), cfg);
    if let (Some(path), Some(text)) = (&common.config, text) {
        ctx.record(path.display().to_string(), text.as_bytes());
    }
    Ok(ctx)
}

fn print_prf(results: &std::collections::BTreeMap<String, typomap_core::Prf>) {
    for (code, p) in results {
        println!(
            "{code}\tP={:.4}\tR={:.4}\tF1={:.4}\t(tp={} fp={} tn={} fn={})",
            p.precision, p.recall, p.f1, p.tp, p.fp, p.tn, p.fn_
        );
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let jobs = cli.jobs.unwrap_or(0);
    // 0 lets rayon pick the available parallelism; a second call in the
    // same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();

    let (name, common) = match &cli.command {
        Command::Synth {
            out,
            verses,
            seed,
            vocab,
        } => {
            let mut spec = SynthSpec::standard(*verses, *seed);
            spec.vocab = *vocab;
            generate(&spec)?.write_to(out)?;
            return Ok(());
        }
        Command::Ingest(c) => ("ingest", c),
        Command::FilterGeo(c) => ("filter-geo", c),
        Command::Align { common, .. } => ("align", common),
        Command::Extract(c) => ("extract", c),
        Command::Ngram(c) => ("ngram", c),
        Command::Map(c) => ("map", c),
        Command::Krige(c) => ("krige", c),
        Command::Render { common, .. } => ("render", common),
        Command::Eval { common, .. } => ("eval", common),
        Command::Pipeline(c) => ("pipeline", c),
    };
    let ctx = context(common)?;
    match &cli.command {
        Command::Ingest(_) => stages::ingest(&ctx)?,
        Command::FilterGeo(_) => stages::filter_geo(&ctx)?,
        Command::Align { import, .. } => stages::align(&ctx, import.as_deref())?,
        Command::Extract(_) => stages::extract(&ctx)?,
        Command::Ngram(_) => stages::ngram(&ctx)?,
        Command::Map(_) => stages::map(&ctx)?,
        Command::Krige(_) => stages::krige(&ctx)?,
        Command::Render { map, .. } => stages::render(&ctx, map.as_deref())?,
        Command::Eval { lang, .. } => print_prf(&stages::eval(&ctx, lang.as_deref())?),
        Command::Pipeline(_) => print_prf(&stages::pipeline(&ctx)?),
        Command::Synth { .. } => unreachable!("handled above"),
    }
    ctx.write_manifest(name)
}
