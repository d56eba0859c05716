//! Flat `key = value` pipeline configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys and
//! out-of-range values are errors naming the offending field. `to_text`
//! writes every key, so a snapshot parses back to the same configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::aligner::AlignerSettings;
use crate::error::{read_to_string, Error, Result};
use crate::evalharness::MarkerSuffixes;
use crate::kriging::{DistanceMode, GridSpec, KrigeSettings};
use crate::ngram::{ClusterSettings, NgramSettings, StopwordList};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub source: String,
    pub pivot: String,
    pub stopwords: Vec<String>,
    pub epsilon: f64,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub top_chi2: usize,
    pub top_cooccurrence: usize,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    pub tfidf_min_n: usize,
    pub tfidf_max_n: usize,
    pub verbal_pos: Vec<String>,
    pub em_iters: usize,
    pub align_threshold: f64,
    pub nugget: f64,
    /// `None` means the indicator's sample variance.
    pub psill: Option<f64>,
    /// `None` means half the grid diagonal.
    pub range: Option<f64>,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub grid_pad: f64,
    pub levels: Vec<f64>,
    pub distance: DistanceMode,
    /// `(suffix, marker)` pairs used to name clusters during evaluation.
    pub markers: Vec<(String, String)>,
    pub corpus_dir: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub region: Option<PathBuf>,
    pub deps: Option<PathBuf>,
    pub gold: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let ng = NgramSettings::default();
        let al = AlignerSettings::default();
        let kr = KrigeSettings::default();
        PipelineConfig {
            source: "eng".into(),
            pivot: ng.pivot,
            stopwords: ng.stopwords.words().map(String::from).collect(),
            epsilon: ng.epsilon,
            ngram_min: ng.n_min,
            ngram_max: ng.n_max,
            top_chi2: ng.top_chi2,
            top_cooccurrence: ng.top_cooccurrence,
            dbscan_eps: ng.cluster.eps,
            dbscan_min_pts: ng.cluster.min_pts,
            tfidf_min_n: ng.cluster.tfidf_min_n,
            tfidf_max_n: ng.cluster.tfidf_max_n,
            verbal_pos: ng.verbal_pos,
            em_iters: al.iters,
            align_threshold: al.threshold,
            nugget: kr.nugget,
            psill: kr.psill,
            range: kr.range,
            grid_nx: kr.grid.nx,
            grid_ny: kr.grid.ny,
            grid_pad: kr.grid.pad,
            levels: kr.levels,
            distance: kr.mode,
            markers: Vec::new(),
            corpus_dir: None,
            metadata: None,
            region: None,
            deps: None,
            gold: None,
        }
    }
}

fn bad(field: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(field: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(field, format!("cannot parse {v:?}")))
}

fn finite(field: &str, v: &str) -> Result<f64> {
    let x: f64 = num(field, v)?;
    if !x.is_finite() {
        return Err(bad(field, "must be finite"));
    }
    Ok(x)
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn auto(field: &str, v: &str) -> Result<Option<f64>> {
    if v == "auto" {
        Ok(None)
    } else {
        finite(field, v).map(Some)
    }
}

fn path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "auto".into(), |v| v.to_string())
}

fn fmt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl PipelineConfig {
    /// Sets one key. Values are checked by `validate`, not here.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (key, v) = (key.trim(), value.trim());
        match key {
            "source" => self.source = v.to_string(),
            "pivot" => self.pivot = v.to_string(),
            "stopwords" => self.stopwords = list(v),
            "epsilon" => self.epsilon = finite(key, v)?,
            "ngram_min" => self.ngram_min = num(key, v)?,
            "ngram_max" => self.ngram_max = num(key, v)?,
            "top_chi2" => self.top_chi2 = num(key, v)?,
            "top_cooccurrence" => self.top_cooccurrence = num(key, v)?,
            "dbscan_eps" => self.dbscan_eps = finite(key, v)?,
            "dbscan_min_pts" => self.dbscan_min_pts = num(key, v)?,
            "tfidf_min_n" => self.tfidf_min_n = num(key, v)?,
            "tfidf_max_n" => self.tfidf_max_n = num(key, v)?,
            "verbal_pos" => self.verbal_pos = list(v),
            "em_iters" => self.em_iters = num(key, v)?,
            "align_threshold" => self.align_threshold = finite(key, v)?,
            "nugget" => self.nugget = finite(key, v)?,
            "psill" => self.psill = auto(key, v)?,
            "range" => self.range = auto(key, v)?,
            "grid_nx" => self.grid_nx = num(key, v)?,
            "grid_ny" => self.grid_ny = num(key, v)?,
            "grid_pad" => self.grid_pad = finite(key, v)?,
            "levels" => {
                self.levels = list(v).iter().map(|s| finite(key, s)).collect::<Result<_>>()?;
            }
            "distance" => {
                self.distance = match v {
                    "planar" => DistanceMode::Planar,
                    "geographic" => DistanceMode::Geographic,
                    _ => return Err(bad(key, format!("expected planar or geographic, got {v:?}"))),
                }
            }
            "markers" => {
                self.markers = list(v)
                    .iter()
                    .map(|p| {
                        p.split_once(':')
                            .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                            .ok_or_else(|| bad(key, format!("expected suffix:marker, got {p:?}")))
                    })
                    .collect::<Result<_>>()?;
            }
            "corpus_dir" => self.corpus_dir = path(v),
            "metadata" => self.metadata = path(v),
            "region" => self.region = path(v),
            "deps" => self.deps = path(v),
            "gold" => self.gold = path(v),
            other => return Err(bad(other, "unknown key")),
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order, then validates.
    pub fn with_overrides<S: AsRef<str>>(mut self, overrides: &[S]) -> Result<Self> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| bad(o, "override must look like key=value"))?;
            self.set(k, v)?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, k + 1, "expected key = value"))?;
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.source.is_empty() {
            return Err(bad("source", "empty"));
        }
        if self.pivot.is_empty() || self.pivot.to_lowercase() != self.pivot || self.pivot.contains(char::is_whitespace) {
            return Err(bad("pivot", "must be one lowercase token"));
        }
        StopwordList::new(self.stopwords.iter().cloned())?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(bad("epsilon", "must be in (0, 1)"));
        }
        if self.ngram_min < 1 || self.ngram_min > self.ngram_max {
            return Err(bad("ngram_min", "need 1 <= ngram_min <= ngram_max"));
        }
        if self.top_cooccurrence < 1 || self.top_cooccurrence > self.top_chi2 {
            return Err(bad("top_cooccurrence", "need 1 <= top_cooccurrence <= top_chi2"));
        }
        if !(self.dbscan_eps >= 0.0 && self.dbscan_eps <= 1.0) {
            return Err(bad("dbscan_eps", "cosine distance threshold must be in [0, 1]"));
        }
        if self.dbscan_min_pts < 1 {
            return Err(bad("dbscan_min_pts", "must be at least 1"));
        }
        if self.tfidf_min_n < 1 || self.tfidf_min_n > self.tfidf_max_n {
            return Err(bad("tfidf_min_n", "need 1 <= tfidf_min_n <= tfidf_max_n"));
        }
        if self.verbal_pos.is_empty() {
            return Err(bad("verbal_pos", "empty"));
        }
        if self.em_iters < 1 {
            return Err(bad("em_iters", "must be at least 1"));
        }
        if !(self.align_threshold >= 0.0 && self.align_threshold < 1.0) {
            return Err(bad("align_threshold", "must be in [0, 1)"));
        }
        if self.nugget < 0.0 {
            return Err(bad("nugget", "must be nonnegative"));
        }
        if self.psill.is_some_and(|p| p <= 0.0) {
            return Err(bad("psill", "must be positive"));
        }
        if self.range.is_some_and(|r| r <= 0.0) {
            return Err(bad("range", "must be positive"));
        }
        if self.grid_nx < 2 || self.grid_ny < 2 {
            return Err(bad("grid_nx", "grid needs at least 2 nodes per axis"));
        }
        if !(0.0..=1.0).contains(&self.grid_pad) {
            return Err(bad("grid_pad", "must be in [0, 1]"));
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(bad("levels", "need at least one level, all in [0, 1]"));
        }
        if self.markers.iter().any(|(a, b)| a.is_empty() || b.is_empty()) {
            return Err(bad("markers", "suffix and marker must be nonempty"));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[String]| v.join(",");
        let levels: Vec<String> = self.levels.iter().map(f64::to_string).collect();
        let markers: Vec<String> = self.markers.iter().map(|(a, b)| format!("{a}:{b}")).collect();
        let markers = markers.join(",");
        let distance = match self.distance {
            DistanceMode::Planar => "planar",
            DistanceMode::Geographic => "geographic",
        };
        let rows: Vec<(&str, String)> = vec![
            ("source", self.source.clone()),
            ("pivot", self.pivot.clone()),
            ("stopwords", join(&self.stopwords)),
            ("epsilon", self.epsilon.to_string()),
            ("ngram_min", self.ngram_min.to_string()),
            ("ngram_max", self.ngram_max.to_string()),
            ("top_chi2", self.top_chi2.to_string()),
            ("top_cooccurrence", self.top_cooccurrence.to_string()),
            ("dbscan_eps", self.dbscan_eps.to_string()),
            ("dbscan_min_pts", self.dbscan_min_pts.to_string()),
            ("tfidf_min_n", self.tfidf_min_n.to_string()),
            ("tfidf_max_n", self.tfidf_max_n.to_string()),
            ("verbal_pos", join(&self.verbal_pos)),
            ("em_iters", self.em_iters.to_string()),
            ("align_threshold", self.align_threshold.to_string()),
            ("nugget", self.nugget.to_string()),
            ("psill", fmt_opt(self.psill)),
            ("range", fmt_opt(self.range)),
            ("grid_nx", self.grid_nx.to_string()),
            ("grid_ny", self.grid_ny.to_string()),
            ("grid_pad", self.grid_pad.to_string()),
            ("levels", levels.join(",")),
            ("distance", distance.to_string()),
            ("markers", markers),
            ("corpus_dir", fmt_path(&self.corpus_dir)),
            ("metadata", fmt_path(&self.metadata)),
            ("region", fmt_path(&self.region)),
            ("deps", fmt_path(&self.deps)),
            ("gold", fmt_path(&self.gold)),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn ngram_settings(&self) -> Result<NgramSettings> {
        Ok(NgramSettings {
            pivot: self.pivot.clone(),
            stopwords: StopwordList::new(self.stopwords.iter().cloned())?,
            epsilon: self.epsilon,
            n_min: self.ngram_min,
            n_max: self.ngram_max,
            top_chi2: self.top_chi2,
            top_cooccurrence: self.top_cooccurrence,
            cluster: ClusterSettings {
                eps: self.dbscan_eps,
                min_pts: self.dbscan_min_pts,
                tfidf_min_n: self.tfidf_min_n,
                tfidf_max_n: self.tfidf_max_n,
            },
            verbal_pos: self.verbal_pos.clone(),
        })
    }

    /// `None` when no markers are configured.
    pub fn marker_suffixes(&self) -> Result<Option<MarkerSuffixes>> {
        if self.markers.is_empty() {
            return Ok(None);
        }
        MarkerSuffixes::new(self.markers.iter().cloned()).map(Some)
    }

    pub fn aligner_settings(&self) -> AlignerSettings {
        AlignerSettings {
            iters: self.em_iters,
            threshold: self.align_threshold,
        }
    }

    pub fn krige_settings(&self) -> KrigeSettings {
        KrigeSettings {
            nugget: self.nugget,
            psill: self.psill,
            range: self.range,
            grid: GridSpec {
                nx: self.grid_nx,
                ny: self.grid_ny,
                pad: self.grid_pad,
            },
            levels: self.levels.clone(),
            mode: self.distance,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let d = PipelineConfig::default();
        d.validate().unwrap();
        assert_eq!(PipelineConfig::parse(&d.to_text(), "snap").unwrap(), d);
        assert_eq!(d.top_chi2, 200);
        assert_eq!(d.top_cooccurrence, 20);
        assert_eq!(d.epsilon, 1e-10);
        assert_eq!(d.stopwords.len(), 7);
    }

    #[test]
    fn overrides_and_comments() {
        let c = PipelineConfig::parse("# calibration\npivot = when\npsill = 0.3\nlevels = 0.5, 0.9\n", "c").unwrap();
        assert_eq!(c.psill, Some(0.3));
        assert_eq!(c.levels, vec![0.5, 0.9]);
        let c = c
            .with_overrides(&["psill=auto", "distance=geographic", "markers=ka:SS, ku:DS"])
            .unwrap();
        assert_eq!(c.markers[1], ("ku".to_string(), "DS".to_string()));
        assert_eq!(c.psill, None);
        assert_eq!(c.distance, DistanceMode::Geographic);
        assert_eq!(PipelineConfig::parse(&c.to_text(), "snap").unwrap(), c);
    }

    fn field_of(e: Error) -> String {
        match e {
            Error::Config { field, .. } => field,
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn invalid_values_name_the_field() {
        let d = PipelineConfig::default;
        assert_eq!(field_of(d().with_overrides(&["epsilon=2"]).unwrap_err()), "epsilon");
        assert_eq!(field_of(d().with_overrides(&["dbscan_eps=x"]).unwrap_err()), "dbscan_eps");
        assert_eq!(field_of(d().with_overrides(&["levels=0.5,1.5"]).unwrap_err()), "levels");
        assert_eq!(field_of(d().with_overrides(&["colour=red"]).unwrap_err()), "colour");
        assert_eq!(field_of(d().with_overrides(&["top_cooccurrence=300"]).unwrap_err()), "top_cooccurrence");
        assert_eq!(field_of(d().with_overrides(&["stopwords=And"]).unwrap_err()), "stopwords");
        assert_eq!(field_of(d().with_overrides(&["markers=ka"]).unwrap_err()), "markers");
        assert!(PipelineConfig::parse("pivot when\n", "c").is_err());
    }
}
