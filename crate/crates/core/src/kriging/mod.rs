//! Ordinary kriging of label indicators over the semantic map.
//!
//! For each label of a language, usage points carry 1 where the language uses
//! the label and 0 elsewhere. The indicator field is interpolated on a
//! regular grid with a Gaussian variogram whose parameters are set, not
//! fitted (a single lag bin leaves nothing to fit). The prediction grid is
//! rescaled to `[0, 1]` and contoured near its maximum.

pub mod contour;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::semmap::SemanticMap;

pub use contour::{extract_contours, ContourSet};

/// `gamma(h) = nugget + psill * (1 - exp(-3 h^2 / range^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramParams {
    pub nugget: f64,
    pub psill: f64,
    pub range: f64,
}

impl VariogramParams {
    pub fn new(nugget: f64, psill: f64, range: f64) -> Result<Self> {
        let ok = nugget.is_finite() && psill.is_finite() && range.is_finite();
        if !ok || nugget < 0.0 || psill <= 0.0 || range <= 0.0 {
            return Err(Error::Kriging(format!(
                "invalid variogram nugget={nugget} psill={psill} range={range}"
            )));
        }
        Ok(VariogramParams { nugget, psill, range })
    }

    pub fn sill(&self) -> f64 {
        self.nugget + self.psill
    }
}

/// Semivariance at lag `h`; `gamma(0) = nugget`.
pub fn gaussian_variogram(h: f64, p: &VariogramParams) -> f64 {
    p.nugget + p.psill * (1.0 - (-3.0 * h * h / (p.range * p.range)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMode {
    #[default]
    Planar,
    /// Great-circle angle in degrees between (lon, lat) pairs.
    Geographic,
}

fn distance(mode: DistanceMode, a: (f64, f64), b: (f64, f64)) -> f64 {
    match mode {
        DistanceMode::Planar => (a.0 - b.0).hypot(a.1 - b.1),
        DistanceMode::Geographic => {
            let (lon1, lat1) = (a.0.to_radians(), a.1.to_radians());
            let (lon2, lat2) = (b.0.to_radians(), b.1.to_radians());
            let s = ((lat2 - lat1) / 2.0).sin().powi(2)
                + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
            (2.0 * s.sqrt().min(1.0).asin()).to_degrees()
        }
    }
}

/// `(xmin, xmax, ymin, ymax)`
pub type Extent = (f64, f64, f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct KrigingGrid {
    pub nx: usize,
    pub ny: usize,
    pub extent: Extent,
    /// Row-major, `ny` rows of `nx` values; row 0 is `ymin`.
    pub z: Vec<f64>,
    pub z_norm: Vec<f64>,
}

impl KrigingGrid {
    pub fn node(&self, ix: usize, iy: usize) -> (f64, f64) {
        node_coord(self.extent, self.nx, self.ny, ix, iy)
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.z[iy * self.nx + ix]
    }

    pub fn norm_at(&self, ix: usize, iy: usize) -> f64 {
        self.z_norm[iy * self.nx + ix]
    }

    /// A grid with the given node values; `z_norm` is derived.
    pub fn from_values(nx: usize, ny: usize, extent: Extent, z: Vec<f64>) -> Self {
        let z_norm = normalize(&z);
        KrigingGrid { nx, ny, extent, z, z_norm }
    }
}

fn node_coord(extent: Extent, nx: usize, ny: usize, ix: usize, iy: usize) -> (f64, f64) {
    let (x0, x1, y0, y1) = extent;
    let x = if ix + 1 == nx { x1 } else { x0 + (x1 - x0) * ix as f64 / (nx - 1) as f64 };
    let y = if iy + 1 == ny { y1 } else { y0 + (y1 - y0) * iy as f64 / (ny - 1) as f64 };
    (x, y)
}

/// Spread below this (relative to the magnitude of the field) is solver
/// rounding, and the field is treated as constant.
const FLAT_SPREAD: f64 = 1e-10;

/// `(z - min) / (max - min)`, or all zeros for a constant field.
pub fn normalize(z: &[f64]) -> Vec<f64> {
    let lo = z.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > FLAT_SPREAD * hi.abs().max(lo.abs()).max(1.0)) {
        return vec![0.0; z.len()];
    }
    z.iter().map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Fraction of each span added on both sides of the bounding box.
    pub pad: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nx: 100, ny: 100, pad: 0.05 }
    }
}

impl GridSpec {
    /// Padded bounding box of the points. A zero span is widened to 1.
    pub fn extent_for(&self, pts: impl IntoIterator<Item = (f64, f64)>) -> Result<Extent> {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) {
            return Err(Error::Kriging("no finite points to grid".into()));
        }
        let widen = |lo: f64, hi: f64| {
            let span = hi - lo;
            if span > 0.0 {
                (lo - self.pad * span, hi + self.pad * span)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (x0, x1) = widen(x0, x1);
        let (y0, y1) = widen(y0, y1);
        Ok((x0, x1, y0, y1))
    }
}

/// LU factorization with partial pivoting of a dense square matrix.
#[derive(Debug, Clone)]
struct Lu {
    n: usize,
    a: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()).then(j.cmp(&i)))
                .unwrap_or(k);
            if a[p * n + k].abs() <= 1e-14 * scale {
                return Err(Error::Kriging("singular kriging system".into()));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= f * a[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { n, a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.a[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.a[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.a[i * n + i];
        }
        x
    }
}

/// A factored ordinary-kriging system for a fixed sample set.
#[derive(Debug, Clone)]
pub struct Kriger {
    locs: Vec<(f64, f64)>,
    values: Vec<f64>,
    params: VariogramParams,
    mode: DistanceMode,
    system: Vec<f64>,
    lu: Lu,
}

// Groups keep the order of first appearance.
fn average_duplicates(samples: &[(f64, f64, f64)]) -> Result<(Vec<(f64, f64)>, Vec<f64>)> {
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut groups: Vec<(f64, f64, f64, usize)> = Vec::new();
    for &(x, y, v) in samples {
        if !x.is_finite() || !y.is_finite() || !v.is_finite() {
            return Err(Error::Kriging(format!("non-finite sample ({x}, {y}, {v})")));
        }
        // +0.0 folds -0.0 into 0.0 so they group together
        let key = ((x + 0.0).to_bits(), (y + 0.0).to_bits());
        let k = *index.entry(key).or_insert_with(|| {
            groups.push((x, y, 0.0, 0));
            groups.len() - 1
        });
        groups[k].2 += v;
        groups[k].3 += 1;
    }
    Ok(groups.into_iter().map(|(x, y, s, n)| ((x, y), s / n as f64)).unzip())
}

impl Kriger {
    /// Samples at identical locations are averaged first.
    pub fn new(samples: &[(f64, f64, f64)], params: VariogramParams, mode: DistanceMode) -> Result<Self> {
        let (locs, values) = average_duplicates(samples)?;
        if locs.len() < 2 {
            return Err(Error::Kriging("need samples at two or more distinct locations".into()));
        }
        let n = locs.len();
        let m = n + 1;
        let mut a = vec![0.0; m * m];
        for i in 0..n {
            for j in 0..n {
                a[i * m + j] = if i == j {
                    0.0
                } else {
                    gaussian_variogram(distance(mode, locs[i], locs[j]), &params)
                };
            }
            a[i * m + n] = 1.0;
            a[n * m + i] = 1.0;
        }
        let lu = Lu::factor(a.clone(), m)?;
        Ok(Kriger {
            locs,
            values,
            params,
            mode,
            system: a,
            lu,
        })
    }

    pub fn len(&self) -> usize {
        self.locs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locs.is_empty()
    }

    /// Kriging weights followed by the Lagrange multiplier.
    pub fn weights(&self, x: f64, y: f64) -> Vec<f64> {
        let n = self.locs.len();
        let mut rhs: Vec<f64> = self
            .locs
            .iter()
            .map(|&l| {
                let h = distance(self.mode, l, (x, y));
                if h == 0.0 {
                    0.0
                } else {
                    gaussian_variogram(h, &self.params)
                }
            })
            .collect();
        rhs.push(1.0);
        let mut w = self.lu.solve(&rhs);
        // one step of iterative refinement
        let m = n + 1;
        let r: Vec<f64> = (0..m)
            .map(|i| rhs[i] - (0..m).map(|j| self.system[i * m + j] * w[j]).sum::<f64>())
            .collect();
        let dw = self.lu.solve(&r);
        w.iter_mut().zip(dw).for_each(|(a, b)| *a += b);
        w
    }

    pub fn predict(&self, x: f64, y: f64) -> f64 {
        let w = self.weights(x, y);
        w.iter().zip(&self.values).map(|(a, b)| a * b).sum()
    }

    pub fn grid(&self, nx: usize, ny: usize, extent: Extent) -> Result<KrigingGrid> {
        if nx < 2 || ny < 2 {
            return Err(Error::Kriging(format!("grid must be at least 2x2, got {nx}x{ny}")));
        }
        let z: Vec<f64> = (0..ny)
            .into_par_iter()
            .flat_map_iter(|iy| {
                (0..nx).map(move |ix| {
                    let (x, y) = node_coord(extent, nx, ny, ix, iy);
                    self.predict(x, y)
                })
            })
            .collect();
        Ok(KrigingGrid::from_values(nx, ny, extent, z))
    }
}

pub fn ordinary_krige(
    samples: &[(f64, f64, f64)],
    params: VariogramParams,
    mode: DistanceMode,
    nx: usize,
    ny: usize,
    extent: Extent,
) -> Result<KrigingGrid> {
    Kriger::new(samples, params, mode)?.grid(nx, ny, extent)
}

/// Unbiased sample variance.
pub fn sample_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrigeSettings {
    pub nugget: f64,
    /// Defaults to the indicator's sample variance (1 when that is 0).
    pub psill: Option<f64>,
    /// Defaults to half the grid diagonal.
    pub range: Option<f64>,
    pub grid: GridSpec,
    pub levels: Vec<f64>,
    pub mode: DistanceMode,
}

impl Default for KrigeSettings {
    fn default() -> Self {
        KrigeSettings {
            nugget: 0.0,
            psill: None,
            range: None,
            grid: GridSpec::default(),
            levels: vec![0.8, 0.85, 0.9, 0.95, 1.0],
            mode: DistanceMode::Planar,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabelSurface {
    pub label: String,
    pub params: VariogramParams,
    pub grid: KrigingGrid,
    pub contours: ContourSet,
}

/// One indicator-kriging pass per label of `code` with at least two
/// positive points, in label order. All labels share one grid extent.
pub fn krige_language(map: &SemanticMap, code: &str, settings: &KrigeSettings) -> Result<Vec<LabelSurface>> {
    let k = map.language_index(code)?;
    if map.points.is_empty() {
        return Err(Error::Kriging("empty map".into()));
    }
    let extent = settings.grid.extent_for(map.points.iter().map(|p| (p.x, p.y)))?;
    let diag = (extent.1 - extent.0).hypot(extent.3 - extent.2);
    let labels: BTreeSet<&str> = map.points.iter().map(|p| p.labels[k].as_str()).collect();
    let mut kept = Vec::new();
    for label in labels {
        let positives = map.points.iter().filter(|p| p.labels[k] == label).count();
        if positives < 2 {
            warn!("{code}: label {label} has {positives} point(s); skipped");
            continue;
        }
        kept.push(label);
    }
    kept.par_iter()
        .map(|&label| {
            let samples: Vec<(f64, f64, f64)> = map
                .points
                .iter()
                .map(|p| (p.x, p.y, if p.labels[k] == label { 1.0 } else { 0.0 }))
                .collect();
            let indicator: Vec<f64> = samples.iter().map(|s| s.2).collect();
            let psill = settings.psill.unwrap_or_else(|| {
                let v = sample_variance(&indicator);
                if v > 0.0 {
                    v
                } else {
                    1.0
                }
            });
            let params = VariogramParams::new(settings.nugget, psill, settings.range.unwrap_or(diag / 2.0))?;
            let grid = ordinary_krige(
                &samples,
                params,
                settings.mode,
                settings.grid.nx,
                settings.grid.ny,
                extent,
            )?;
            let contours = extract_contours(&grid, label, &settings.levels)?;
            Ok(LabelSurface {
                label: label.to_string(),
                params,
                grid,
                contours,
            })
        })
        .collect()
}

/// Tab-separated node values of every surface:
/// `label ix iy x y z z_norm`.
pub fn format_grids(surfaces: &[LabelSurface]) -> String {
    let mut out = String::from("label\tix\tiy\tx\ty\tz\tz_norm\n");
    for s in surfaces {
        let g = &s.grid;
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let (x, y) = g.node(ix, iy);
                let _ = writeln!(
                    out,
                    "{}\t{ix}\t{iy}\t{x}\t{y}\t{}\t{}",
                    s.label,
                    g.at(ix, iy),
                    g.norm_at(ix, iy)
                );
            }
        }
    }
    out
}

/// One polyline per line: `label level index x,y x,y ...`.
pub fn format_contours(surfaces: &[LabelSurface]) -> String {
    let mut out = String::from("label\tlevel\tindex\tpoints\n");
    for s in surfaces {
        out.push_str(&contour::format_contour_set(&s.contours));
    }
    out
}

/// Contour sets back from [`format_contours`] output, keyed by label.
pub fn parse_contours(text: &str, origin: &str) -> Result<BTreeMap<String, ContourSet>> {
    contour::parse_contour_lines(text, origin)
}
