//! Dissimilarity between usage points and their 2D embedding.
//!
//! Two points are as far apart as the number of languages that label them
//! differently (NOMATCH is an ordinary label). The matrix is embedded with
//! classical (Torgerson) scaling; the top two eigenpairs of the
//! double-centered matrix come from power iteration with deflation.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use rayon::prelude::*;

use crate::aligner::UsageSet;
use crate::error::{read_to_string, Error, Result};

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let mut d = vec![0.0; n * n];
        d.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if i == j { 0.0 } else { f(i.min(j), i.max(j)) };
            }
        });
        DistanceMatrix { n, d }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::Embedding(format!("row {i} has {} entries, expected {n}", r.len())));
            }
            for (j, v) in r.iter().enumerate() {
                if !v.is_finite() || *v < 0.0 || (i == j && *v != 0.0) || *v != rows[j][i] {
                    return Err(Error::Embedding(format!("entry ({i},{j}) breaks symmetry or sign")));
                }
            }
        }
        Ok(DistanceMatrix {
            n,
            d: rows.concat(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

/// Counts, for each pair of rows, the columns whose labels differ.
pub fn hamming_matrix<S: AsRef<str> + Sync>(rows: &[Vec<S>]) -> Result<DistanceMatrix> {
    let width = rows.first().map_or(0, Vec::len);
    if let Some(k) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::Embedding(format!("point {k} has {} labels, expected {width}", rows[k].len())));
    }
    // intern labels per column so comparisons are integer compares
    let mut ids: Vec<Vec<u32>> = vec![Vec::with_capacity(width); rows.len()];
    for col in 0..width {
        let mut table: HashMap<&str, u32> = HashMap::new();
        for (r, out) in rows.iter().zip(ids.iter_mut()) {
            let next = table.len() as u32;
            out.push(*table.entry(r[col].as_ref()).or_insert(next));
        }
    }
    Ok(DistanceMatrix::from_fn(rows.len(), |i, j| {
        ids[i].iter().zip(&ids[j]).filter(|(a, b)| a != b).count() as f64
    }))
}

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 10_000;

struct Sym {
    n: usize,
    a: Vec<f64>,
}

impl Sym {
    fn matvec(&self, v: &[f64]) -> Vec<f64> {
        self.a
            .par_chunks(self.n)
            .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
            .collect()
    }

    fn frobenius(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn start_vector(m: &Sym, against: &[&[f64]]) -> Vec<f64> {
    // the largest column lies in the range of the matrix; a small irrational
    // sequence guards against it being orthogonal to the wanted eigenvector
    let n = m.n;
    let col = (0..n)
        .map(|j| (j, (0..n).map(|i| m.a[i * n + j].powi(2)).sum::<f64>()))
        .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best })
        .0;
    let col_norm = (0..n).map(|i| m.a[i * n + col].powi(2)).sum::<f64>().sqrt();
    let mut v: Vec<f64> = (0..n)
        .map(|k| {
            let jitter = 1e-3 * (((k as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5);
            let base = if col_norm > 0.0 { m.a[k * n + col] / col_norm } else { 0.0 };
            base + jitter
        })
        .collect();
    let mean = v.iter().sum::<f64>() / n as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    for u in against {
        let p = dotp(&v, u);
        v.iter_mut().zip(*u).for_each(|(x, y)| *x -= p * y);
    }
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Dominant eigenpair of `m + shift*I` (largest magnitude), reported for `m`.
fn power(m: &Sym, shift: f64, against: &[&[f64]], scale: f64) -> (f64, Vec<f64>, f64) {
    let mut v = start_vector(m, against);
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_MAX_ITERS {
        let mut w = m.matvec(&v);
        w.iter_mut().zip(&v).for_each(|(x, y)| *x += shift * y);
        lambda = dotp(&v, &w);
        residual = w.iter().zip(&v).map(|(x, y)| (x - lambda * y).powi(2)).sum::<f64>().sqrt();
        if residual <= POWER_TOL * scale {
            break;
        }
        let nw = norm(&w);
        if nw == 0.0 {
            break;
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    if residual > POWER_TOL * scale {
        warn!("power iteration stopped at residual {residual:e}");
    }
    (lambda - shift, v, residual)
}

/// Largest algebraic eigenpair of `m`.
fn top_eigenpair(m: &Sym, against: &[&[f64]], scale: f64) -> (f64, Vec<f64>, f64) {
    let (lambda, v, r) = power(m, 0.0, against, scale);
    if lambda >= 0.0 {
        return (lambda, v, r);
    }
    // the dominant eigenvalue is negative; shift the spectrum up
    power(m, -lambda, against, scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub coords: Vec<(f64, f64)>,
    pub eigenvalues: [f64; 2],
    /// Residuals `|Bv - lambda v|` of the two eigenpairs.
    pub residuals: [f64; 2],
    pub frobenius: f64,
    pub one_dimensional: bool,
}

fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = k;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Double-centered Gram matrix `-1/2 J D^2 J`.
fn torgerson(d: &DistanceMatrix) -> Sym {
    let n = d.n;
    let sq: Vec<f64> = d.d.iter().map(|x| x * x).collect();
    let row_mean: Vec<f64> = sq.chunks(n).map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = -0.5 * (sq[i * n + j] - row_mean[i] - row_mean[j] + grand);
        }
    }
    Sym { n, a }
}

pub fn classical_mds(d: &DistanceMatrix) -> Result<Embedding> {
    let n = d.n;
    if n < 3 {
        return Err(Error::Embedding(format!("need at least 3 points, got {n}")));
    }
    let mut b = torgerson(d);
    let scale = b.frobenius();
    if scale == 0.0 {
        return Ok(Embedding {
            coords: vec![(0.0, 0.0); n],
            eigenvalues: [0.0, 0.0],
            residuals: [0.0, 0.0],
            frobenius: 0.0,
            one_dimensional: true,
        });
    }
    let (l1, mut v1, r1) = top_eigenpair(&b, &[], scale);
    orient(&mut v1);
    for i in 0..n {
        for j in 0..n {
            b.a[i * n + j] -= l1 * v1[i] * v1[j];
        }
    }
    let (l2, mut v2, r2) = top_eigenpair(&b, &[&v1], scale);
    orient(&mut v2);
    // eigenvalues within rounding noise of zero count as zero
    let one_dimensional = l2 <= POWER_TOL * scale;
    if one_dimensional {
        warn!("second eigenvalue {l2:e} is not positive; embedding is one-dimensional");
    }
    let s1 = l1.max(0.0).sqrt();
    let s2 = if one_dimensional { 0.0 } else { l2.sqrt() };
    let coords = (0..n).map(|i| (v1[i] * s1 + 0.0, v2[i] * s2 + 0.0)).collect();
    Ok(Embedding {
        coords,
        eigenvalues: [l1, l2],
        residuals: [r1, r2],
        frobenius: scale,
        one_dimensional,
    })
}

/// Kruskal stress-1 of an embedding against the input dissimilarities.
pub fn kruskal_stress(d: &DistanceMatrix, coords: &[(f64, f64)]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..d.n {
        for j in i + 1..d.n {
            let e = ((coords[i].0 - coords[j].0).powi(2) + (coords[i].1 - coords[j].1).powi(2)).sqrt();
            num += (d.get(i, j) - e).powi(2);
            den += d.get(i, j).powi(2);
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapPoint {
    pub id: usize,
    pub verse_id: String,
    pub x: f64,
    pub y: f64,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SemanticMap {
    pub languages: Vec<String>,
    pub points: Vec<MapPoint>,
}

impl SemanticMap {
    pub fn language_index(&self, code: &str) -> Result<usize> {
        self.languages
            .iter()
            .position(|c| c == code)
            .ok_or_else(|| Error::UnknownLanguage(code.to_string()))
    }
}

/// Hamming matrix plus MDS over the usage labels.
pub fn build_map(usage: &UsageSet) -> Result<(SemanticMap, Embedding)> {
    let rows = usage.rows();
    let d = hamming_matrix(&rows)?;
    let emb = classical_mds(&d)?;
    let points = usage
        .points
        .iter()
        .zip(&emb.coords)
        .map(|(p, &(x, y))| MapPoint {
            id: p.id,
            verse_id: p.verse_id.clone(),
            x,
            y,
            labels: p.labels.clone(),
        })
        .collect();
    Ok((
        SemanticMap {
            languages: usage.languages.clone(),
            points,
        },
        emb,
    ))
}

/// Tab-separated: `point_id verse_id x y <one label column per language>`.
pub fn format_map(map: &SemanticMap) -> String {
    let mut out = String::from("point_id\tverse_id\tx\ty");
    for l in &map.languages {
        out.push('\t');
        out.push_str(l);
    }
    out.push('\n');
    for p in &map.points {
        let _ = write!(out, "{}\t{}\t{}\t{}", p.id, p.verse_id, p.x, p.y);
        for l in &p.labels {
            out.push('\t');
            out.push_str(l);
        }
        out.push('\n');
    }
    out
}

pub fn parse_map(text: &str, origin: &str) -> Result<SemanticMap> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(origin, 1, "empty map file"))?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < 4 || cols[..4] != ["point_id", "verse_id", "x", "y"] {
        return Err(Error::parse(origin, 1, "unexpected map header"));
    }
    let languages: Vec<String> = cols[4..].iter().map(|s| s.to_string()).collect();
    let mut points = Vec::new();
    for (k, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 + languages.len() {
            return Err(Error::parse(origin, k + 1, "wrong column count"));
        }
        let bad = |s: &str| Error::parse(origin, k + 1, format!("bad number {s:?}"));
        let x: f64 = f[2].parse().map_err(|_| bad(f[2]))?;
        let y: f64 = f[3].parse().map_err(|_| bad(f[3]))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::parse(origin, k + 1, "non-finite coordinate"));
        }
        points.push(MapPoint {
            id: f[0].parse().map_err(|_| bad(f[0]))?,
            verse_id: f[1].to_string(),
            x,
            y,
            labels: f[4..].iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(SemanticMap { languages, points })
}

pub fn load_map(path: &Path) -> Result<SemanticMap> {
    parse_map(&read_to_string(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn euclid(p: &[(f64, f64)]) -> DistanceMatrix {
        DistanceMatrix::from_fn(p.len(), |i, j| ((p[i].0 - p[j].0).powi(2) + (p[i].1 - p[j].1).powi(2)).sqrt())
    }

    fn embedded(e: &Embedding) -> DistanceMatrix {
        euclid(&e.coords)
    }

    #[test]
    fn hamming_examples() {
        let d = hamming_matrix(&[vec!["a", "b", "c"], vec!["a", "x", "c"], vec!["a", "b", "c"]]).unwrap();
        assert_eq!(d.get(0, 1), 1.0);
        assert_eq!(d.get(0, 2), 0.0);
        let d = hamming_matrix(&[vec!["NOMATCH", "b"], vec!["NOMATCH", "b"], vec!["z", "b"]]).unwrap();
        assert_eq!(d.get(0, 1), 0.0);
        assert_eq!(d.get(0, 2), 1.0);
        assert!(hamming_matrix(&[vec!["a"], vec!["a", "b"]]).is_err());
    }

    #[test]
    fn two_heaps_separate_by_h() {
        // 3 identical points vs 4 identical points, differing in 5 of 8 languages
        let a = vec!["p"; 8];
        let mut b = a.clone();
        for l in b.iter_mut().take(5) {
            *l = "q";
        }
        let rows = vec![a.clone(), a.clone(), a, b.clone(), b.clone(), b.clone(), b];
        let e = classical_mds(&hamming_matrix(&rows).unwrap()).unwrap();
        let sep = embedded(&e).get(0, 6);
        assert!(((sep - 5.0) / 5.0).abs() < 1e-6, "{sep}");
        assert!(e.one_dimensional);
        assert!(e.coords.iter().all(|c| c.1 == 0.0));
    }

    #[test]
    fn unit_square_distances_recovered() {
        let sq = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let d = euclid(&sq);
        let e = classical_mds(&d).unwrap();
        let got = embedded(&e);
        for i in 0..4 {
            for j in 0..4 {
                assert!((got.get(i, j) - d.get(i, j)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        let e = classical_mds(&DistanceMatrix::from_fn(5, |_, _| 0.0)).unwrap();
        assert!(e.coords.iter().all(|&c| c == (0.0, 0.0)));
        assert!(classical_mds(&DistanceMatrix::from_fn(2, |_, _| 1.0)).is_err());
    }

    #[test]
    fn sign_convention_and_order() {
        let pts = [(0.0, 0.0), (3.0, 0.5), (-1.0, 2.0), (4.0, -1.0), (2.0, 2.0)];
        let e = classical_mds(&euclid(&pts)).unwrap();
        assert!(e.eigenvalues[0] >= e.eigenvalues[1]);
        for axis in 0..2 {
            let vals: Vec<f64> = e.coords.iter().map(|c| if axis == 0 { c.0 } else { c.1 }).collect();
            let m = vals.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(m > 0.0);
        }
        assert!(e.residuals[0] < 1e-8 * e.frobenius);
        assert!(e.residuals[1] < 1e-8 * e.frobenius);
    }

    #[test]
    fn map_round_trip() {
        let map = SemanticMap {
            languages: vec!["a".into(), "b".into()],
            points: vec![MapPoint {
                id: 0,
                verse_id: "40001001".into(),
                x: 0.1 + 0.2,
                y: -1e-17,
                labels: vec!["x".into(), "NOMATCH".into()],
            }],
        };
        assert_eq!(parse_map(&format_map(&map), "m").unwrap(), map);
    }

    proptest! {
        #[test]
        fn hamming_triangle_inequality(
            rows in proptest::collection::vec(proptest::collection::vec(0u8..3, 6), 3..12)
        ) {
            let rows: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect();
            let d = hamming_matrix(&rows).unwrap();
            for i in 0..d.n() {
                for j in 0..d.n() {
                    prop_assert_eq!(d.get(i, j), d.get(j, i));
                    for k in 0..d.n() {
                        prop_assert!(d.get(i, k) <= d.get(i, j) + d.get(j, k));
                    }
                }
            }
        }

        #[test]
        fn permutation_invariant_distances(
            pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 4..10),
            seed in any::<u64>(),
        ) {
            let mut perm: Vec<usize> = (0..pts.len()).collect();
            let mut s = seed;
            for k in (1..perm.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(k, (s >> 33) as usize % (k + 1));
            }
            let permuted: Vec<_> = perm.iter().map(|&k| pts[k]).collect();
            let a = embedded(&classical_mds(&euclid(&pts)).unwrap());
            let b = embedded(&classical_mds(&euclid(&permuted)).unwrap());
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    prop_assert!((a.get(perm[i], perm[j]) - b.get(i, j)).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn planar_metrics_have_no_stress(
            pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..15),
        ) {
            let d = euclid(&pts);
            let e = classical_mds(&d).unwrap();
            prop_assume!(!e.one_dimensional);
            prop_assert!(kruskal_stress(&d, &e.coords) < 1e-6);
        }
    }
}
