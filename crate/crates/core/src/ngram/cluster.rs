//! Grouping of candidate grams into allomorph clusters.
//!
//! Each gram is a document whose features are its own character n-grams.
//! Weights are raw counts times the smoothed idf `ln((1+n)/(1+df)) + 1`,
//! rows are L2-normalized, and DBSCAN runs on cosine distance.

use std::collections::{BTreeMap, HashSet};

use super::{NgramCandidate, NgramCluster};

/// Row-normalized TF-IDF vectors over character n-grams of lengths
/// `min_n..=max_n`. Rows are sparse, sorted by feature id.
pub fn tfidf_vectors(docs: &[&str], min_n: usize, max_n: usize) -> Vec<Vec<(usize, f64)>> {
    let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
    let mut counts: Vec<BTreeMap<&str, u32>> = Vec::with_capacity(docs.len());
    for doc in docs {
        let bounds: Vec<usize> = doc.char_indices().map(|(i, _)| i).chain([doc.len()]).collect();
        let nchars = bounds.len() - 1;
        let mut c = BTreeMap::new();
        for n in min_n.max(1)..=max_n.min(nchars) {
            for s in 0..=nchars - n {
                *c.entry(&doc[bounds[s]..bounds[s + n]]).or_insert(0) += 1;
            }
        }
        for f in c.keys() {
            let next = vocab.len();
            vocab.entry(f).or_insert(next);
        }
        counts.push(c);
    }
    let mut df = vec![0u32; vocab.len()];
    for c in &counts {
        for f in c.keys() {
            df[vocab[f]] += 1;
        }
    }
    let n = docs.len() as f64;
    let idf: Vec<f64> = df.iter().map(|&d| ((1.0 + n) / (1.0 + f64::from(d))).ln() + 1.0).collect();
    counts
        .into_iter()
        .map(|c| {
            let mut row: Vec<(usize, f64)> = c
                .into_iter()
                .map(|(f, k)| {
                    let id = vocab[f];
                    (id, f64::from(k) * idf[id])
                })
                .collect();
            row.sort_by_key(|e| e.0);
            let norm = row.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
            if norm > 0.0 {
                for e in &mut row {
                    e.1 /= norm;
                }
            }
            row
        })
        .collect()
}

fn dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

/// Pairwise cosine distances, clipped to `[0, 2]` with a zero diagonal.
pub fn cosine_distances(rows: &[Vec<(usize, f64)>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = (1.0 - dot(&rows[i], &rows[j])).clamp(0.0, 2.0);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// DBSCAN over a precomputed distance matrix. Neighborhoods include the
/// point itself and every point at distance `<= eps`. Returns one cluster
/// id per point, `None` for noise. Clusters are numbered in order of their
/// first core point.
pub fn dbscan(dist: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = dist.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist[i][j] <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut labels = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if labels[i].is_some() || !core[i] {
            continue;
        }
        labels[i] = Some(next);
        let mut stack = vec![i];
        while let Some(p) = stack.pop() {
            if !core[p] {
                continue;
            }
            for &q in &neighbors[p] {
                if labels[q].is_none() {
                    labels[q] = Some(next);
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    labels
}

#[derive(Debug, Clone, Copy)]
pub struct ClusterSettings {
    pub eps: f64,
    pub min_pts: usize,
    pub tfidf_min_n: usize,
    pub tfidf_max_n: usize,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        ClusterSettings {
            eps: 0.5,
            min_pts: 2,
            tfidf_min_n: 1,
            tfidf_max_n: 3,
        }
    }
}

/// Clusters the candidates (deduplicated by gram). Noise points become
/// singleton clusters. Labels `ngram_1..` follow descending total
/// cooccurrence, ties going to the cluster with the smaller least member.
pub fn cluster_allomorphs(cands: &[NgramCandidate], settings: ClusterSettings) -> Vec<NgramCluster> {
    let mut seen = HashSet::new();
    let cands: Vec<&NgramCandidate> = cands.iter().filter(|c| seen.insert(c.gram.as_str())).collect();
    if cands.is_empty() {
        return Vec::new();
    }
    let docs: Vec<&str> = cands.iter().map(|c| c.gram.as_str()).collect();
    let vectors = tfidf_vectors(&docs, settings.tfidf_min_n, settings.tfidf_max_n);
    let assignment = dbscan(&cosine_distances(&vectors), settings.eps, settings.min_pts);

    let mut groups: BTreeMap<usize, Vec<NgramCandidate>> = BTreeMap::new();
    let mut next_noise = assignment.iter().flatten().max().map_or(0, |m| m + 1);
    for (c, a) in cands.iter().zip(assignment) {
        let id = a.unwrap_or_else(|| {
            next_noise += 1;
            next_noise - 1
        });
        groups.entry(id).or_default().push((*c).clone());
    }
    let mut clusters: Vec<NgramCluster> = groups
        .into_values()
        .map(|mut members| {
            members.sort_by(|a, b| a.gram.cmp(&b.gram));
            let total = members.iter().map(|m| m.score.cooccurrence).sum();
            NgramCluster {
                label: String::new(),
                members,
                total_cooccurrence: total,
            }
        })
        .collect();
    clusters.sort_by(|a, b| {
        b.total_cooccurrence
            .cmp(&a.total_cooccurrence)
            .then_with(|| a.members[0].gram.cmp(&b.members[0].gram))
    });
    for (k, c) in clusters.iter_mut().enumerate() {
        c.label = format!("ngram_{}", k + 1);
    }
    clusters
}
