//! Iso-lines of a normalized grid by marching squares.
//!
//! A corner is inside when its value is `>= level`. Crossing points are
//! interpolated along cell edges from the lower-index corner, so the two
//! cells sharing an edge produce bit-identical points; crossings within
//! 1e-9 of a corner snap to it. Ambiguous saddle cells follow the average
//! of their four corners. Segments are chained into polylines through
//! shared endpoints.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use super::KrigingGrid;
use crate::error::{Error, Result};

pub type Polyline = Vec<(f64, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct ContourSet {
    pub label: String,
    /// Ascending.
    pub levels: Vec<f64>,
    /// One entry per level.
    pub polylines: Vec<Vec<Polyline>>,
}

const SNAP: f64 = 1e-9;

#[derive(Clone, Copy)]
enum Edge {
    Bottom,
    Right,
    Top,
    Left,
}

struct Cell<'a> {
    g: &'a KrigingGrid,
    ix: usize,
    iy: usize,
    level: f64,
}

impl Cell<'_> {
    // (ix, iy) of both corners of an edge, lower index first
    fn corners(&self, e: Edge) -> ((usize, usize), (usize, usize)) {
        let (i, j) = (self.ix, self.iy);
        match e {
            Edge::Bottom => ((i, j), (i + 1, j)),
            Edge::Right => ((i + 1, j), (i + 1, j + 1)),
            Edge::Top => ((i, j + 1), (i + 1, j + 1)),
            Edge::Left => ((i, j), (i, j + 1)),
        }
    }

    fn crossing(&self, e: Edge) -> (f64, f64) {
        let (p, q) = self.corners(e);
        let (vp, vq) = (self.g.norm_at(p.0, p.1), self.g.norm_at(q.0, q.1));
        let t = (self.level - vp) / (vq - vp);
        if t <= SNAP {
            return self.g.node(p.0, p.1);
        }
        if t >= 1.0 - SNAP {
            return self.g.node(q.0, q.1);
        }
        let (a, b) = (self.g.node(p.0, p.1), self.g.node(q.0, q.1));
        (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
    }
}

fn cell_segments(c: &Cell) -> Vec<(Edge, Edge)> {
    use Edge::*;
    let v = |i, j| c.g.norm_at(i, j);
    let (i, j) = (c.ix, c.iy);
    let corners = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
    let mut case = 0;
    for (bit, val) in corners.iter().enumerate() {
        if *val >= c.level {
            case |= 1 << bit;
        }
    }
    let center_inside = || corners.iter().sum::<f64>() / 4.0 >= c.level;
    match case {
        0 | 15 => vec![],
        1 | 14 => vec![(Left, Bottom)],
        2 | 13 => vec![(Bottom, Right)],
        3 | 12 => vec![(Left, Right)],
        4 | 11 => vec![(Right, Top)],
        6 | 9 => vec![(Bottom, Top)],
        7 | 8 => vec![(Left, Top)],
        // bottom-left and top-right inside
        5 => {
            if center_inside() {
                vec![(Bottom, Right), (Left, Top)]
            } else {
                vec![(Left, Bottom), (Right, Top)]
            }
        }
        // bottom-right and top-left inside
        10 => {
            if center_inside() {
                vec![(Left, Bottom), (Right, Top)]
            } else {
                vec![(Bottom, Right), (Left, Top)]
            }
        }
        _ => unreachable!(),
    }
}

type Key = (u64, u64);

fn key(p: (f64, f64)) -> Key {
    ((p.0 + 0.0).to_bits(), (p.1 + 0.0).to_bits())
}

/// Raw segments at one level, in row-major cell order.
pub fn segments(grid: &KrigingGrid, level: f64) -> Vec<((f64, f64), (f64, f64))> {
    let mut out = Vec::new();
    for iy in 0..grid.ny.saturating_sub(1) {
        for ix in 0..grid.nx.saturating_sub(1) {
            let cell = Cell { g: grid, ix, iy, level };
            for (e1, e2) in cell_segments(&cell) {
                let (a, b) = (cell.crossing(e1), cell.crossing(e2));
                if key(a) != key(b) {
                    out.push((a, b));
                }
            }
        }
    }
    out
}

/// Chains segments through bit-identical endpoints.
pub fn chain(segs: &[((f64, f64), (f64, f64))]) -> Vec<Polyline> {
    let mut at: HashMap<Key, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segs.iter().enumerate() {
        at.entry(key(*a)).or_default().push(k);
        at.entry(key(*b)).or_default().push(k);
    }
    let mut used = vec![false; segs.len()];
    let mut lines = Vec::new();
    let next_from = |p: (f64, f64), used: &[bool]| -> Option<usize> { at[&key(p)].iter().copied().find(|&k| !used[k]) };
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut line = vec![segs[start].0, segs[start].1];
        // forward from the end
        while let Some(k) = next_from(*line.last().unwrap(), &used) {
            used[k] = true;
            let (a, b) = segs[k];
            line.push(if key(a) == key(*line.last().unwrap()) { b } else { a });
        }
        // backward from the start
        let mut head = Vec::new();
        let mut tip = line[0];
        while let Some(k) = next_from(tip, &used) {
            used[k] = true;
            let (a, b) = segs[k];
            tip = if key(a) == key(tip) { b } else { a };
            head.push(tip);
        }
        head.reverse();
        head.extend(line);
        lines.push(head);
    }
    lines
}

/// Contours of `grid.z_norm` at each level.
pub fn extract_contours(grid: &KrigingGrid, label: &str, levels: &[f64]) -> Result<ContourSet> {
    let mut levels = levels.to_vec();
    if let Some(l) = levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::Kriging(format!("contour level {l} outside [0, 1]")));
    }
    levels.sort_by(f64::total_cmp);
    let polylines = levels.iter().map(|&l| chain(&segments(grid, l))).collect();
    Ok(ContourSet {
        label: label.to_string(),
        levels,
        polylines,
    })
}

pub(crate) fn format_contour_set(c: &ContourSet) -> String {
    let mut out = String::new();
    for (level, lines) in c.levels.iter().zip(&c.polylines) {
        for (k, line) in lines.iter().enumerate() {
            let _ = write!(out, "{}\t{level}\t{k}\t", c.label);
            let pts: Vec<String> = line.iter().map(|(x, y)| format!("{x},{y}")).collect();
            out.push_str(&pts.join(" "));
            out.push('\n');
        }
    }
    out
}

pub(crate) fn parse_contour_lines(text: &str, origin: &str) -> Result<BTreeMap<String, ContourSet>> {
    let mut out: BTreeMap<String, ContourSet> = BTreeMap::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| Error::parse(origin, k + 1, m.to_string());
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(bad("wrong column count"));
        }
        let level: f64 = f[1].parse().map_err(|_| bad("bad level"))?;
        let mut pts = Vec::new();
        for pair in f[3].split(' ') {
            let (x, y) = pair.split_once(',').ok_or_else(|| bad("bad point"))?;
            pts.push((
                x.parse::<f64>().map_err(|_| bad("bad x"))?,
                y.parse::<f64>().map_err(|_| bad("bad y"))?,
            ));
        }
        let set = out.entry(f[0].to_string()).or_insert_with(|| ContourSet {
            label: f[0].to_string(),
            levels: vec![],
            polylines: vec![],
        });
        match set.levels.iter().position(|l| *l == level) {
            Some(i) => set.polylines[i].push(pts),
            None => {
                set.levels.push(level);
                set.polylines.push(vec![pts]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> KrigingGrid {
        let ext = (0.0, 1.0, 0.0, 1.0);
        let mut z = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let x = ix as f64 / (nx - 1) as f64;
                let y = iy as f64 / (ny - 1) as f64;
                z.push(f(x, y));
            }
        }
        KrigingGrid::from_values(nx, ny, ext, z)
    }

    #[test]
    fn constant_grid_has_no_contours() {
        let g = grid(5, 5, |_, _| 3.0);
        let c = extract_contours(&g, "a", &[0.2, 0.5, 0.9]).unwrap();
        assert!(c.polylines.iter().all(|l| l.is_empty()));
    }

    #[test]
    fn linear_field_gives_vertical_line() {
        let g = grid(11, 7, |x, _| x);
        let c = extract_contours(&g, "a", &[0.5]).unwrap();
        assert_eq!(c.polylines[0].len(), 1);
        let line = &c.polylines[0][0];
        assert_eq!(line.len(), 7);
        for (x, _) in line {
            assert!((x - 0.5).abs() < 1e-9);
        }
        let c = extract_contours(&grid(10, 4, |x, _| x), "a", &[0.5]).unwrap();
        assert_eq!(c.polylines[0].len(), 1);
        assert!(c.polylines[0][0].iter().all(|(x, _)| (x - 0.5).abs() < 1e-9));
    }

    #[test]
    fn requested_levels_kept() {
        let g = grid(6, 6, |x, y| x * y);
        let c = extract_contours(&g, "a", &[1.0, 0.8, 0.9]).unwrap();
        assert_eq!(c.levels, vec![0.8, 0.9, 1.0]);
        assert!(extract_contours(&g, "a", &[1.5]).is_err());
    }

    #[test]
    fn closed_ring_around_peak() {
        let g = grid(21, 21, |x, y| -((x - 0.5).powi(2) + (y - 0.5).powi(2)));
        let c = extract_contours(&g, "a", &[0.8]).unwrap();
        assert_eq!(c.polylines[0].len(), 1);
        let line = &c.polylines[0][0];
        assert_eq!(key(line[0]), key(*line.last().unwrap()));
    }

    #[test]
    fn saddle_uses_center() {
        // corners: bl=1, br=0, tr=1, tl=0
        let z = vec![1.0, 0.0, 0.0, 1.0];
        let g = KrigingGrid::from_values(2, 2, (0.0, 1.0, 0.0, 1.0), z);
        let c = extract_contours(&g, "a", &[0.4]).unwrap();
        // center 0.5 >= 0.4: the inside diagonal stays connected, so the
        // two segments cut off the outside corners br and tl
        let segs = segments(&g, 0.4);
        assert_eq!(segs.len(), 2);
        assert_eq!(c.polylines[0].len(), 2);
        let (a, b) = segs[0];
        assert!(a.0 > 0.5 && b.1 < 0.5, "{segs:?}");
    }

    #[test]
    fn round_trip_text() {
        let g = grid(6, 6, |x, y| x + y);
        let c = extract_contours(&g, "ngram_1", &[0.8, 0.9]).unwrap();
        let text = format!("label\tlevel\tindex\tpoints\n{}", format_contour_set(&c));
        let back = parse_contour_lines(&text, "c").unwrap();
        assert_eq!(back["ngram_1"], c);
    }

    proptest! {
        #[test]
        fn segments_only_in_mixed_cells(
            z in proptest::collection::vec(0.0f64..1.0, 36),
            level in 0.05f64..0.95,
        ) {
            let g = KrigingGrid::from_values(6, 6, (0.0, 5.0, 0.0, 5.0), z);
            for (a, b) in segments(&g, level) {
                let mx = (a.0 + b.0) / 2.0;
                let my = (a.1 + b.1) / 2.0;
                let (ix, iy) = ((mx.floor() as usize).min(4), (my.floor() as usize).min(4));
                let vals = [g.norm_at(ix, iy), g.norm_at(ix + 1, iy), g.norm_at(ix + 1, iy + 1), g.norm_at(ix, iy + 1)];
                let inside = vals.iter().filter(|v| **v >= level).count();
                prop_assert!(inside > 0 && inside < 4);
            }
        }
    }
}
