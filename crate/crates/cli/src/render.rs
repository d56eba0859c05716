//! Deterministic SVG rendering of one language's semantic map.
//!
//! Points are drawn as circles colored by label, contour polylines in the
//! color of their label, and a legend lists every label. Colors follow
//! label order, with NOMATCH always grey and listed last. Coordinates are
//! printed with three decimals so output is byte-stable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use anyhow::{bail, Result};
use typomap_core::{ContourSet, SemanticMap, NOMATCH};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgStyle {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub radius: f64,
    pub legend_width: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            width: 800.0,
            height: 600.0,
            margin: 24.0,
            radius: 3.5,
            legend_width: 180.0,
        }
    }
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#393b79",
];
const NOMATCH_COLOR: &str = "#999999";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Legend order: labels sorted, NOMATCH last.
pub fn legend_labels(map: &SemanticMap, k: usize, contours: &BTreeMap<String, ContourSet>) -> Vec<String> {
    let mut set: BTreeSet<&str> = map.points.iter().map(|p| p.labels[k].as_str()).collect();
    set.extend(contours.keys().map(String::as_str));
    let has_nomatch = set.remove(NOMATCH);
    let mut out: Vec<String> = set.into_iter().map(String::from).collect();
    if has_nomatch {
        out.push(NOMATCH.to_string());
    }
    out
}

pub fn render_svg(
    map: &SemanticMap,
    code: &str,
    contours: &BTreeMap<String, ContourSet>,
    style: &SvgStyle,
) -> Result<String> {
    if map.points.is_empty() {
        bail!("cannot render an empty map");
    }
    let Some(k) = map.languages.iter().position(|c| c == code) else {
        bail!("language {code} is not in the map");
    };
    let labels = legend_labels(map, k, contours);
    let color: BTreeMap<&str, &str> = labels
        .iter()
        .filter(|l| *l != NOMATCH)
        .enumerate()
        .map(|(i, l)| (l.as_str(), PALETTE[i % PALETTE.len()]))
        .chain([(NOMATCH, NOMATCH_COLOR)])
        .collect();

    // data extent covers points and contour vertices
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut grow = |x: f64, y: f64| {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    };
    for p in &map.points {
        grow(p.x, p.y);
    }
    for set in contours.values() {
        for line in set.polylines.iter().flatten() {
            for &(x, y) in line {
                grow(x, y);
            }
        }
    }
    let span_x = if x1 > x0 { x1 - x0 } else { 1.0 };
    let span_y = if y1 > y0 { y1 - y0 } else { 1.0 };
    let plot_w = style.width - style.legend_width - 2.0 * style.margin;
    let plot_h = style.height - 2.0 * style.margin;
    let sx = |x: f64| style.margin + (x - x0) / span_x * plot_w;
    // screen y grows downwards
    let sy = |y: f64| style.margin + (y1 - y) / span_y * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
        w = style.width,
        h = style.height
    );
    let _ = writeln!(out, "<title>{}</title>", escape(code));
    out.push_str("<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");

    out.push_str("<g id=\"contours\" fill=\"none\" stroke-width=\"1.2\">\n");
    for (label, set) in contours {
        let c = color.get(label.as_str()).copied().unwrap_or(NOMATCH_COLOR);
        for (level, lines) in set.levels.iter().zip(&set.polylines) {
            for line in lines {
                let pts: Vec<String> = line.iter().map(|&(x, y)| format!("{:.3},{:.3}", sx(x), sy(y))).collect();
                let _ = writeln!(
                    out,
                    "<polyline class=\"contour\" data-label=\"{}\" data-level=\"{level}\" stroke=\"{c}\" points=\"{}\"/>",
                    escape(label),
                    pts.join(" ")
                );
            }
        }
    }
    out.push_str("</g>\n");

    out.push_str("<g id=\"points\" stroke=\"#333333\" stroke-width=\"0.4\">\n");
    for p in &map.points {
        let label = p.labels[k].as_str();
        let _ = writeln!(
            out,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{}\" fill=\"{}\"><title>{} {}</title></circle>",
            sx(p.x),
            sy(p.y),
            style.radius,
            color[label],
            escape(&p.verse_id),
            escape(label)
        );
    }
    out.push_str("</g>\n");

    let lx = style.width - style.legend_width + 8.0;
    out.push_str("<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n");
    for (i, label) in labels.iter().enumerate() {
        let y = style.margin + 18.0 * i as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{lx}\" y=\"{y}\" width=\"12\" height=\"12\" fill=\"{}\"/><text x=\"{}\" y=\"{}\">{}</text>",
            color[label.as_str()],
            lx + 18.0,
            y + 10.0,
            escape(label)
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use typomap_core::MapPoint;

    fn map(labels: &[&str]) -> SemanticMap {
        SemanticMap {
            languages: vec!["hch".into()],
            points: labels
                .iter()
                .enumerate()
                .map(|(i, l)| MapPoint {
                    id: i,
                    verse_id: format!("v{i}"),
                    x: i as f64,
                    y: (i * i) as f64,
                    labels: vec![l.to_string()],
                })
                .collect(),
        }
    }

    #[test]
    fn three_points_no_contours() {
        let svg = render_svg(&map(&["a", "b", "a"]), "hch", &BTreeMap::new(), &SvgStyle::default()).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("<text").count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 0);
    }

    #[test]
    fn legend_lists_label_set_with_nomatch_last() {
        let m = map(&["ngram_2", "quepaucua", NOMATCH, "ngram_1", "quepaucua"]);
        assert_eq!(
            legend_labels(&m, 0, &BTreeMap::new()),
            ["ngram_1", "ngram_2", "quepaucua", NOMATCH]
        );
        let svg = render_svg(&m, "hch", &BTreeMap::new(), &SvgStyle::default()).unwrap();
        assert!(svg.contains(&format!("fill=\"{NOMATCH_COLOR}\"/><text x=\"646\" y=\"88\">NOMATCH</text>")));
    }

    #[test]
    fn contours_are_drawn_per_level() {
        let mut c = BTreeMap::new();
        c.insert(
            "a".to_string(),
            ContourSet {
                label: "a".into(),
                levels: vec![0.8, 0.9],
                polylines: vec![vec![vec![(0.0, 0.0), (1.0, 1.0)]], vec![vec![(0.5, 0.5), (0.6, 0.6), (0.5, 0.5)]]],
            },
        );
        let svg = render_svg(&map(&["a", "b", "a"]), "hch", &c, &SvgStyle::default()).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("data-level=\"0.9\""));
    }

    #[test]
    fn empty_map_and_unknown_language_fail() {
        assert!(render_svg(&map(&[]), "hch", &BTreeMap::new(), &SvgStyle::default()).is_err());
        assert!(render_svg(&map(&["a"]), "xxx", &BTreeMap::new(), &SvgStyle::default()).is_err());
    }

    #[test]
    fn escapes_markup() {
        let svg = render_svg(&map(&["a<b", "c&d", "e"]), "hch", &BTreeMap::new(), &SvgStyle::default()).unwrap();
        assert!(svg.contains("a&lt;b") && svg.contains("c&amp;d"));
        assert!(!svg.contains("a<b"));
    }

    #[test]
    fn byte_identical_on_repeat() {
        let m = map(&["a", "b", "a", "c"]);
        let a = render_svg(&m, "hch", &BTreeMap::new(), &SvgStyle::default()).unwrap();
        let b = render_svg(&m, "hch", &BTreeMap::new(), &SvgStyle::default()).unwrap();
        assert_eq!(a, b);
    }
}
