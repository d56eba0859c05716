//! Geographic selection of language varieties by polygon membership.
//!
//! Coordinates are treated as planar (lon, lat) pairs and membership uses
//! the even-odd rule. Points lying exactly on an edge are inside.

use std::path::Path;

use log::warn;
use serde_json::Value;

use crate::corpus::LanguageMeta;
use crate::error::{read_to_string, Error, Result};

/// A closed ring; the first vertex is repeated at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring(pub Vec<(f64, f64)>);

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub outer: Ring,
    pub holes: Vec<Ring>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Region {
    pub polygons: Vec<Polygon>,
}

impl Ring {
    /// Validates and closes a vertex list.
    pub fn new(mut vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Geometry("non-finite ring vertex".into()));
        }
        let mut distinct: Vec<(f64, f64)> = Vec::new();
        for v in &vertices {
            if !distinct.contains(v) {
                distinct.push(*v);
            }
        }
        if distinct.len() < 3 {
            return Err(Error::Geometry(format!(
                "ring has {} distinct vertices, need at least 3",
                distinct.len()
            )));
        }
        if vertices.first() != vertices.last() {
            warn!("unclosed ring; closing it");
            vertices.push(vertices[0]);
        }
        Ok(Ring(vertices))
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.0
    }

    fn edges(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }
}

fn on_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> bool {
    let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    let scale = (b.0 - a.0).abs().max((b.1 - a.1).abs()).max(1.0);
    if cross.abs() > 1e-12 * scale * scale {
        return false;
    }
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

// Number of ring edges crossed by a ray from `p` towards +x.
fn crossings(ring: &Ring, p: (f64, f64)) -> usize {
    ring.edges()
        .filter(|&(a, b)| {
            if (a.1 > p.1) == (b.1 > p.1) {
                return false;
            }
            let x = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
            p.0 < x
        })
        .count()
}

impl Polygon {
    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        let p = (lon, lat);
        if self.rings().any(|r| r.edges().any(|(a, b)| on_segment(p, a, b))) {
            return true;
        }
        self.rings().map(|r| crossings(r, p)).sum::<usize>() % 2 == 1
    }
}

impl Region {
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        self.polygons.iter().any(|poly| poly.contains(lon, lat))
    }
}

pub fn contains(region: &Region, lon: f64, lat: f64) -> bool {
    region.contains(lon, lat)
}

/// Order-preserving subset of `metas` whose coordinates fall in `region`.
pub fn filter_languages(metas: &[LanguageMeta], region: &Region) -> Vec<LanguageMeta> {
    metas
        .iter()
        .filter(|m| region.contains(m.lon, m.lat))
        .cloned()
        .collect()
}

fn parse_position(v: &Value) -> Result<(f64, f64)> {
    let arr = v
        .as_array()
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| Error::Geometry("position must be an array of at least 2 numbers".into()))?;
    let num = |x: &Value| {
        x.as_f64()
            .ok_or_else(|| Error::Geometry("position coordinate is not a number".into()))
    };
    Ok((num(&arr[0])?, num(&arr[1])?))
}

fn parse_polygon(coords: &Value) -> Result<Polygon> {
    let rings = coords
        .as_array()
        .filter(|r| !r.is_empty())
        .ok_or_else(|| Error::Geometry("polygon needs at least one ring".into()))?;
    let mut parsed = Vec::with_capacity(rings.len());
    for ring in rings {
        let pts = ring
            .as_array()
            .ok_or_else(|| Error::Geometry("ring must be an array of positions".into()))?
            .iter()
            .map(parse_position)
            .collect::<Result<Vec<_>>>()?;
        parsed.push(Ring::new(pts)?);
    }
    let outer = parsed.remove(0);
    Ok(Polygon { outer, holes: parsed })
}

fn collect_geometry(geom: &Value, out: &mut Vec<Polygon>) -> Result<()> {
    let kind = geom
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Geometry("geometry without a type".into()))?;
    let coords = || {
        geom.get("coordinates")
            .ok_or_else(|| Error::Geometry(format!("{kind} without coordinates")))
    };
    match kind {
        "Polygon" => out.push(parse_polygon(coords()?)?),
        "MultiPolygon" => {
            let polys = coords()?
                .as_array()
                .ok_or_else(|| Error::Geometry("MultiPolygon coordinates must be an array".into()))?;
            for p in polys {
                out.push(parse_polygon(p)?);
            }
        }
        "GeometryCollection" => {
            let geoms = geom
                .get("geometries")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Geometry("GeometryCollection without geometries".into()))?;
            for g in geoms {
                collect_geometry(g, out)?;
            }
        }
        "Feature" => {
            let g = geom
                .get("geometry")
                .filter(|g| !g.is_null())
                .ok_or_else(|| Error::Geometry("Feature without geometry".into()))?;
            collect_geometry(g, out)?;
        }
        "FeatureCollection" => {
            let feats = geom
                .get("features")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Geometry("FeatureCollection without features".into()))?;
            for f in feats {
                collect_geometry(f, out)?;
            }
        }
        other => {
            return Err(Error::Geometry(format!(
                "unsupported geometry type {other}; only Polygon and MultiPolygon are accepted"
            )))
        }
    }
    Ok(())
}

pub fn parse_region(text: &str) -> Result<Region> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::Geometry(format!("invalid GeoJSON: {e}")))?;
    let mut polygons = Vec::new();
    collect_geometry(&value, &mut polygons)?;
    if polygons.is_empty() {
        return Err(Error::Geometry("no polygons in GeoJSON".into()));
    }
    Ok(Region { polygons })
}

pub fn load_region(path: &Path) -> Result<Region> {
    parse_region(&read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const UNIT: &str = r#"{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}"#;

    fn square_with_hole() -> Region {
        parse_region(
            r#"{"type":"Polygon","coordinates":[
                [[0,0],[4,0],[4,4],[0,4],[0,0]],
                [[1,1],[3,1],[3,3],[1,3],[1,1]]]}"#,
        )
        .unwrap()
    }

    #[test]
    fn loads_unit_square() {
        let r = parse_region(UNIT).unwrap();
        assert_eq!(r.polygons.len(), 1);
        assert!(r.polygons[0].holes.is_empty());
        assert_eq!(r.polygons[0].outer.vertices().len(), 5);
    }

    #[test]
    fn multipolygon_and_feature_collection() {
        let r = parse_region(
            r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{},
              "geometry":{"type":"MultiPolygon","coordinates":[
                [[[0,0],[1,0],[1,1],[0,1],[0,0]]],
                [[[5,5],[6,5],[6,6],[5,6],[5,5]]]]}}]}"#,
        )
        .unwrap();
        assert_eq!(r.polygons.len(), 2);
        assert!(r.contains(5.5, 5.5));
        assert!(!r.contains(3.0, 3.0));
    }

    #[test]
    fn point_geometry_rejected() {
        let err = parse_region(r#"{"type":"Point","coordinates":[0,0]}"#).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn unclosed_ring_is_closed() {
        let r = parse_region(r#"{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1]]]}"#).unwrap();
        let v = r.polygons[0].outer.vertices();
        assert_eq!(v.len(), 5);
        assert_eq!(v[0], v[4]);
    }

    #[test]
    fn degenerate_ring_rejected() {
        assert!(parse_region(r#"{"type":"Polygon","coordinates":[[[0,0],[1,0],[0,0]]]}"#).is_err());
    }

    #[test]
    fn unit_square_membership() {
        let r = parse_region(UNIT).unwrap();
        assert!(contains(&r, 0.5, 0.5));
        assert!(!contains(&r, 1.5, 0.5));
        // edges and corners count as inside
        assert!(contains(&r, 1.0, 0.5));
        assert!(contains(&r, 0.0, 0.0));
        assert!(contains(&r, 0.5, 1.0));
    }

    #[test]
    fn hole_is_outside() {
        // Ray from (2,2) to +x crosses the hole edge x=3 and the outer edge x=4:
        // two crossings, even, so outside.
        let r = square_with_hole();
        assert!(!r.contains(2.0, 2.0));
        // (0.5,2): crosses x=1, x=3, x=4 -> three crossings, inside.
        assert!(r.contains(0.5, 2.0));
        assert!(r.contains(3.5, 3.5));
        // hole boundary belongs to the region
        assert!(r.contains(1.0, 2.0));
    }

    #[test]
    fn filter_examples() {
        let r = parse_region(UNIT).unwrap();
        let m = |c: &str, lon, lat| LanguageMeta::new(c, c, lon, lat).unwrap();
        let metas = vec![m("a", 0.2, 0.2), m("b", 2.0, 2.0), m("c", 0.9, 0.1)];
        let kept: Vec<_> = filter_languages(&metas, &r).into_iter().map(|m| m.code).collect();
        assert_eq!(kept, vec!["a", "c"]);
        assert!(filter_languages(&metas, &Region::default()).is_empty());
        let inside = vec![m("a", 0.2, 0.2), m("c", 0.9, 0.1)];
        assert_eq!(filter_languages(&inside, &r), inside);
    }

    fn convex_polygon(n: usize, cx: f64, cy: f64, radii: &[f64]) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                let r = radii[k % radii.len()];
                (cx + r * t.cos(), cy + r * t.sin())
            })
            .collect()
    }

    proptest! {
        #[test]
        fn centroid_of_convex_polygon_inside(
            n in 3usize..12, cx in -100.0f64..100.0, cy in -60.0f64..60.0, r in 0.5f64..20.0
        ) {
            // regular polygons are convex
            let pts = convex_polygon(n, cx, cy, &[r]);
            let centroid = (
                pts.iter().map(|p| p.0).sum::<f64>() / n as f64,
                pts.iter().map(|p| p.1).sum::<f64>() / n as f64,
            );
            let poly = Polygon { outer: Ring::new(pts).unwrap(), holes: vec![] };
            prop_assert!(poly.contains(centroid.0, centroid.1));
        }

        #[test]
        fn rotation_invariant(
            n in 3usize..10, radii in proptest::collection::vec(1.0f64..5.0, 1..5),
            shift in 0usize..10, px in -6.0f64..6.0, py in -6.0f64..6.0
        ) {
            let pts = convex_polygon(n, 0.0, 0.0, &radii);
            let mut rotated = pts.clone();
            rotated.rotate_left(shift % n);
            let a = Polygon { outer: Ring::new(pts).unwrap(), holes: vec![] };
            let b = Polygon { outer: Ring::new(rotated).unwrap(), holes: vec![] };
            prop_assert_eq!(a.contains(px, py), b.contains(px, py));
        }

        #[test]
        fn filter_partitions(points in proptest::collection::vec((-2.0f64..3.0, -2.0f64..3.0), 0..30)) {
            let r = parse_region(UNIT).unwrap();
            let metas: Vec<_> = points.iter().enumerate()
                .map(|(i, (x, y))| LanguageMeta::new(format!("l{i}"), "n", *x, *y).unwrap())
                .collect();
            let kept = filter_languages(&metas, &r);
            let rest: Vec<_> = metas.iter().filter(|m| !r.contains(m.lon, m.lat)).cloned().collect();
            prop_assert_eq!(kept.len() + rest.len(), metas.len());
            for m in &metas {
                prop_assert!(kept.contains(m) != rest.contains(m));
            }
        }
    }
}
