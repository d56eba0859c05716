//! Chi-square association between the pivot and target-side units.
//!
//! Observations are [`Event`]s: one per target-side slot, flagged when the
//! slot is tied to the pivot. A unit is present in an event either when the
//! event's word equals it ([`Counting::Token`]) or contains it as a
//! contiguous run of scalar values ([`Counting::Substring`]).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use log::debug;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ContingencyTable {
    /// pivot present, unit present
    pub a: u64,
    /// pivot present, unit absent
    pub b: u64,
    /// pivot absent, unit present
    pub c: u64,
    /// pivot absent, unit absent
    pub d: u64,
}

impl ContingencyTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        ContingencyTable { a, b, c, d }
    }

    pub fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn has_zero_marginal(&self) -> bool {
        self.a + self.b == 0 || self.c + self.d == 0 || self.a + self.c == 0 || self.b + self.d == 0
    }

    /// True when the unit is over-represented among pivot events.
    pub fn is_positive(&self) -> bool {
        (self.a as u128) * (self.d as u128) > (self.b as u128) * (self.c as u128)
    }
}

/// Pearson chi-square (1 dof, no continuity correction) and its upper-tail
/// p-value.
pub fn chi_square(t: &ContingencyTable) -> Result<(f64, f64)> {
    if t.has_zero_marginal() {
        return Err(Error::ZeroMarginal([t.a, t.b, t.c, t.d]));
    }
    let (a, b, c, d) = (t.a as f64, t.b as f64, t.c as f64, t.d as f64);
    let n = a + b + c + d;
    // ad - bc is exact in i128 for any realistic count
    let diff = (t.a as i128) * (t.d as i128) - (t.b as i128) * (t.c as i128);
    let diff = diff as f64;
    let chi2 = n * diff * diff / ((a + b) * (c + d) * (a + c) * (b + d));
    Ok((chi2, chi2_sf(chi2)))
}

/// Survival function of the chi-square distribution with one degree of
/// freedom.
pub fn chi2_sf(chi2: f64) -> f64 {
    if chi2 <= 0.0 {
        return 1.0;
    }
    erfc((chi2 / 2.0).sqrt())
}

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Complementary error function for `x >= 0` (negative input reflects).
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

// erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n (2x^2)^n x / (2n+1)!!
// All terms are positive, so there is no cancellation inside the sum.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0u32;
    loop {
        n += 1;
        term *= 2.0 * x2 / f64::from(2 * n + 1);
        sum += term;
        if term < sum * 1e-17 || n > 500 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

// erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
// evaluated with the modified Lentz method.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..5000 {
        let a = f64::from(k) / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (std::f64::consts::PI.sqrt() * f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Counting {
    Token,
    Substring,
}

/// One observation slot. `word` is `None` for an unaligned slot, which
/// never contains any unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event<'a> {
    pub pivot: bool,
    pub word: Option<&'a str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationScore {
    pub unit: String,
    pub table: ContingencyTable,
    pub chi2: f64,
    pub p_value: f64,
    /// Equal to `table.a`.
    pub cooccurrence: u64,
}

/// Counts one unit directly from the events.
pub fn table_for(events: &[Event], unit: &str, counting: Counting) -> ContingencyTable {
    let mut t = ContingencyTable::default();
    for e in events {
        let present = match (e.word, counting) {
            (None, _) => false,
            (Some(w), Counting::Token) => w == unit,
            (Some(w), Counting::Substring) => w.contains(unit),
        };
        match (e.pivot, present) {
            (true, true) => t.a += 1,
            (true, false) => t.b += 1,
            (false, true) => t.c += 1,
            (false, false) => t.d += 1,
        }
    }
    t
}

fn substrings_within(word: &str, min_len: usize, max_len: usize) -> HashSet<&str> {
    let bounds: Vec<usize> = word.char_indices().map(|(i, _)| i).chain([word.len()]).collect();
    let nchars = bounds.len() - 1;
    let mut out = HashSet::new();
    for start in 0..nchars {
        for len in min_len..=max_len.min(nchars - start) {
            out.insert(&word[bounds[start]..bounds[start + len]]);
        }
    }
    out
}

/// Scores every unit against the events. Units with a zero marginal are
/// skipped; output follows the input unit order.
pub fn score_units(events: &[Event], units: &[String], counting: Counting) -> Vec<AssociationScore> {
    if units.is_empty() {
        return Vec::new();
    }
    // (pivot, non-pivot) occurrences per distinct word
    let mut by_word: HashMap<Option<&str>, (u64, u64)> = HashMap::new();
    let (mut n_pivot, mut n_other) = (0u64, 0u64);
    for e in events {
        let slot = by_word.entry(e.word).or_default();
        if e.pivot {
            slot.0 += 1;
            n_pivot += 1;
        } else {
            slot.1 += 1;
            n_other += 1;
        }
    }
    let mut present: HashMap<&str, (u64, u64)> = units.iter().map(|u| (u.as_str(), (0, 0))).collect();
    match counting {
        Counting::Token => {
            for (w, (p, o)) in &by_word {
                if let Some(slot) = w.and_then(|w| present.get_mut(w)) {
                    slot.0 += p;
                    slot.1 += o;
                }
            }
        }
        Counting::Substring => {
            let lens = units.iter().map(|u| u.chars().count());
            let min_len = lens.clone().min().unwrap_or(0);
            let max_len = lens.max().unwrap_or(0);
            for (w, (p, o)) in &by_word {
                let Some(w) = w else { continue };
                if min_len == 0 {
                    // the empty unit is contained in every word
                    if let Some(slot) = present.get_mut("") {
                        slot.0 += p;
                        slot.1 += o;
                    }
                }
                for sub in substrings_within(w, min_len.max(1), max_len) {
                    if let Some(slot) = present.get_mut(sub) {
                        slot.0 += p;
                        slot.1 += o;
                    }
                }
            }
        }
    }
    units
        .par_iter()
        .filter_map(|u| {
            let (a, c) = present[u.as_str()];
            let table = ContingencyTable::new(a, n_pivot - a, c, n_other - c);
            match chi_square(&table) {
                Ok((chi2, p_value)) => Some(AssociationScore {
                    unit: u.clone(),
                    table,
                    chi2,
                    p_value,
                    cooccurrence: a,
                }),
                Err(_) => {
                    debug!("skipping {u:?}: zero marginal in {table:?}");
                    None
                }
            }
        })
        .collect()
}

/// Tab-separated report with header `unit a b c d chi2 p`.
pub fn format_report(scores: &[AssociationScore]) -> String {
    let mut out = String::from("unit\ta\tb\tc\td\tchi2\tp\n");
    for s in scores {
        let t = &s.table;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{:e}\t{:e}",
            s.unit, t.a, t.b, t.c, t.d, s.chi2, s.p_value
        );
    }
    out
}

/// Units at the maximum chi2 (all of them, on ties).
pub fn top_scoring(scores: &[AssociationScore]) -> Vec<&AssociationScore> {
    let Some(max) = scores.iter().map(|s| s.chi2).reduce(f64::max) else {
        return Vec::new();
    };
    scores.iter().filter(|s| s.chi2 == max).collect()
}

/// Distinct words of the events, sorted.
pub fn distinct_words<'a>(events: &[Event<'a>]) -> Vec<&'a str> {
    let set: BTreeMap<&str, ()> = events.iter().filter_map(|e| e.word).map(|w| (w, ())).collect();
    set.into_keys().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Frozen from an independent arbitrary-precision evaluation of erfc(sqrt(10)).
    const P_CHI2_20: f64 = 7.744_216_431_044_084e-6;

    #[test]
    fn formula_examples() {
        let (chi2, p) = chi_square(&ContingencyTable::new(10, 0, 0, 10)).unwrap();
        assert_eq!(chi2, 20.0);
        assert!(((p - P_CHI2_20) / P_CHI2_20).abs() < 1e-12);
        let (chi2, p) = chi_square(&ContingencyTable::new(5, 5, 5, 5)).unwrap();
        assert_eq!(chi2, 0.0);
        assert_eq!(p, 1.0);
        assert!(matches!(
            chi_square(&ContingencyTable::new(10, 0, 10, 0)),
            Err(Error::ZeroMarginal(_))
        ));
    }

    #[test]
    fn erfc_reference_values() {
        // erfc at a few points, from tabulated high-precision values
        let cases = [
            (0.0, 1.0),
            (0.5, 0.479_500_122_186_953_5),
            (1.0, 0.157_299_207_050_285_13),
            (1.9, 0.007_209_570_764_742_532_5),
            (2.0, 0.004_677_734_981_047_266),
            (3.0, 2.209_049_699_858_544e-5),
            (5.0, 1.537_459_794_428_035e-12),
            (10.0, 2.088_487_583_762_545e-45),
        ];
        for (x, want) in cases {
            let got = erfc(x);
            assert!(((got - want) / want).abs() < 1e-12, "erfc({x}) = {got}, want {want}");
        }
        assert!((erfc(-1.0) - (2.0 - 0.157_299_207_050_285_13)).abs() < 1e-15);
    }

    #[test]
    fn p_value_shape() {
        assert_eq!(chi2_sf(0.0), 1.0);
        assert!(chi2_sf(40.0) < 1e-9);
        let mut prev = 1.0;
        for k in 1..=2000 {
            let p = chi2_sf(k as f64 * 0.1);
            assert!(p < prev, "not decreasing at {k}");
            prev = p;
        }
    }

    fn ev(pairs: &[(bool, Option<&'static str>)]) -> Vec<Event<'static>> {
        pairs.iter().map(|&(pivot, word)| Event { pivot, word }).collect()
    }

    #[test]
    fn token_counting_prefers_codistributed_unit() {
        let mut raw = Vec::new();
        for _ in 0..30 {
            raw.push((true, Some("quepaucua")));
        }
        for w in ["pai", "quepaucua", "nea", "xeme", "pai", "nea"] {
            for _ in 0..10 {
                raw.push((false, Some(w)));
            }
        }
        raw.push((true, None));
        let events = ev(&raw);
        let units: Vec<String> = distinct_words(&events).into_iter().map(String::from).collect();
        let scores = score_units(&events, &units, Counting::Token);
        let top = top_scoring(&scores);
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].unit, "quepaucua");
        // brute force over every candidate
        for s in &scores {
            let (c, _) = chi_square(&table_for(&events, &s.unit, Counting::Token)).unwrap();
            assert!(c <= top[0].chi2);
        }
    }

    #[test]
    fn missing_unit_skipped() {
        let events = ev(&[(true, Some("a")), (false, Some("b"))]);
        let scores = score_units(&events, &["zz".to_string(), "a".to_string()], Counting::Token);
        assert_eq!(scores.len(), 1);
        assert_eq!(scores[0].unit, "a");
        assert!(score_units(&events, &[], Counting::Token).is_empty());
    }

    #[test]
    fn substring_containment() {
        let events = ev(&[(true, Some("axüacu")), (false, Some("pai"))]);
        let s = score_units(&events, &["cu".to_string(), "üa".to_string()], Counting::Substring);
        assert_eq!(s[0].table, ContingencyTable::new(1, 0, 0, 1));
        assert_eq!(s[1].table, ContingencyTable::new(1, 0, 0, 1));
    }

    #[test]
    fn report_has_header_and_rows() {
        let events = ev(&[(true, Some("a")), (false, Some("b"))]);
        let r = format_report(&score_units(&events, &["a".to_string()], Counting::Token));
        let lines: Vec<_> = r.lines().collect();
        assert_eq!(lines[0], "unit\ta\tb\tc\td\tchi2\tp");
        assert!(lines[1].starts_with("a\t1\t0\t0\t1\t"));
    }

    fn table() -> impl Strategy<Value = ContingencyTable> {
        (1u64..500, 0u64..500, 0u64..500, 1u64..500).prop_map(|(a, b, c, d)| ContingencyTable::new(a, b, c, d))
    }

    proptest! {
        #[test]
        fn swap_invariance(t in table()) {
            let (x, _) = chi_square(&t).unwrap();
            let (y, _) = chi_square(&ContingencyTable::new(t.d, t.c, t.b, t.a)).unwrap();
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
        }

        #[test]
        fn scaling_is_linear(t in table(), k in 2u64..10) {
            let (x, _) = chi_square(&t).unwrap();
            let (y, _) = chi_square(&ContingencyTable::new(t.a * k, t.b * k, t.c * k, t.d * k)).unwrap();
            prop_assert!((y - k as f64 * x).abs() <= 1e-9 * y.max(1.0));
        }

        #[test]
        fn agrees_with_brute_force(
            raw in proptest::collection::vec((any::<bool>(), proptest::option::of("[abc]{1,4}")), 1..300),
            units in proptest::collection::vec("[abc]{1,3}", 1..8),
            substring in any::<bool>(),
        ) {
            let events: Vec<Event> = raw.iter().map(|(p, w)| Event { pivot: *p, word: w.as_deref() }).collect();
            let counting = if substring { Counting::Substring } else { Counting::Token };
            let scores = score_units(&events, &units, counting);
            let mut k = 0;
            for u in &units {
                let t = table_for(&events, u, counting);
                if let Ok((chi2, p)) = chi_square(&t) {
                    let s = &scores[k];
                    k += 1;
                    prop_assert_eq!(&s.unit, u);
                    prop_assert_eq!(s.table, t);
                    prop_assert!((s.chi2 - chi2).abs() <= 1e-9 * chi2.max(1.0));
                    prop_assert!((s.p_value - p).abs() <= 1e-12);
                }
            }
            prop_assert_eq!(k, scores.len());
        }
    }
}
