//! Articulatory feature vectors, the feature-weighted edit distance between
//! segment strings, and mean-pooled string embeddings.

use std::collections::HashMap;
use std::sync::OnceLock;

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::data::{self, DataError};
use crate::ipa::{Inventory, IpaSegment, IpaString, SymbolClass};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("no feature row for segment {0:?}")]
    UnknownSegment(String),
    #[error("both strings are empty")]
    BothEmpty,
    #[error("cannot embed an empty string")]
    EmptyString,
    #[error("invalid distance parameters: {0}")]
    InvalidParams(String),
}

/// Ternary articulatory feature values, one entry per feature.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureVector(Vec<i8>);

impl FeatureVector {
    pub fn new(values: Vec<i8>) -> Option<Self> {
        values
            .iter()
            .all(|v| (-1..=1).contains(v))
            .then_some(FeatureVector(values))
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of features whose values differ.
    pub fn disagreements(&self, other: &FeatureVector) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

/// Diacritics with a modelled effect on the base row.
const VOICELESS_MARKS: [char; 2] = ['\u{0325}', '\u{030A}'];
const VOICED_MARK: char = '\u{032C}';
const NASAL_MARK: char = '\u{0303}';
const LONG_MARK: char = 'ː';

#[derive(Debug, Clone)]
pub struct FeatureTable {
    names: Vec<String>,
    rows: HashMap<String, FeatureVector>,
    voice: Option<usize>,
    nasal: Option<usize>,
    long: Option<usize>,
    cont: Option<usize>,
    delrel: Option<usize>,
}

/// Feature lookup result. `unmodeled` lists diacritics that were ignored
/// because no modification rule exists for them.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeatures {
    pub vector: FeatureVector,
    pub exact: bool,
    pub unmodeled: Vec<char>,
}

fn parse_value(s: &str) -> Option<i8> {
    match s.trim() {
        "+" => Some(1),
        "0" => Some(0),
        "-" | "\u{2212}" => Some(-1),
        _ => None,
    }
}

impl FeatureTable {
    pub fn from_tsv(text: &str, source_name: &str) -> Result<Self, DataError> {
        let mut records = data::records(text);
        let header = records
            .next()
            .ok_or_else(|| DataError::malformed(source_name, 0, "missing header row"))?;
        if header.fields.len() < 2 {
            return Err(DataError::malformed(
                source_name,
                header.line,
                "header has no features",
            ));
        }
        let names: Vec<String> = header.fields[1..]
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = HashMap::new();
        for rec in records {
            if rec.fields.len() != names.len() + 1 {
                return Err(DataError::malformed(
                    source_name,
                    rec.line,
                    format!("expected {} feature values", names.len()),
                ));
            }
            let values = rec.fields[1..]
                .iter()
                .map(|v| parse_value(v))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| {
                    DataError::malformed(source_name, rec.line, "values must be +, 0 or -")
                })?;
            let key: String = rec.fields[0].nfc().collect();
            rows.insert(key, FeatureVector(values));
        }
        let find = |n: &str| names.iter().position(|x| x == n);
        Ok(FeatureTable {
            voice: find("voi"),
            nasal: find("nas"),
            long: find("long"),
            cont: find("cont"),
            delrel: find("delrel"),
            names,
            rows,
        })
    }

    pub fn builtin() -> &'static FeatureTable {
        static TABLE: OnceLock<FeatureTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            FeatureTable::from_tsv(data::FEATURE_TABLE, "features.tsv")
                .expect("builtin feature table parses")
        })
    }

    pub fn dims(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, segment: &str) -> Option<&FeatureVector> {
        self.rows.get(segment)
    }

    /// Row for a base, deriving tie-barred sequences missing from the table
    /// from their last component: stop closure with delayed release.
    fn base_row(&self, base: &str) -> Option<FeatureVector> {
        if let Some(v) = self.rows.get(base) {
            return Some(v.clone());
        }
        let last = base.rsplit(['\u{0361}', '\u{035C}']).next()?;
        if last == base {
            return None;
        }
        let mut v = self.rows.get(last)?.clone();
        if let Some(i) = self.cont {
            v.0[i] = -1;
        }
        if let Some(i) = self.delrel {
            v.0[i] = 1;
        }
        Some(v)
    }

    pub fn segment_features(
        &self,
        seg: &IpaSegment,
        inventory: &Inventory,
    ) -> Result<SegmentFeatures, FeatureError> {
        let key = seg.without_tones(inventory);
        let long = seg.diacritics().contains(&LONG_MARK);
        if let Some(v) = self.rows.get(&key) {
            let mut vector = v.clone();
            if long {
                set(&mut vector, self.long, 1);
            }
            return Ok(SegmentFeatures {
                vector,
                exact: !long,
                unmodeled: Vec::new(),
            });
        }
        let mut vector = self
            .base_row(seg.base())
            .ok_or_else(|| FeatureError::UnknownSegment(seg.source().to_string()))?;
        let mut unmodeled = Vec::new();
        for &mark in seg.diacritics() {
            match mark {
                m if VOICELESS_MARKS.contains(&m) => set(&mut vector, self.voice, -1),
                VOICED_MARK => set(&mut vector, self.voice, 1),
                NASAL_MARK => set(&mut vector, self.nasal, 1),
                LONG_MARK => set(&mut vector, self.long, 1),
                m if inventory.class_of(m) == Some(SymbolClass::Prosodic) => {}
                m => unmodeled.push(m),
            }
        }
        Ok(SegmentFeatures {
            vector,
            exact: false,
            unmodeled,
        })
    }

    /// Feature vectors of every segment of `s`.
    pub fn vectors(
        &self,
        s: &IpaString,
        inventory: &Inventory,
    ) -> Result<Vec<FeatureVector>, FeatureError> {
        s.segments()
            .iter()
            .map(|seg| self.segment_features(seg, inventory).map(|f| f.vector))
            .collect()
    }
}

fn set(v: &mut FeatureVector, index: Option<usize>, value: i8) {
    if let Some(i) = index {
        v.0[i] = value;
    }
}

/// Costs for the feature edit distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceParams {
    pub insert_cost: f64,
    pub delete_cost: f64,
    /// Cost of substituting two segments that disagree on every feature.
    pub sub_scale: f64,
    pub threshold: f64,
}

impl Default for DistanceParams {
    fn default() -> Self {
        DistanceParams {
            insert_cost: 1.0,
            delete_cost: 1.0,
            sub_scale: 1.0,
            threshold: 5.0,
        }
    }
}

impl DistanceParams {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |m: &str| Err(FeatureError::InvalidParams(m.to_string()));
        if !(self.insert_cost > 0.0 && self.delete_cost > 0.0) {
            return bad("insert and delete costs must be positive");
        }
        if self.insert_cost != self.delete_cost {
            return bad("insert and delete costs must be equal");
        }
        if !(self.sub_scale >= 0.0 && self.sub_scale <= self.insert_cost + self.delete_cost) {
            return bad("sub_scale must lie in [0, insert + delete]");
        }
        if self.threshold.is_nan() || self.threshold < 0.0 {
            return bad("threshold must be non-negative");
        }
        Ok(())
    }

    pub fn max_unit_cost(&self) -> f64 {
        self.insert_cost.max(self.delete_cost).max(self.sub_scale)
    }
}

/// Substitution cost between two feature vectors.
pub fn substitution_cost(a: &FeatureVector, b: &FeatureVector, params: &DistanceParams) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.disagreements(b) as f64 / a.len() as f64 * params.sub_scale
}

/// Edit distance over precomputed segment vectors.
pub fn edit_distance_vectors(
    a: &[FeatureVector],
    b: &[FeatureVector],
    params: &DistanceParams,
) -> f64 {
    let mut prev: Vec<f64> = (0..=b.len())
        .map(|j| j as f64 * params.insert_cost)
        .collect();
    let mut cur = vec![0.0; b.len() + 1];
    for (i, va) in a.iter().enumerate() {
        cur[0] = (i + 1) as f64 * params.delete_cost;
        for (j, vb) in b.iter().enumerate() {
            let sub = prev[j] + substitution_cost(va, vb, params);
            let del = prev[j + 1] + params.delete_cost;
            let ins = cur[j] + params.insert_cost;
            cur[j + 1] = sub.min(del).min(ins);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn feature_edit_distance(
    a: &IpaString,
    b: &IpaString,
    table: &FeatureTable,
    params: &DistanceParams,
) -> Result<f64, FeatureError> {
    let inventory = Inventory::builtin();
    let va = table.vectors(a, inventory)?;
    let vb = table.vectors(b, inventory)?;
    Ok(edit_distance_vectors(&va, &vb, params))
}

/// Distance scaled into [0, 1] by the cost of the worst possible alignment.
pub fn normalized_feature_distance(
    a: &IpaString,
    b: &IpaString,
    table: &FeatureTable,
    params: &DistanceParams,
) -> Result<f64, FeatureError> {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return Err(FeatureError::BothEmpty);
    }
    let d = feature_edit_distance(a, b, table, params)?;
    Ok(d / (longest as f64 * params.max_unit_cost()))
}

/// Mean of the segment feature vectors: a fixed-dimension, order-insensitive
/// embedding.
pub fn string_embedding(s: &IpaString, table: &FeatureTable) -> Result<Vec<f64>, FeatureError> {
    if s.is_empty() {
        return Err(FeatureError::EmptyString);
    }
    let vectors = table.vectors(s, Inventory::builtin())?;
    Ok(mean_pool(&vectors, table.dims()))
}

pub fn mean_pool(vectors: &[FeatureVector], dims: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dims];
    for v in vectors {
        for (acc, x) in sum.iter_mut().zip(v.values()) {
            *acc += f64::from(*x);
        }
    }
    let n = vectors.len().max(1) as f64;
    sum.iter().map(|x| x / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ipa(s: &str) -> IpaString {
        IpaString::parse(s).unwrap()
    }

    fn table() -> &'static FeatureTable {
        FeatureTable::builtin()
    }

    fn dist(a: &str, b: &str) -> f64 {
        feature_edit_distance(&ipa(a), &ipa(b), table(), &DistanceParams::default()).unwrap()
    }

    fn lookup(s: &str) -> SegmentFeatures {
        let s = ipa(s);
        table()
            .segment_features(&s.segments()[0], Inventory::builtin())
            .unwrap()
    }

    #[test]
    fn every_inventory_base_has_a_row() {
        let missing: Vec<&str> = Inventory::builtin()
            .bases()
            .filter(|b| table().row(b).is_none())
            .collect();
        assert!(missing.is_empty(), "{missing:?}");
        assert_eq!(table().dims(), 24);
    }

    #[test]
    fn direct_lookup_and_determinism() {
        let p = lookup("p");
        assert!(p.exact);
        assert_eq!(&p.vector, table().row("p").unwrap());
        assert_eq!(lookup("p"), lookup("p"));
    }

    #[test]
    fn voiceless_ring_forces_voicing_off() {
        let f = lookup("b̥");
        let voi = table().names().iter().position(|n| n == "voi").unwrap();
        let mut expected = table().row("b").unwrap().values().to_vec();
        expected[voi] = -1;
        assert_eq!(f.vector.values(), &expected[..]);
        assert!(f.unmodeled.is_empty());
        // already voiceless: the rule is a no-op on p
        assert_eq!(lookup("p̥").vector, *table().row("p").unwrap());
    }

    #[test]
    fn nasal_and_length_modifications() {
        let nas = table().names().iter().position(|n| n == "nas").unwrap();
        let long = table().names().iter().position(|n| n == "long").unwrap();
        assert_eq!(lookup("ã").vector.values()[nas], 1);
        assert_eq!(lookup("aː").vector.values()[long], 1);
    }

    #[test]
    fn unmodeled_diacritic_falls_back_with_warning() {
        let f = lookup("pʰ");
        assert_eq!(f.vector, *table().row("p").unwrap());
        assert_eq!(f.unmodeled, vec!['ʰ']);
    }

    #[test]
    fn exact_rows_for_marked_segments() {
        assert!(lookup("d̪").exact);
        assert_eq!(lookup("t͡ʃ").vector, *table().row("t͡ʃ").unwrap());
    }

    #[test]
    fn tied_sequences_outside_the_table_are_derived() {
        let f = lookup("k͡ʃ");
        assert!(!f.exact);
        assert_ne!(f.vector, *table().row("ʃ").unwrap());
    }

    #[test]
    fn unknown_segment_errors() {
        let custom = FeatureTable::from_tsv("segment\tvoi\np\t-\n", "t").unwrap();
        let s = ipa("b");
        assert_eq!(
            custom.segment_features(&s.segments()[0], Inventory::builtin()),
            Err(FeatureError::UnknownSegment("b".into()))
        );
    }

    #[test]
    fn distance_examples() {
        assert_eq!(dist("kat", "kat"), 0.0);
        assert_eq!(dist("kat", ""), 3.0);
        assert!(dist("pa", "ba") < dist("pa", "sa"));
    }

    #[test]
    fn p_b_and_p_s_disagreement_counts() {
        let p = table().row("p").unwrap();
        assert_eq!(p.disagreements(table().row("b").unwrap()), 1);
        assert!(p.disagreements(table().row("s").unwrap()) > 1);
    }

    #[test]
    fn normalized_examples() {
        let params = DistanceParams::default();
        let n = |a: &str, b: &str| normalized_feature_distance(&ipa(a), &ipa(b), table(), &params);
        assert_eq!(n("kat", "kat"), Ok(0.0));
        assert_eq!(n("a", ""), Ok(1.0));
        assert_eq!(n("", ""), Err(FeatureError::BothEmpty));
    }

    #[test]
    fn params_validation() {
        assert!(DistanceParams::default().validate().is_ok());
        let lopsided = DistanceParams {
            insert_cost: 1.0,
            delete_cost: 2.0,
            ..Default::default()
        };
        assert!(lopsided.validate().is_err());
        let heavy = DistanceParams {
            sub_scale: 3.0,
            ..Default::default()
        };
        assert!(heavy.validate().is_err());
    }

    #[test]
    fn embedding_examples() {
        let e = string_embedding(&ipa("p"), table()).unwrap();
        let row: Vec<f64> = table()
            .row("p")
            .unwrap()
            .values()
            .iter()
            .map(|v| f64::from(*v))
            .collect();
        assert_eq!(e, row);
        assert_eq!(
            string_embedding(&ipa("pa"), table()).unwrap(),
            string_embedding(&ipa("ap"), table()).unwrap()
        );
        assert_eq!(
            string_embedding(&ipa(""), table()),
            Err(FeatureError::EmptyString)
        );
    }

    fn alphabet() -> Vec<&'static str> {
        vec!["p", "b", "t", "d", "k", "s", "m", "a", "i", "u"]
    }

    fn word(max: usize) -> impl Strategy<Value = String> {
        proptest::collection::vec(proptest::sample::select(alphabet()), 0..=max)
            .prop_map(|v| v.concat())
    }

    proptest! {
        #[test]
        fn symmetric(a in word(6), b in word(6)) {
            prop_assert_eq!(dist(&a, &b), dist(&b, &a));
        }

        #[test]
        fn triangle_inequality(a in word(5), b in word(5), c in word(5)) {
            prop_assert!(dist(&a, &c) <= dist(&a, &b) + dist(&b, &c) + 1e-12);
        }

        #[test]
        fn appending_a_shared_segment_never_increases(a in word(5), b in word(5), x in proptest::sample::select(alphabet())) {
            let ax = format!("{a}{x}");
            let bx = format!("{b}{x}");
            prop_assert!(dist(&ax, &bx) <= dist(&a, &b) + 1e-12);
        }

        #[test]
        fn normalized_stays_in_unit_interval(a in word(6), b in word(6)) {
            prop_assume!(!(a.is_empty() && b.is_empty()));
            let v = normalized_feature_distance(&ipa(&a), &ipa(&b), table(), &DistanceParams::default()).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn embedding_entries_bounded(a in word(8)) {
            prop_assume!(!a.is_empty());
            let e = string_embedding(&ipa(&a), table()).unwrap();
            prop_assert_eq!(e.len(), table().dims());
            prop_assert!(e.iter().all(|x| (-1.0..=1.0).contains(x)));
        }
    }
}
