use std::collections::BTreeMap;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::{ObjectId, SpatialRelation};

/// The reference answers a deterministic oracle is checked against.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub true_relations: BTreeMap<(ObjectId, ObjectId), SpatialRelation>,
    pub true_scales: BTreeMap<ObjectId, f64>,
    pub true_positions: BTreeMap<ObjectId, [f64; 3]>,
    /// Per-axis length, meters, that a position error is measured against.
    pub reference_extent: BTreeMap<ObjectId, [f64; 3]>,
}

impl GroundTruth {
    pub fn relation(&self, subject: &ObjectId, target: &ObjectId) -> Option<SpatialRelation> {
        self.true_relations
            .get(&(subject.clone(), target.clone()))
            .copied()
    }

    pub fn with_relation(mut self, subject: &str, rel: SpatialRelation, target: &str) -> Self {
        self.true_relations
            .insert((subject.into(), target.into()), rel);
        self
    }

    /// True when `a` reaches `b` by following truth edges subject -> target.
    pub fn depends_on(&self, a: &ObjectId, b: &ObjectId) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        let mut stack = vec![a];
        while let Some(cur) = stack.pop() {
            for (s, t) in self.true_relations.keys() {
                if s == cur {
                    if t == b {
                        return true;
                    }
                    if seen.insert(t) {
                        stack.push(t);
                    }
                }
            }
        }
        false
    }

    /// Fills unit scale and a 1 m reference extent for any listed id that
    /// has none.
    pub fn with_defaults_for<'a>(mut self, ids: impl IntoIterator<Item = &'a ObjectId>) -> Self {
        for id in ids {
            self.true_scales.entry(id.clone()).or_insert(1.0);
            self.reference_extent.entry(id.clone()).or_insert([1.0; 3]);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Decode(m));
        for (s, t) in self.true_relations.keys() {
            if s == t {
                return bad(format!("truth relation from `{s}` to itself"));
            }
        }
        for (id, s) in &self.true_scales {
            if !(s.is_finite() && *s > 0.0) {
                return bad(format!("scale for `{id}` must be positive"));
            }
        }
        for (id, p) in &self.true_positions {
            if !p.iter().all(|v| v.is_finite()) {
                return bad(format!("position for `{id}` must be finite"));
            }
        }
        for (id, e) in &self.reference_extent {
            if !e.iter().all(|v| v.is_finite() && *v > 0.0) {
                return bad(format!("reference extent for `{id}` must be positive"));
            }
        }
        Ok(())
    }
}

fn ids<V>(m: BTreeMap<String, V>) -> BTreeMap<ObjectId, V> {
    m.into_iter().map(|(k, v)| (ObjectId::new(k), v)).collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthDoc {
    #[serde(default)]
    relations: Vec<(String, SpatialRelation, String)>,
    #[serde(default)]
    scales: BTreeMap<String, f64>,
    #[serde(default)]
    positions: BTreeMap<String, [f64; 3]>,
    #[serde(default)]
    reference_extent: BTreeMap<String, [f64; 3]>,
}

/// Reads a JSON truth table:
/// `{"relations": [[s, rel, t]], "scales": {id: s}, "positions": {id: [x,y,z]},
/// "reference_extent": {id: [x,y,z]}}`. Every section is optional.
pub fn decode_truth(text: &str) -> Result<GroundTruth> {
    let doc: TruthDoc = serde_json::from_str(text).map_err(|e| Error::Decode(e.to_string()))?;
    let mut truth = GroundTruth::default();
    for (s, r, t) in doc.relations {
        if truth
            .true_relations
            .insert((ObjectId::new(s.clone()), ObjectId::new(t.clone())), r)
            .is_some()
        {
            return Err(Error::Decode(format!("duplicate truth relation {s} -> {t}")));
        }
    }
    truth.true_scales = ids(doc.scales);
    truth.true_positions = ids(doc.positions);
    truth.reference_extent = ids(doc.reference_extent);
    truth.validate()?;
    Ok(truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_and_validates() {
        let t = decode_truth(
            r#"{"relations": [["cup","on","table"]], "scales": {"cup": 1.0},
                "reference_extent": {"table": [1.2, 0.6, 0.75]}}"#,
        )
        .unwrap();
        assert_eq!(t.relation(&"cup".into(), &"table".into()), Some(SpatialRelation::On));
        assert!(t.depends_on(&"cup".into(), &"table".into()));
        assert!(!t.depends_on(&"table".into(), &"cup".into()));
        assert!(decode_truth(r#"{"scales": {"cup": -1}}"#).is_err());
        assert!(decode_truth(r#"{"relations": [["a","beside","b"]]}"#).is_err());
        assert!(decode_truth(r#"{"relations": [["a","on","a"]]}"#).is_err());
        assert!(decode_truth(r#"{"extra": 1}"#).is_err());
        assert_eq!(decode_truth("{}").unwrap(), GroundTruth::default());
    }

    #[test]
    fn transitive_dependency() {
        let t = GroundTruth::default()
            .with_relation("cup", SpatialRelation::On, "book")
            .with_relation("book", SpatialRelation::On, "table");
        assert!(t.depends_on(&"cup".into(), &"table".into()));
    }
}
