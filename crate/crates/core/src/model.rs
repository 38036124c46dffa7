//! Shared domain types.
//!
//! Everything here is immutable after construction. Types whose invariants
//! cannot be expressed by the type system alone (scores in `[0, 1]`, the
//! retention conjunction) validate on construction and on deserialization.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Embedding dimension produced by the reference encoder.
pub const DEFAULT_EMBEDDING_DIM: usize = 4096;

/// One document: the unit of analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

impl DocumentRecord {
    pub fn new(doc_id: impl Into<String>, title: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            title: title.into(),
            description: description.into(),
            published_at: None,
            lang: None,
        }
    }

    /// Text sent to the encoder and to the scorer: title, newline, description.
    pub fn embedding_text(&self) -> String {
        format!("{}\n{}", self.title, self.description)
    }

    pub fn is_empty_text(&self) -> bool {
        self.title.trim().is_empty() && self.description.trim().is_empty()
    }
}

/// Outcome of [`validate_corpus`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub count: usize,
    /// Ids that occur more than once, each listed once, in first-seen order.
    pub duplicates: Vec<String>,
    /// Ids of records whose title and description are both empty.
    pub empty: Vec<String>,
    /// Line/position indices of records with an empty `doc_id`.
    pub missing_ids: Vec<usize>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.duplicates.is_empty() && self.empty.is_empty() && self.missing_ids.is_empty()
    }
}

/// Checks corpus-level invariants and reports every violation.
pub fn validate_corpus(records: &[DocumentRecord]) -> ValidationReport {
    let mut seen = HashSet::new();
    let mut dup_seen = HashSet::new();
    let mut report = ValidationReport {
        count: records.len(),
        ..Default::default()
    };
    for (pos, rec) in records.iter().enumerate() {
        if rec.doc_id.is_empty() {
            report.missing_ids.push(pos);
            continue;
        }
        if !seen.insert(rec.doc_id.as_str()) && dup_seen.insert(rec.doc_id.as_str()) {
            report.duplicates.push(rec.doc_id.clone());
        }
        if rec.is_empty_text() {
            report.empty.push(rec.doc_id.clone());
        }
    }
    report
}

/// Full-dimension document embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEmbedding")]
pub struct EmbeddingVector {
    doc_id: String,
    values: Vec<f32>,
    #[serde(skip_serializing)]
    norm: f32,
}

#[derive(Deserialize)]
struct RawEmbedding {
    doc_id: String,
    values: Vec<f32>,
}

impl TryFrom<RawEmbedding> for EmbeddingVector {
    type Error = Error;
    fn try_from(raw: RawEmbedding) -> Result<Self> {
        EmbeddingVector::new(raw.doc_id, raw.values)
    }
}

impl EmbeddingVector {
    pub fn new(doc_id: impl Into<String>, values: Vec<f32>) -> Result<Self> {
        let doc_id = doc_id.into();
        if values.is_empty() {
            return Err(Error::Data(format!("embedding for {doc_id} is empty")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "embedding for {doc_id} has a non-finite entry at {pos}"
            )));
        }
        let norm = values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt() as f32;
        Ok(Self {
            doc_id,
            values,
            norm,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f32 {
        self.norm
    }
}

/// A document's coordinates on the 5D structural manifold and the 2D map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProjected")]
pub struct ProjectedPoint {
    doc_id: String,
    z5: [f64; 5],
    y2: [f64; 2],
}

#[derive(Deserialize)]
struct RawProjected {
    doc_id: String,
    z5: [f64; 5],
    y2: [f64; 2],
}

impl TryFrom<RawProjected> for ProjectedPoint {
    type Error = Error;
    fn try_from(raw: RawProjected) -> Result<Self> {
        ProjectedPoint::new(raw.doc_id, raw.z5, raw.y2)
    }
}

impl ProjectedPoint {
    pub fn new(doc_id: impl Into<String>, z5: [f64; 5], y2: [f64; 2]) -> Result<Self> {
        let doc_id = doc_id.into();
        if z5.iter().chain(y2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("projection for {doc_id} is not finite")));
        }
        Ok(Self { doc_id, z5, y2 })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn z5(&self) -> &[f64; 5] {
        &self.z5
    }

    pub fn y2(&self) -> &[f64; 2] {
        &self.y2
    }
}

/// One axis of the positional dictionary: an ordered pole pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticDimension {
    pub dim_id: String,
    pub name: String,
    pub low_pole: String,
    pub high_pole: String,
    /// Display names for the four quartile bands, lowest first.
    pub band_names: [String; 4],
}

impl SemanticDimension {
    pub fn new(
        dim_id: &str,
        name: &str,
        low_pole: &str,
        high_pole: &str,
        band_names: [&str; 4],
    ) -> Result<Self> {
        let dim = Self {
            dim_id: dim_id.to_owned(),
            name: name.to_owned(),
            low_pole: low_pole.to_owned(),
            high_pole: high_pole.to_owned(),
            band_names: band_names.map(str::to_owned),
        };
        dim.validate()?;
        Ok(dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim_id.is_empty() {
            return Err(Error::Data("dimension id is empty".into()));
        }
        if self.low_pole == self.high_pole {
            return Err(Error::Data(format!(
                "dimension {} has identical poles {:?}",
                self.dim_id, self.low_pole
            )));
        }
        Ok(())
    }

    /// The same dimension with its poles exchanged.
    pub fn swapped(&self) -> Self {
        let mut bands = self.band_names.clone();
        bands.reverse();
        Self {
            dim_id: self.dim_id.clone(),
            name: self.name.clone(),
            low_pole: self.high_pole.clone(),
            high_pole: self.low_pole.clone(),
            band_names: bands,
        }
    }
}

pub const DEFAULT_CENTRALITY_ANCHOR: &str = "unrelated topic";

fn default_anchor() -> String {
    DEFAULT_CENTRALITY_ANCHOR.to_owned()
}

/// A configurable set of semantic dimensions plus an optional centrality probe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionalDictionary {
    pub dict_id: String,
    pub dimensions: Vec<SemanticDimension>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centrality_target: Option<String>,
    /// Negative anchor used as the low pole of the centrality probe.
    #[serde(default = "default_anchor")]
    pub centrality_anchor: String,
}

impl PositionalDictionary {
    pub fn validate(&self) -> Result<()> {
        if self.dimensions.is_empty() {
            return Err(Error::Data(format!("dictionary {} has no dimensions", self.dict_id)));
        }
        let mut ids = BTreeSet::new();
        for dim in &self.dimensions {
            dim.validate()?;
            if !ids.insert(dim.dim_id.as_str()) {
                return Err(Error::Data(format!("duplicate dimension id {}", dim.dim_id)));
            }
        }
        if let Some(target) = &self.centrality_target {
            if *target == self.centrality_anchor {
                return Err(Error::Data("centrality target equals its anchor".into()));
            }
        }
        Ok(())
    }

    pub fn dim_ids(&self) -> impl Iterator<Item = &str> {
        self.dimensions.iter().map(|d| d.dim_id.as_str())
    }

    pub fn dimension(&self, dim_id: &str) -> Option<&SemanticDimension> {
        self.dimensions.iter().find(|d| d.dim_id == dim_id)
    }

    /// The six-dimension dictionary used for AI news, with band names taken
    /// from the aggregate corpus view.
    pub fn ai_news() -> Self {
        let dim = |id, name, lo, hi, bands| SemanticDimension::new(id, name, lo, hi, bands).expect("static dictionary");
        Self {
            dict_id: "ai-news-v1".into(),
            dimensions: vec![
                dim(
                    "opportunity_risk",
                    "Opportunity vs. Risk",
                    "Opportunity",
                    "Danger",
                    ["Pure Opportunity", "Growth Oriented", "Risk Aware", "Critical Danger"],
                ),
                dim(
                    "regulatory_pressure",
                    "Regulatory Pressure",
                    "Deregulation",
                    "Compliance",
                    ["Deregulation", "Low Supervision", "Moderate Oversight", "High Compliance"],
                ),
                dim(
                    "economic_momentum",
                    "Economic Momentum",
                    "Niche",
                    "Commercial",
                    ["Academic/Niche", "Emerging Market", "Commercial Growth", "Economic Engine"],
                ),
                dim(
                    "ethics_utility",
                    "Ethics vs. Utility",
                    "Human-centric",
                    "Efficiency",
                    ["Human-Centric", "Balanced Ethics", "Utility Focused", "Max Efficiency"],
                ),
                dim(
                    "geopolitical_scope",
                    "Geopolitical Scope",
                    "Local / EU",
                    "Global",
                    ["Local/Regional", "National Scope", "Continental/EU", "Global/Interstate"],
                ),
                dim(
                    "urgency",
                    "Urgency",
                    "Analytical",
                    "Breaking / Alarmist",
                    ["Educational", "Analytical", "Active News", "Crisis/Breaking"],
                ),
            ],
            centrality_target: Some("Artificial Intelligence".into()),
            centrality_anchor: default_anchor(),
        }
    }
}

/// Per-document scores on every dictionary dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScoreVector")]
pub struct ScoreVector {
    doc_id: String,
    scores: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    centrality: Option<f64>,
}

#[derive(Deserialize)]
struct RawScoreVector {
    doc_id: String,
    scores: BTreeMap<String, f64>,
    #[serde(default)]
    centrality: Option<f64>,
}

impl TryFrom<RawScoreVector> for ScoreVector {
    type Error = Error;
    fn try_from(raw: RawScoreVector) -> Result<Self> {
        ScoreVector::new(raw.doc_id, raw.scores, raw.centrality)
    }
}

fn check_unit(doc_id: &str, what: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Data(format!("{what} score {v} for {doc_id} is outside [0, 1]")))
    }
}

impl ScoreVector {
    pub fn new(
        doc_id: impl Into<String>,
        scores: BTreeMap<String, f64>,
        centrality: Option<f64>,
    ) -> Result<Self> {
        let doc_id = doc_id.into();
        for (dim, &v) in &scores {
            check_unit(&doc_id, dim, v)?;
        }
        if let Some(c) = centrality {
            check_unit(&doc_id, "centrality", c)?;
        }
        Ok(Self {
            doc_id,
            scores,
            centrality,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn score(&self, dim_id: &str) -> Option<f64> {
        self.scores.get(dim_id).copied()
    }

    pub fn scores(&self) -> &BTreeMap<String, f64> {
        &self.scores
    }

    pub fn centrality(&self) -> Option<f64> {
        self.centrality
    }

    /// Checks that exactly the dictionary's dimensions are present.
    pub fn check_against(&self, dict: &PositionalDictionary) -> Result<()> {
        let expected: BTreeSet<&str> = dict.dim_ids().collect();
        let actual: BTreeSet<&str> = self.scores.keys().map(String::as_str).collect();
        if expected != actual {
            return Err(Error::Data(format!(
                "scores for {} do not match dictionary {}",
                self.doc_id, dict.dict_id
            )));
        }
        Ok(())
    }
}

/// K-Means region of a document and whether it sits in the density core.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionAssignment {
    pub doc_id: String,
    pub region_id: usize,
    pub density_core: bool,
}

/// Outcome of the three noise-reduction filters for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVerdict")]
pub struct FilterVerdict {
    doc_id: String,
    d_global: f64,
    d_local: f64,
    g_pass: bool,
    l_pass: bool,
    r_pass: bool,
    retained: bool,
}

#[derive(Deserialize)]
struct RawVerdict {
    doc_id: String,
    d_global: f64,
    d_local: f64,
    g_pass: bool,
    l_pass: bool,
    r_pass: bool,
    retained: bool,
}

impl TryFrom<RawVerdict> for FilterVerdict {
    type Error = Error;
    fn try_from(raw: RawVerdict) -> Result<Self> {
        let v = FilterVerdict::new(raw.doc_id, raw.d_global, raw.d_local, raw.g_pass, raw.l_pass, raw.r_pass)?;
        if v.retained != raw.retained {
            return Err(Error::Data(format!(
                "verdict for {} has retained={} but flags say {}",
                v.doc_id, raw.retained, v.retained
            )));
        }
        Ok(v)
    }
}

impl FilterVerdict {
    pub fn new(
        doc_id: impl Into<String>,
        d_global: f64,
        d_local: f64,
        g_pass: bool,
        l_pass: bool,
        r_pass: bool,
    ) -> Result<Self> {
        let doc_id = doc_id.into();
        for d in [d_global, d_local] {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::Data(format!("distance {d} for {doc_id} is not a finite nonnegative value")));
            }
        }
        Ok(Self {
            doc_id,
            d_global,
            d_local,
            g_pass,
            l_pass,
            r_pass,
            retained: g_pass && l_pass && r_pass,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }
    pub fn d_global(&self) -> f64 {
        self.d_global
    }
    pub fn d_local(&self) -> f64 {
        self.d_local
    }
    pub fn g_pass(&self) -> bool {
        self.g_pass
    }
    pub fn l_pass(&self) -> bool {
        self.l_pass
    }
    pub fn r_pass(&self) -> bool {
        self.r_pass
    }
    pub fn retained(&self) -> bool {
        self.retained
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, t: &str, d: &str) -> DocumentRecord {
        DocumentRecord::new(id, t, d)
    }

    #[test]
    fn clean_corpus_validates() {
        let r = validate_corpus(&[rec("a", "t", ""), rec("b", "", "d"), rec("c", "t", "d")]);
        assert_eq!(r.count, 3);
        assert!(r.duplicates.is_empty());
        assert!(r.empty.is_empty());
        assert!(r.is_ok());
    }

    #[test]
    fn duplicate_ids_reported_once() {
        let r = validate_corpus(&[rec("a1", "x", ""), rec("a1", "y", ""), rec("a1", "z", "")]);
        assert_eq!(r.duplicates, vec!["a1".to_string()]);
        assert!(!r.is_ok());
    }

    #[test]
    fn empty_text_reported() {
        let r = validate_corpus(&[rec("a", "t", ""), rec("e1", "", "  ")]);
        assert_eq!(r.empty, vec!["e1".to_string()]);
    }

    #[test]
    fn score_vector_rejects_out_of_range() {
        let mut m = BTreeMap::new();
        m.insert("x".to_string(), 1.0000001);
        assert!(ScoreVector::new("a", m.clone(), None).is_err());
        m.insert("x".to_string(), 0.0);
        assert!(ScoreVector::new("a", m.clone(), Some(1.0)).is_ok());
        assert!(ScoreVector::new("a", m.clone(), Some(-0.1)).is_err());
        m.insert("x".to_string(), f64::NAN);
        assert!(ScoreVector::new("a", m, None).is_err());
    }

    #[test]
    fn retained_is_conjunction_for_all_flag_combinations() {
        for bits in 0..8u8 {
            let (g, l, r) = (bits & 1 != 0, bits & 2 != 0, bits & 4 != 0);
            let v = FilterVerdict::new("d", 1.0, 2.0, g, l, r).unwrap();
            assert_eq!(v.retained(), g && l && r, "flags {g} {l} {r}");
        }
    }

    #[test]
    fn verdict_deserialization_rejects_inconsistent_retained() {
        let bad = r#"{"doc_id":"d","d_global":1.0,"d_local":1.0,"g_pass":true,"l_pass":false,"r_pass":true,"retained":true}"#;
        assert!(serde_json::from_str::<FilterVerdict>(bad).is_err());
    }

    #[test]
    fn embedding_rejects_non_finite() {
        assert!(EmbeddingVector::new("a", vec![1.0, f32::NAN]).is_err());
        let e = EmbeddingVector::new("a", vec![3.0, 4.0]).unwrap();
        assert_eq!(e.norm(), 5.0);
    }

    #[test]
    fn dictionary_rules() {
        let dict = PositionalDictionary::ai_news();
        dict.validate().unwrap();
        assert_eq!(dict.dimensions.len(), 6);
        let mut dup = dict.clone();
        dup.dimensions.push(dict.dimensions[0].clone());
        assert!(dup.validate().is_err());
        assert!(SemanticDimension::new("x", "X", "same", "same", ["a", "b", "c", "d"]).is_err());
        let empty = PositionalDictionary {
            dimensions: vec![],
            ..dict
        };
        assert!(empty.validate().is_err());
    }
}
