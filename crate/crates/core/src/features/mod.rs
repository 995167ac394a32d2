//! Term and concept feature extraction, vocabulary pruning and projection.

mod concept;
mod vocabulary;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use concept::{
    extract_concept_features, match_concepts, ConceptLexicon, ConceptMatch, DEFAULT_MAX_PHRASE_LEN,
};
pub use vocabulary::{build_vocabulary, project, ProjectedFeatures, PruningRule, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Term,
    Concept,
}

impl Representation {
    pub const ALL: [Representation; 2] = [Representation::Term, Representation::Concept];

    pub fn as_str(self) -> &'static str {
        match self {
            Representation::Term => "term",
            Representation::Concept => "concept",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "term" | "terms" => Ok(Representation::Term),
            "concept" | "concepts" => Ok(Representation::Concept),
            _ => Err(Error::InvalidConfig(format!(
                "unknown representation {s:?}"
            ))),
        }
    }
}

/// A feature key qualified by its representation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureId {
    pub representation: Representation,
    pub key: String,
}

/// Occurrence counts of every feature in one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentFeatures {
    pub doc_id: String,
    pub representation: Representation,
    /// Every count is at least 1.
    pub counts: BTreeMap<String, u32>,
}

impl DocumentFeatures {
    pub fn new(doc_id: impl Into<String>, representation: Representation) -> Self {
        DocumentFeatures {
            doc_id: doc_id.into(),
            representation,
            counts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, key: &str, n: u32) {
        if n > 0 {
            *self.counts.entry(key.to_string()).or_insert(0) += n;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }

    pub fn feature_ids(&self) -> impl Iterator<Item = FeatureId> + '_ {
        self.counts.keys().map(|k| FeatureId {
            representation: self.representation,
            key: k.clone(),
        })
    }

    /// Debug dump line: `{doc_id, representation, features: {key: count}}`.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Dump<'a> {
            doc_id: &'a str,
            representation: Representation,
            features: &'a BTreeMap<String, u32>,
        }
        serde_json::to_writer(
            &mut out,
            &Dump {
                doc_id: &self.doc_id,
                representation: self.representation,
                features: &self.counts,
            },
        )?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

/// Lowercases, replaces every character that is neither alphanumeric nor
/// whitespace with a space, and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() {
                c
            } else {
                ' '
            }
        })
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

pub fn extract_term_features(doc_id: &str, fields: &[&str]) -> DocumentFeatures {
    let mut features = DocumentFeatures::new(doc_id, Representation::Term);
    for field in fields {
        for token in tokenize(field) {
            *features.counts.entry(token).or_insert(0) += 1;
        }
    }
    features
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn punctuation_becomes_separator() {
        assert_eq!(
            tokenize("Double-Blind, Placebo-Controlled"),
            ["double", "blind", "placebo", "controlled"]
        );
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn digits_are_kept() {
        assert_eq!(
            tokenize("Phase 3 trial of 20mg/day"),
            ["phase", "3", "trial", "of", "20mg", "day"]
        );
    }

    #[test]
    fn accents_survive_case_folding() {
        assert_eq!(tokenize("Étude RÉSUMÉ"), ["étude", "résumé"]);
    }

    #[test]
    fn term_counts_span_fields() {
        let f = extract_term_features("d", &["aspirin trial", "aspirin"]);
        let expected: BTreeMap<String, u32> =
            [("aspirin".to_string(), 2), ("trial".to_string(), 1)].into();
        assert_eq!(f.counts, expected);
    }

    #[test]
    fn all_punctuation_field() {
        assert!(extract_term_features("d", &["!!!"]).is_empty());
    }

    #[test]
    fn registration_fixture_counts() {
        // brief title, official title, summary, description, two conditions
        let fields = [
            "Aspirin in Stroke",
            "A Randomized Trial of Aspirin in Acute Stroke",
            "Aspirin (100 mg) vs. placebo.",
            "",
            "Stroke",
            "Atrial Fibrillation",
        ];
        let f = extract_term_features("NCT00000001", &fields);
        let expected: BTreeMap<String, u32> = [
            ("a", 1),
            ("acute", 1),
            ("aspirin", 3),
            ("atrial", 1),
            ("fibrillation", 1),
            ("in", 2),
            ("mg", 1),
            ("100", 1),
            ("of", 1),
            ("placebo", 1),
            ("randomized", 1),
            ("stroke", 3),
            ("trial", 1),
            ("vs", 1),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        assert_eq!(f.counts, expected);
    }

    #[test]
    fn dump_format() {
        let f = extract_term_features("7", &["b a b"]);
        let mut buf = Vec::new();
        f.write_dump(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"doc_id\":\"7\",\"representation\":\"term\",\"features\":{\"a\":1,\"b\":2}}\n"
        );
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(text in "\\PC{0,80}") {
            let once = tokenize(&text);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn tokens_are_clean(text in "\\PC{0,80}") {
            for t in tokenize(&text) {
                prop_assert!(!t.is_empty());
                prop_assert!(t.chars().all(char::is_alphanumeric));
            }
        }

        #[test]
        fn term_extraction_ignores_field_order(mut fields in proptest::collection::vec("[a-z ,.]{0,20}", 0..6)) {
            let refs: Vec<&str> = fields.iter().map(String::as_str).collect();
            let a = extract_term_features("d", &refs);
            fields.reverse();
            let refs: Vec<&str> = fields.iter().map(String::as_str).collect();
            let b = extract_term_features("d", &refs);
            prop_assert_eq!(a, b);
        }
    }
}
