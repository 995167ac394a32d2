use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DocumentFeatures, Representation};
use crate::error::{Error, Result};

/// What "found more than once" counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruningRule {
    /// Total occurrences across the corpus (default).
    #[default]
    Occurrence,
    /// Number of documents containing the feature.
    DocumentFrequency,
}

/// The shared, pruned feature space for one representation.
///
/// Dense indices follow lexicographic key order. Document frequency and corpus
/// size come from the article corpus only; registrations are queries.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    representation: Representation,
    rule: PruningRule,
    keys: Vec<String>,
    index: HashMap<String, u32>,
    reg_occurrence: Vec<u64>,
    art_occurrence: Vec<u64>,
    art_doc_frequency: Vec<u32>,
    n_articles: u32,
}

/// Document features restricted to a vocabulary, keyed by dense index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectedFeatures {
    pub doc_id: String,
    /// Sorted by index; counts ≥ 1.
    pub counts: Vec<(u32, u32)>,
}

impl ProjectedFeatures {
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Default)]
struct Tally {
    occurrence: u64,
    docs: u32,
}

fn tally(
    docs: &[DocumentFeatures],
    representation: Representation,
) -> Result<BTreeMap<&str, Tally>> {
    let mut out: BTreeMap<&str, Tally> = BTreeMap::new();
    for doc in docs {
        if doc.representation != representation {
            return Err(Error::SpaceMismatch(format!(
                "document {} is {} features, expected {}",
                doc.doc_id, doc.representation, representation
            )));
        }
        for (key, &n) in &doc.counts {
            let t = out.entry(key.as_str()).or_default();
            t.occurrence += n as u64;
            t.docs += 1;
        }
    }
    Ok(out)
}

/// Keeps exactly the features seen at least twice in the registrations and at
/// least twice in the articles, under `rule`.
pub fn build_vocabulary(
    registrations: &[DocumentFeatures],
    articles: &[DocumentFeatures],
    representation: Representation,
    rule: PruningRule,
) -> Result<Vocabulary> {
    if articles.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n_articles = u32::try_from(articles.len())
        .map_err(|_| Error::InvalidConfig("article corpus too large".into()))?;
    let reg = tally(registrations, representation)?;
    let art = tally(articles, representation)?;
    let measure = |t: &Tally| match rule {
        PruningRule::Occurrence => t.occurrence,
        PruningRule::DocumentFrequency => t.docs as u64,
    };

    let mut vocab = Vocabulary {
        representation,
        rule,
        keys: Vec::new(),
        index: HashMap::new(),
        reg_occurrence: Vec::new(),
        art_occurrence: Vec::new(),
        art_doc_frequency: Vec::new(),
        n_articles,
    };
    for (key, a) in &art {
        let Some(r) = reg.get(key) else { continue };
        if measure(r) >= 2 && measure(a) >= 2 {
            vocab.index.insert(key.to_string(), vocab.keys.len() as u32);
            vocab.keys.push(key.to_string());
            vocab.reg_occurrence.push(r.occurrence);
            vocab.art_occurrence.push(a.occurrence);
            vocab.art_doc_frequency.push(a.docs);
        }
    }
    if vocab.keys.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    Ok(vocab)
}

impl Vocabulary {
    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn rule(&self) -> PruningRule {
        self.rule
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn n_articles(&self) -> u32 {
        self.n_articles
    }

    pub fn index_of(&self, key: &str) -> Option<u32> {
        self.index.get(key).copied()
    }

    pub fn key(&self, index: u32) -> Option<&str> {
        self.keys.get(index as usize).map(String::as_str)
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn reg_occurrence(&self, index: u32) -> u64 {
        self.reg_occurrence[index as usize]
    }

    pub fn art_occurrence(&self, index: u32) -> u64 {
        self.art_occurrence[index as usize]
    }

    /// Number of articles containing the feature; 0 for an unknown index.
    pub fn doc_frequency(&self, index: u32) -> u32 {
        self.art_doc_frequency
            .get(index as usize)
            .copied()
            .unwrap_or(0)
    }

    /// SHA-256 over everything that determines vector weights.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.representation.as_str().as_bytes());
        h.update([0u8]);
        h.update(self.n_articles.to_le_bytes());
        for (i, key) in self.keys.iter().enumerate() {
            h.update((key.len() as u64).to_le_bytes());
            h.update(key.as_bytes());
            h.update(self.art_doc_frequency[i].to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Drops out-of-vocabulary features; remaining counts unchanged.
pub fn project(doc: &DocumentFeatures, vocab: &Vocabulary) -> ProjectedFeatures {
    let mut counts: Vec<(u32, u32)> = doc
        .counts
        .iter()
        .filter_map(|(k, &n)| vocab.index_of(k).map(|i| (i, n)))
        .collect();
    counts.sort_unstable();
    ProjectedFeatures {
        doc_id: doc.doc_id.clone(),
        counts,
    }
}
