//! Dictionary concept tagger: greedy left-to-right longest match of
//! normalized token phrases against a lexicon.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{tokenize, DocumentFeatures, Representation};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_PHRASE_LEN: usize = 5;

#[derive(Debug, Clone, Default)]
pub struct ConceptLexicon {
    entries: HashMap<Vec<String>, String>,
    max_phrase_len: usize,
    warnings: Vec<String>,
}

/// One matched phrase: token span `[start, start + len)` within a field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptMatch {
    pub start: usize,
    pub len: usize,
    pub concept: String,
}

impl ConceptLexicon {
    pub fn new(max_phrase_len: usize) -> Result<Self> {
        if max_phrase_len == 0 {
            return Err(Error::InvalidConfig(
                "max_phrase_len must be positive".into(),
            ));
        }
        Ok(ConceptLexicon {
            entries: HashMap::new(),
            max_phrase_len,
            warnings: Vec::new(),
        })
    }

    /// Adds one surface phrase. A phrase already mapped to a different concept
    /// keeps the lexicographically smallest concept id.
    pub fn insert(&mut self, surface: &str, concept: &str) -> Result<()> {
        let concept = concept.trim();
        if concept.is_empty() || concept.contains(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!("bad concept id {concept:?}")));
        }
        let phrase = tokenize(surface);
        if phrase.is_empty() {
            self.warnings.push(format!(
                "surface {surface:?} normalizes to nothing; skipped"
            ));
            return Ok(());
        }
        if phrase.len() > self.max_phrase_len {
            self.warnings.push(format!(
                "surface {surface:?} has {} tokens, more than {}; skipped",
                phrase.len(),
                self.max_phrase_len
            ));
            return Ok(());
        }
        match self.entries.get_mut(&phrase) {
            Some(existing) if existing.as_str() != concept => {
                let (keep, drop) = if concept < existing.as_str() {
                    (concept.to_string(), existing.clone())
                } else {
                    (existing.clone(), concept.to_string())
                };
                self.warnings.push(format!(
                    "phrase {:?} maps to {keep} and {drop}; keeping {keep}",
                    phrase.join(" ")
                ));
                log::warn!("{}", self.warnings.last().unwrap());
                *existing = keep;
            }
            Some(_) => {}
            None => {
                self.entries.insert(phrase, concept.to_string());
            }
        }
        Ok(())
    }

    /// Reads `surface_phrase<TAB>concept_id` lines; `#` starts a comment line.
    pub fn from_reader<R: BufRead>(reader: R, max_phrase_len: usize) -> Result<Self> {
        let mut lexicon = ConceptLexicon::new(max_phrase_len)?;
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                continue;
            }
            let (surface, concept) = trimmed.split_once('\t').ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "lexicon line {}: expected surface<TAB>concept",
                    n + 1
                ))
            })?;
            lexicon.insert(surface, concept)?;
        }
        Ok(lexicon)
    }

    pub fn from_tsv(text: &str, max_phrase_len: usize) -> Result<Self> {
        Self::from_reader(text.as_bytes(), max_phrase_len)
    }

    pub fn max_phrase_len(&self) -> usize {
        self.max_phrase_len
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn lookup(&self, phrase: &[String]) -> Option<&str> {
        self.entries.get(phrase).map(String::as_str)
    }

    /// Entries sorted by phrase, for stable fingerprints and dumps.
    pub fn sorted_entries(&self) -> Vec<(String, &str)> {
        let mut out: Vec<_> = self
            .entries
            .iter()
            .map(|(k, v)| (k.join(" "), v.as_str()))
            .collect();
        out.sort();
        out
    }

    /// Writes entries in the format `from_reader` accepts, sorted by phrase.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for (phrase, concept) in self.sorted_entries() {
            writeln!(out, "{phrase}\t{concept}")?;
        }
        Ok(())
    }
}

/// Longest match at each position, lengths tried from `max_phrase_len` down
/// to 1; on a hit the cursor skips the phrase, otherwise it advances one token.
pub fn match_concepts(tokens: &[String], lexicon: &ConceptLexicon) -> Vec<ConceptMatch> {
    let mut matches = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = lexicon.max_phrase_len.min(tokens.len() - i);
        let hit = (1..=longest)
            .rev()
            .find_map(|len| lexicon.lookup(&tokens[i..i + len]).map(|c| (len, c)));
        match hit {
            Some((len, concept)) => {
                matches.push(ConceptMatch {
                    start: i,
                    len,
                    concept: concept.to_string(),
                });
                i += len;
            }
            None => i += 1,
        }
    }
    matches
}

pub fn extract_concept_features(
    doc_id: &str,
    fields: &[&str],
    lexicon: &ConceptLexicon,
) -> DocumentFeatures {
    let mut features = DocumentFeatures::new(doc_id, Representation::Concept);
    for field in fields {
        let tokens = tokenize(field);
        for m in match_concepts(&tokens, lexicon) {
            *features.counts.entry(m.concept).or_insert(0) += 1;
        }
    }
    features
}
