//! Record ingestion: canonical line-delimited records, registry and
//! bibliographic XML converters, corpus inclusion filters and reported-link
//! extraction.

mod canonical;
mod date;
mod links;
mod stats;
pub mod xml;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use canonical::{
    parse_articles, parse_registrations, write_articles, write_registrations, IngestOutcome,
};
pub use date::parse_lenient_date;
pub use links::{extract_reported_links, LinkExtraction};
pub use stats::{corpus_stats, CorpusStats, OccurrenceHistogram};

/// ClinicalTrials.gov registration identifier: `NCT` followed by 8 digits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NctId(String);

impl NctId {
    pub fn new(raw: &str) -> Result<Self> {
        let raw = raw.trim();
        let digits = raw
            .strip_prefix("NCT")
            .ok_or_else(|| Error::InvalidId(raw.to_string()))?;
        if digits.len() == 8 && digits.bytes().all(|b| b.is_ascii_digit()) {
            Ok(NctId(raw.to_string()))
        } else {
            Err(Error::InvalidId(raw.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NctId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for NctId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NctId::new(s)
    }
}

impl Serialize for NctId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for NctId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        NctId::new(&raw).map_err(serde::de::Error::custom)
    }
}

/// PubMed identifier. Ordered numerically, which is the ranking tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pmid(pub u64);

impl fmt::Display for Pmid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Pmid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty()
            || !s.bytes().all(|b| b.is_ascii_digit())
            || (s.len() > 1 && s.starts_with('0'))
        {
            return Err(Error::InvalidId(s.to_string()));
        }
        s.parse()
            .map(Pmid)
            .map_err(|_| Error::InvalidId(s.to_string()))
    }
}

impl Serialize for Pmid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Pmid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(u64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Number(n) => Ok(Pmid(n)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverallStatus {
    Completed,
    #[serde(other)]
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyType {
    Interventional,
    Observational,
    #[serde(other)]
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    EarlyPhase1,
    Phase1,
    #[serde(alias = "phase1_phase2")]
    Phase1Phase2,
    Phase2,
    #[serde(alias = "phase2_phase3")]
    Phase2Phase3,
    Phase3,
    Phase4,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FundingClass {
    Industry,
    Mixed,
    NoIndustry,
}

/// One trial registry entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    pub nct_id: NctId,
    #[serde(default)]
    pub brief_title: String,
    #[serde(default)]
    pub official_title: String,
    #[serde(default)]
    pub brief_summary: String,
    #[serde(default)]
    pub detailed_description: String,
    #[serde(default)]
    pub conditions: Vec<String>,
    #[serde(with = "date::required")]
    pub received_date: NaiveDate,
    #[serde(with = "date::optional", default)]
    pub completion_date: Option<NaiveDate>,
    pub overall_status: OverallStatus,
    pub study_type: StudyType,
    #[serde(default)]
    pub phase: Option<Phase>,
    #[serde(default)]
    pub enrollment: Option<u64>,
    #[serde(default)]
    pub funding_class: Option<FundingClass>,
}

impl Registration {
    /// Text fields used for feature extraction, conditions included.
    pub fn text_fields(&self) -> Vec<&str> {
        let mut fields = vec![
            self.brief_title.as_str(),
            self.official_title.as_str(),
            self.brief_summary.as_str(),
            self.detailed_description.as_str(),
        ];
        fields.extend(self.conditions.iter().map(String::as_str));
        fields
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        let has_text = self.text_fields().iter().any(|f| !f.trim().is_empty());
        if has_text {
            Ok(())
        } else {
            Err("no non-empty text field".to_string())
        }
    }
}

/// One bibliographic record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub pmid: Pmid,
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(with = "date::optional", default)]
    pub publication_date: Option<NaiveDate>,
    #[serde(default)]
    pub publication_types: BTreeSet<String>,
    #[serde(default)]
    pub linked_nct_ids: BTreeSet<NctId>,
}

impl Article {
    pub fn text_fields(&self) -> Vec<&str> {
        vec![self.title.as_str(), self.abstract_text.as_str()]
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.title.trim().is_empty() {
            Err("empty title".to_string())
        } else {
            Ok(())
        }
    }
}

/// A registration/article pair recorded in bibliographic metadata.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReportedLink {
    pub nct_id: NctId,
    pub pmid: Pmid,
}

/// Inclusion filters for both corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusFilterConfig {
    #[serde(with = "date::required")]
    pub min_received_date: NaiveDate,
    pub require_completed: bool,
    pub require_interventional: bool,
    #[serde(with = "date::required")]
    pub min_publication_date: NaiveDate,
    pub required_publication_types: BTreeSet<String>,
    pub excluded_publication_types: BTreeSet<String>,
}

impl Default for CorpusFilterConfig {
    fn default() -> Self {
        let labels = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        CorpusFilterConfig {
            min_received_date: NaiveDate::from_ymd_opt(2007, 10, 1).unwrap(),
            require_completed: true,
            require_interventional: true,
            min_publication_date: NaiveDate::from_ymd_opt(2007, 10, 1).unwrap(),
            required_publication_types: labels(&[
                "clinical trial",
                "controlled clinical trial",
                "randomized controlled trial",
            ]),
            excluded_publication_types: labels(&["meta-analysis", "review"]),
        }
    }
}

impl CorpusFilterConfig {
    /// No filtering at all; every well-formed record passes. An empty
    /// required-type set disables the trial-evidence test.
    pub fn permissive() -> Self {
        CorpusFilterConfig {
            min_received_date: NaiveDate::from_ymd_opt(1, 1, 1).unwrap(),
            require_completed: false,
            require_interventional: false,
            min_publication_date: NaiveDate::from_ymd_opt(1, 1, 1).unwrap(),
            required_publication_types: BTreeSet::new(),
            excluded_publication_types: BTreeSet::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let required: BTreeSet<String> = self
            .required_publication_types
            .iter()
            .map(|s| s.to_lowercase())
            .collect();
        let overlap: Vec<_> = self
            .excluded_publication_types
            .iter()
            .filter(|s| required.contains(&s.to_lowercase()))
            .collect();
        if overlap.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "publication types both required and excluded: {overlap:?}"
            )))
        }
    }
}

/// One excluded input record and the first filter it failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub reason: String,
}
