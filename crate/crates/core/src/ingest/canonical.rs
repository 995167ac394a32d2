use std::collections::{BTreeSet, HashSet};
use std::io::Write;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::xml;
use super::{Article, CorpusFilterConfig, OverallStatus, Registration, Rejection, StudyType};
use crate::error::{Error, Result};

/// Records that passed every filter plus an account of everything that did not.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome<T> {
    pub records: Vec<T>,
    pub rejections: Vec<Rejection>,
    pub warnings: Vec<String>,
    /// Number of input records seen (included + rejected).
    pub total: usize,
}

impl<T> IngestOutcome<T> {
    /// Rejection log in its line-delimited `{id, reason}` form.
    pub fn write_rejections<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.rejections {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// A parsed record or the id (best effort) and message of a malformed one.
pub(crate) type RawRecord<T> = std::result::Result<T, (String, String)>;

fn looks_like_xml(input: &str) -> bool {
    input.trim_start().starts_with('<')
}

fn parse_json_lines<T, F>(input: &str, id_field: &str, validate: F) -> Vec<RawRecord<T>>
where
    T: DeserializeOwned + Send,
    F: Fn(&T) -> std::result::Result<(), String> + Sync,
{
    let lines: Vec<(usize, &str)> = input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let parse = |&(n, line): &(usize, &str)| -> RawRecord<T> {
        let fallback_id = || {
            serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| match v.get(id_field)? {
                    serde_json::Value::String(s) => Some(s.clone()),
                    other @ serde_json::Value::Number(_) => Some(other.to_string()),
                    _ => None,
                })
                .unwrap_or_else(|| format!("line:{}", n + 1))
        };
        let record: T = serde_json::from_str(line).map_err(|e| (fallback_id(), e.to_string()))?;
        validate(&record).map_err(|msg| (fallback_id(), msg))?;
        Ok(record)
    };
    #[cfg(feature = "parallel")]
    {
        lines.par_iter().map(parse).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        lines.iter().map(parse).collect()
    }
}

fn lowercase_set(labels: &BTreeSet<String>) -> HashSet<String> {
    labels.iter().map(|s| s.trim().to_lowercase()).collect()
}

fn finish<T>(
    raw: Vec<RawRecord<T>>,
    id_of: impl Fn(&T) -> String,
    mut filter: impl FnMut(&T, &mut Vec<String>) -> Option<&'static str>,
) -> Result<IngestOutcome<T>> {
    let total = raw.len();
    let mut seen = HashSet::with_capacity(total);
    for record in raw.iter().flatten() {
        let id = id_of(record);
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
    }

    let mut out = IngestOutcome {
        records: Vec::new(),
        rejections: Vec::new(),
        warnings: Vec::new(),
        total,
    };
    for record in raw {
        match record {
            Err((id, msg)) => {
                log::warn!("skipping malformed record {id}: {msg}");
                out.warnings.push(format!("{id}: {msg}"));
                out.rejections.push(Rejection {
                    id,
                    reason: format!("malformed: {msg}"),
                });
            }
            Ok(record) => match filter(&record, &mut out.warnings) {
                Some(reason) => out.rejections.push(Rejection {
                    id: id_of(&record),
                    reason: reason.to_string(),
                }),
                None => out.records.push(record),
            },
        }
    }
    Ok(out)
}

/// Parses registrations from canonical JSON lines or a registry XML export
/// and keeps those passing the enabled filters.
///
/// Filters are checked in the order received date, status, study type; the
/// rejection reason names the first one failed.
pub fn parse_registrations(
    input: &str,
    config: &CorpusFilterConfig,
) -> Result<IngestOutcome<Registration>> {
    config.validate()?;
    let raw = if looks_like_xml(input) {
        xml::registrations_from_xml(input)?
    } else {
        parse_json_lines(input, "nct_id", Registration::validate)
    };
    finish(
        raw,
        |r| r.nct_id.to_string(),
        |r, _| {
            if r.received_date < config.min_received_date {
                Some("received_date")
            } else if config.require_completed && r.overall_status != OverallStatus::Completed {
                Some("overall_status")
            } else if config.require_interventional && r.study_type != StudyType::Interventional {
                Some("study_type")
            } else {
                None
            }
        },
    )
}

/// Parses articles from canonical JSON lines or a bibliographic XML export.
///
/// An article is kept when it carries a registry link or a required
/// publication type, carries no excluded type, and was not published before
/// the minimum date. Articles without a publication date are kept with a
/// warning.
pub fn parse_articles(input: &str, config: &CorpusFilterConfig) -> Result<IngestOutcome<Article>> {
    config.validate()?;
    let raw = if looks_like_xml(input) {
        xml::articles_from_xml(input)?
    } else {
        parse_json_lines(input, "pmid", Article::validate)
    };
    let required = lowercase_set(&config.required_publication_types);
    let excluded = lowercase_set(&config.excluded_publication_types);
    finish(
        raw,
        |a| a.pmid.to_string(),
        |a, warnings| {
            let types = lowercase_set(&a.publication_types);
            let is_trial = required.is_empty()
                || !a.linked_nct_ids.is_empty()
                || !types.is_disjoint(&required);
            if !types.is_disjoint(&excluded) {
                return Some("excluded publication type");
            }
            if !is_trial {
                return Some("not a trial report");
            }
            match a.publication_date {
                Some(d) if d < config.min_publication_date => Some("publication_date"),
                Some(_) => None,
                None => {
                    warnings.push(format!("{}: missing publication date", a.pmid));
                    None
                }
            }
        },
    )
}

fn write_lines<T: Serialize, W: Write>(records: &[T], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_registrations<W: Write>(records: &[Registration], out: W) -> Result<()> {
    write_lines(records, out)
}

pub fn write_articles<W: Write>(records: &[Article], out: W) -> Result<()> {
    write_lines(records, out)
}
