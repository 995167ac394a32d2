//! Converters from registry (`<clinical_study>`) and bibliographic
//! (`<PubmedArticle>`) XML exports into canonical records.

use std::collections::BTreeSet;

use quick_xml::events::Event;
use quick_xml::Reader;

use super::canonical::RawRecord;
use super::date::parse_lenient_date;
use super::{Article, FundingClass, NctId, OverallStatus, Phase, Registration, StudyType};
use crate::error::{Error, Result};

#[derive(Debug, Default)]
struct Node {
    name: String,
    text: String,
    children: Vec<Node>,
}

impl Node {
    fn child(&self, name: &str) -> Option<&Node> {
        self.children.iter().find(|c| c.name == name)
    }

    fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Node> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    fn path(&self, path: &[&str]) -> Option<&Node> {
        path.iter().try_fold(self, |node, name| node.child(name))
    }

    fn text_at(&self, path: &[&str]) -> String {
        self.path(path)
            .map(|n| normalize_space(&n.text))
            .unwrap_or_default()
    }
}

fn normalize_space(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Collects every element named `record` into a small tree.
fn collect_records(input: &str, record: &str) -> Result<Vec<Node>> {
    let mut reader = Reader::from_str(input);
    let mut stack: Vec<Node> = Vec::new();
    let mut records = Vec::new();
    let xml_err = |e: &dyn std::fmt::Display, pos: u64| Error::Xml(format!("at byte {pos}: {e}"));
    loop {
        let pos = reader.buffer_position();
        match reader.read_event().map_err(|e| xml_err(&e, pos))? {
            Event::Start(e) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                if !stack.is_empty() || name == record {
                    stack.push(Node {
                        name,
                        ..Node::default()
                    });
                }
            }
            Event::Empty(e) => {
                if let Some(parent) = stack.last_mut() {
                    let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                    parent.children.push(Node {
                        name,
                        ..Node::default()
                    });
                }
            }
            Event::Text(t) => {
                if let Some(top) = stack.last_mut() {
                    top.text
                        .push_str(&t.unescape().map_err(|e| xml_err(&e, pos))?);
                }
            }
            Event::CData(t) => {
                if let Some(top) = stack.last_mut() {
                    top.text.push_str(&String::from_utf8_lossy(&t));
                }
            }
            Event::End(_) => {
                if let Some(node) = stack.pop() {
                    match stack.last_mut() {
                        Some(parent) => {
                            if !parent.text.is_empty()
                                && !parent.text.ends_with(char::is_whitespace)
                            {
                                parent.text.push(' ');
                            }
                            parent.text.push_str(&node.text);
                            parent.children.push(node);
                        }
                        None => records.push(node),
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(Error::Xml(format!("unterminated <{record}> element")));
    }
    Ok(records)
}

fn parse_status(raw: &str) -> OverallStatus {
    if raw.eq_ignore_ascii_case("completed") {
        OverallStatus::Completed
    } else {
        OverallStatus::Other
    }
}

fn parse_study_type(raw: &str) -> StudyType {
    let lower = raw.to_ascii_lowercase();
    if lower.starts_with("interventional") {
        StudyType::Interventional
    } else if lower.starts_with("observational") {
        StudyType::Observational
    } else {
        StudyType::Other
    }
}

fn parse_phase(raw: &str) -> Option<Phase> {
    let key: String = raw
        .to_ascii_lowercase()
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect();
    Some(match key.as_str() {
        "earlyphase1" | "phase0" => Phase::EarlyPhase1,
        "phase1" => Phase::Phase1,
        "phase1phase2" => Phase::Phase1Phase2,
        "phase2" => Phase::Phase2,
        "phase2phase3" => Phase::Phase2Phase3,
        "phase3" => Phase::Phase3,
        "phase4" => Phase::Phase4,
        "na" | "notapplicable" => Phase::NotApplicable,
        _ => return None,
    })
}

fn funding_class(study: &Node) -> Option<FundingClass> {
    let sponsors = study.child("sponsors")?;
    let classes: Vec<bool> = sponsors
        .children
        .iter()
        .filter(|c| c.name == "lead_sponsor" || c.name == "collaborator")
        .filter_map(|c| c.child("agency_class"))
        .map(|n| normalize_space(&n.text).eq_ignore_ascii_case("industry"))
        .collect();
    if classes.is_empty() {
        None
    } else if classes.iter().all(|&b| b) {
        Some(FundingClass::Industry)
    } else if classes.iter().any(|&b| b) {
        Some(FundingClass::Mixed)
    } else {
        Some(FundingClass::NoIndustry)
    }
}

fn registration_from_node(study: &Node) -> std::result::Result<Registration, String> {
    let nct_raw = study.text_at(&["id_info", "nct_id"]);
    let nct_id = NctId::new(&nct_raw).map_err(|e| e.to_string())?;
    let received_raw = [
        study.text_at(&["study_first_submitted"]),
        study.text_at(&["firstreceived_date"]),
    ]
    .into_iter()
    .find(|s| !s.is_empty())
    .unwrap_or_default();
    let received_date = parse_lenient_date(&received_raw)
        .ok_or_else(|| format!("unparseable received date {received_raw:?}"))?;
    let completion_raw = study.text_at(&["completion_date"]);
    let completion_date = if completion_raw.is_empty() {
        None
    } else {
        Some(
            parse_lenient_date(&completion_raw)
                .ok_or_else(|| format!("unparseable completion date {completion_raw:?}"))?,
        )
    };
    let enrollment = match study.text_at(&["enrollment"]) {
        s if s.is_empty() => None,
        s => Some(
            s.parse::<u64>()
                .map_err(|_| format!("bad enrollment {s:?}"))?,
        ),
    };
    let registration = Registration {
        nct_id,
        brief_title: study.text_at(&["brief_title"]),
        official_title: study.text_at(&["official_title"]),
        brief_summary: study.text_at(&["brief_summary", "textblock"]),
        detailed_description: study.text_at(&["detailed_description", "textblock"]),
        conditions: study
            .children_named("condition")
            .map(|n| normalize_space(&n.text))
            .filter(|s| !s.is_empty())
            .collect(),
        received_date,
        completion_date,
        overall_status: parse_status(&study.text_at(&["overall_status"])),
        study_type: parse_study_type(&study.text_at(&["study_type"])),
        phase: parse_phase(&study.text_at(&["phase"])),
        enrollment,
        funding_class: funding_class(study),
    };
    registration.validate()?;
    Ok(registration)
}

pub(crate) fn registrations_from_xml(input: &str) -> Result<Vec<RawRecord<Registration>>> {
    Ok(collect_records(input, "clinical_study")?
        .iter()
        .enumerate()
        .map(|(i, node)| {
            registration_from_node(node).map_err(|msg| {
                let id = node.text_at(&["id_info", "nct_id"]);
                (
                    if id.is_empty() {
                        format!("record:{}", i + 1)
                    } else {
                        id
                    },
                    msg,
                )
            })
        })
        .collect())
}

fn publication_date(article: &Node) -> Option<chrono::NaiveDate> {
    let from_parts = |node: &Node| {
        let year = node.text_at(&["Year"]);
        if year.is_empty() {
            return None;
        }
        let month = node.text_at(&["Month"]);
        let day = node.text_at(&["Day"]);
        let joined = [year, month, day]
            .into_iter()
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ");
        parse_lenient_date(&joined)
    };
    let pub_date = article.path(&["Journal", "JournalIssue", "PubDate"]);
    pub_date
        .and_then(from_parts)
        .or_else(|| {
            // "2010 Jan-Feb", "2009 Winter"
            let medline = pub_date?.text_at(&["MedlineDate"]);
            let mut tokens = medline.split(|c: char| c.is_whitespace() || c == '-');
            let year = tokens.next()?;
            match tokens
                .next()
                .and_then(|m| parse_lenient_date(&format!("{year} {m}")))
            {
                Some(d) => Some(d),
                None => parse_lenient_date(year),
            }
        })
        .or_else(|| article.child("ArticleDate").and_then(from_parts))
}

fn article_from_node(entry: &Node) -> std::result::Result<Article, String> {
    let citation = entry
        .child("MedlineCitation")
        .ok_or("missing MedlineCitation")?;
    let pmid = citation
        .text_at(&["PMID"])
        .parse()
        .map_err(|e: Error| e.to_string())?;
    let article = citation.child("Article").ok_or("missing Article")?;
    let abstract_text = article
        .child("Abstract")
        .map(|a| {
            a.children_named("AbstractText")
                .map(|n| normalize_space(&n.text))
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .unwrap_or_default();
    let publication_types: BTreeSet<String> = article
        .child("PublicationTypeList")
        .map(|l| {
            l.children_named("PublicationType")
                .map(|n| normalize_space(&n.text))
                .collect()
        })
        .unwrap_or_default();
    let mut linked_nct_ids = BTreeSet::new();
    if let Some(banks) = article.child("DataBankList") {
        for bank in banks.children_named("DataBank") {
            if !bank
                .text_at(&["DataBankName"])
                .eq_ignore_ascii_case("ClinicalTrials.gov")
            {
                continue;
            }
            if let Some(list) = bank.child("AccessionNumberList") {
                for acc in list.children_named("AccessionNumber") {
                    match NctId::new(&normalize_space(&acc.text)) {
                        Ok(id) => {
                            linked_nct_ids.insert(id);
                        }
                        Err(e) => log::warn!("PMID {pmid}: ignoring accession: {e}"),
                    }
                }
            }
        }
    }
    let record = Article {
        pmid,
        title: article.text_at(&["ArticleTitle"]),
        abstract_text,
        publication_date: publication_date(article),
        publication_types,
        linked_nct_ids,
    };
    record.validate()?;
    Ok(record)
}

pub(crate) fn articles_from_xml(input: &str) -> Result<Vec<RawRecord<Article>>> {
    Ok(collect_records(input, "PubmedArticle")?
        .iter()
        .enumerate()
        .map(|(i, node)| {
            article_from_node(node).map_err(|msg| {
                let id = node.text_at(&["MedlineCitation", "PMID"]);
                (
                    if id.is_empty() {
                        format!("record:{}", i + 1)
                    } else {
                        id
                    },
                    msg,
                )
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Pmid;
    use chrono::NaiveDate;

    const STUDY: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<clinical_study rank="1">
  <id_info><org_study_id>X-1</org_study_id><nct_id>NCT01234567</nct_id></id_info>
  <brief_title>Aspirin for &amp; Stroke Prevention</brief_title>
  <official_title>A Randomized Trial of Aspirin</official_title>
  <sponsors>
    <lead_sponsor><agency>Acme</agency><agency_class>Industry</agency_class></lead_sponsor>
    <collaborator><agency>Univ</agency><agency_class>Other</agency_class></collaborator>
  </sponsors>
  <brief_summary><textblock>
      Tests aspirin
      in adults.
  </textblock></brief_summary>
  <overall_status>Completed</overall_status>
  <completion_date type="Actual">June 2012</completion_date>
  <phase>Phase 2/Phase 3</phase>
  <study_type>Interventional</study_type>
  <enrollment type="Actual">120</enrollment>
  <condition>Stroke</condition>
  <condition>Atrial Fibrillation</condition>
  <study_first_submitted>October 3, 2007</study_first_submitted>
</clinical_study>"#;

    #[test]
    fn registry_study_converts() {
        let mut out = registrations_from_xml(STUDY).unwrap();
        let r = out.remove(0).unwrap();
        assert_eq!(r.nct_id.as_str(), "NCT01234567");
        assert_eq!(r.brief_title, "Aspirin for & Stroke Prevention");
        assert_eq!(r.brief_summary, "Tests aspirin in adults.");
        assert_eq!(r.conditions, vec!["Stroke", "Atrial Fibrillation"]);
        assert_eq!(
            r.received_date,
            NaiveDate::from_ymd_opt(2007, 10, 3).unwrap()
        );
        assert_eq!(r.completion_date, NaiveDate::from_ymd_opt(2012, 6, 1));
        assert_eq!(r.overall_status, OverallStatus::Completed);
        assert_eq!(r.study_type, StudyType::Interventional);
        assert_eq!(r.phase, Some(Phase::Phase2Phase3));
        assert_eq!(r.enrollment, Some(120));
        assert_eq!(r.funding_class, Some(FundingClass::Mixed));
    }

    #[test]
    fn study_without_id_is_malformed() {
        let xml =
            "<studies><clinical_study><brief_title>x</brief_title></clinical_study></studies>";
        let out = registrations_from_xml(xml).unwrap();
        let (id, _) = out[0].as_ref().unwrap_err();
        assert_eq!(id, "record:1");
    }

    const PUBMED: &str = r#"<?xml version="1.0"?>
<PubmedArticleSet>
<PubmedArticle>
  <MedlineCitation Status="MEDLINE">
    <PMID Version="1">22334455</PMID>
    <Article PubModel="Print">
      <Journal><JournalIssue><PubDate><Year>2013</Year><Month>Mar</Month></PubDate></JournalIssue></Journal>
      <ArticleTitle>Aspirin after <i>stroke</i>: a trial.</ArticleTitle>
      <Abstract>
        <AbstractText Label="BACKGROUND">Stroke recurs.</AbstractText>
        <AbstractText Label="METHODS">We randomized 120 adults.</AbstractText>
      </Abstract>
      <PublicationTypeList>
        <PublicationType UI="D016449">Randomized Controlled Trial</PublicationType>
        <PublicationType UI="D016428">Journal Article</PublicationType>
      </PublicationTypeList>
      <DataBankList CompleteYN="Y">
        <DataBank>
          <DataBankName>ClinicalTrials.gov</DataBankName>
          <AccessionNumberList><AccessionNumber>NCT01234567</AccessionNumber></AccessionNumberList>
        </DataBank>
        <DataBank>
          <DataBankName>ISRCTN</DataBankName>
          <AccessionNumberList><AccessionNumber>ISRCTN123</AccessionNumber></AccessionNumberList>
        </DataBank>
      </DataBankList>
    </Article>
  </MedlineCitation>
</PubmedArticle>
<PubmedArticle>
  <MedlineCitation>
    <PMID>99</PMID>
    <Article>
      <Journal><JournalIssue><PubDate><MedlineDate>2010 Jan-Feb</MedlineDate></PubDate></JournalIssue></Journal>
      <ArticleTitle>Second</ArticleTitle>
    </Article>
  </MedlineCitation>
</PubmedArticle>
</PubmedArticleSet>"#;

    #[test]
    fn pubmed_articles_convert() {
        let out: Vec<Article> = articles_from_xml(PUBMED)
            .unwrap()
            .into_iter()
            .map(|r| r.unwrap())
            .collect();
        let a = &out[0];
        assert_eq!(a.pmid, Pmid(22334455));
        assert_eq!(a.title, "Aspirin after stroke: a trial.");
        assert_eq!(a.abstract_text, "Stroke recurs. We randomized 120 adults.");
        assert_eq!(a.publication_date, NaiveDate::from_ymd_opt(2013, 3, 1));
        assert!(a.publication_types.contains("Randomized Controlled Trial"));
        assert_eq!(a.linked_nct_ids.len(), 1);
        assert_eq!(out[1].publication_date, NaiveDate::from_ymd_opt(2010, 1, 1));
        assert!(out[1].abstract_text.is_empty());
    }

    #[test]
    fn truncated_document_is_an_error() {
        assert!(articles_from_xml("<PubmedArticleSet><PubmedArticle><MedlineCitation>").is_err());
    }
}
