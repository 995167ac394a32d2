use std::collections::{BTreeSet, HashSet};

use super::{Article, NctId, Pmid, Registration, ReportedLink};

/// Reported links plus the references that pointed outside the registration corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkExtraction {
    pub links: Vec<ReportedLink>,
    pub dangling: Vec<(Pmid, NctId)>,
}

/// One link per (registration, article) pair where the article lists the
/// registration and the registration was ingested. Sorted by (nct_id, pmid).
pub fn extract_reported_links(
    registrations: &[Registration],
    articles: &[Article],
) -> LinkExtraction {
    let known: HashSet<&NctId> = registrations.iter().map(|r| &r.nct_id).collect();
    let mut links = BTreeSet::new();
    let mut dangling = Vec::new();
    for article in articles {
        for nct in &article.linked_nct_ids {
            if known.contains(nct) {
                links.insert(ReportedLink {
                    nct_id: nct.clone(),
                    pmid: article.pmid,
                });
            } else {
                log::info!(
                    "PMID {} links {} which is not in the registration corpus",
                    article.pmid,
                    nct
                );
                dangling.push((article.pmid, nct.clone()));
            }
        }
    }
    dangling.sort();
    dangling.dedup();
    LinkExtraction {
        links: links.into_iter().collect(),
        dangling,
    }
}
