#![allow(dead_code)]

use trialink_core::similarity::{score, Candidate};
use trialink_core::{
    Error, MethodConfig, NctId, Pmid, RankedCandidates, Ranker, Result, WeightedVector,
};

/// Scores every article pairwise and sorts. No index, no shortcuts.
pub struct BruteForce<'a> {
    pub articles: &'a [(Pmid, WeightedVector)],
}

impl Ranker for BruteForce<'_> {
    fn rank(
        &self,
        nct_id: &NctId,
        query: &WeightedVector,
        config: MethodConfig,
        k: Option<usize>,
    ) -> Result<RankedCandidates> {
        if query.is_empty() {
            return Err(Error::Unrankable(nct_id.to_string()));
        }
        let mut ranking = Vec::with_capacity(self.articles.len());
        for (pmid, a) in self.articles {
            match score(config.measure, query, a) {
                Ok(s) => ranking.push(Candidate {
                    pmid: *pmid,
                    score: s,
                }),
                Err(Error::EmptyCandidate(_)) => {}
                Err(e) => return Err(e),
            }
        }
        ranking.sort_by(|a, b| config.measure.compare((a.score, a.pmid), (b.score, b.pmid)));
        if let Some(k) = k {
            ranking.truncate(k);
        }
        Ok(RankedCandidates {
            nct_id: nct_id.clone(),
            config,
            ranking,
            truncated_at: k,
        })
    }
}

/// First difference between two rankings, if any: order must match exactly
/// and scores within `tol`.
pub fn ranking_mismatch(a: &RankedCandidates, b: &RankedCandidates, tol: f64) -> Option<String> {
    if a.ranking.len() != b.ranking.len() {
        return Some(format!(
            "{}: {} vs {} candidates",
            a.nct_id,
            a.ranking.len(),
            b.ranking.len()
        ));
    }
    for (i, (x, y)) in a.ranking.iter().zip(&b.ranking).enumerate() {
        if x.pmid != y.pmid {
            return Some(format!(
                "{} {}: position {} holds {} vs {}",
                a.nct_id,
                a.config,
                i + 1,
                x.pmid,
                y.pmid
            ));
        }
        if (x.score - y.score).abs() > tol {
            return Some(format!(
                "{} {}: pmid {} scores {} vs {}",
                a.nct_id, a.config, x.pmid, x.score, y.score
            ));
        }
    }
    None
}
