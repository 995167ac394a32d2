use std::cmp::Ordering;

use super::{
    cosine_from_parts, euclidean_from_parts, jaccard_from_parts, Candidate, Measure, MethodConfig,
    RankedCandidates, Ranker,
};
use crate::error::{Error, Result};
use crate::features::Vocabulary;
use crate::ingest::{NctId, Pmid};
use crate::weighting::WeightedVector;

/// Immutable inverted index over the article vectors of one vector space.
///
/// Article slots are ordered by ascending pmid, so slot order is the ranking
/// tie-break. Postings are stored CSR-style per feature index.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    pub(super) config: MethodConfig,
    pub(super) vocab_digest: [u8; 32],
    pub(super) pmids: Vec<Pmid>,
    pub(super) sq_norms: Vec<f64>,
    pub(super) n_present: Vec<u32>,
    pub(super) offsets: Vec<u64>,
    pub(super) post_slots: Vec<u32>,
    pub(super) post_weights: Vec<f64>,
}

impl InvertedIndex {
    /// Builds the index for `config` from every article vector of the corpus.
    pub fn build(
        articles: &[(Pmid, WeightedVector)],
        vocab: &Vocabulary,
        config: MethodConfig,
    ) -> Result<Self> {
        if articles.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if vocab.representation() != config.representation {
            return Err(Error::SpaceMismatch(format!(
                "vocabulary is {}, config is {}",
                vocab.representation(),
                config.representation
            )));
        }
        MethodConfig::new(config.representation, config.scheme, config.measure)?;

        let mut order: Vec<usize> = (0..articles.len()).collect();
        order.sort_by_key(|&i| articles[i].0);
        if let Some(w) = order
            .windows(2)
            .find(|w| articles[w[0]].0 == articles[w[1]].0)
        {
            return Err(Error::DuplicateId(articles[w[0]].0.to_string()));
        }

        let n_features = vocab.len();
        let mut counts = vec![0u64; n_features + 1];
        for (pmid, v) in articles {
            if v.scheme() != config.scheme {
                return Err(Error::SpaceMismatch(format!(
                    "article {pmid} is {}, config is {}",
                    v.scheme(),
                    config.scheme
                )));
            }
            for &(f, _) in v.entries() {
                let f = f as usize;
                if f >= n_features {
                    return Err(Error::SpaceMismatch(format!(
                        "article {pmid} has feature {f} outside the vocabulary"
                    )));
                }
                counts[f + 1] += 1;
            }
        }
        let mut offsets = counts;
        for i in 1..offsets.len() {
            offsets[i] += offsets[i - 1];
        }
        let total = offsets[n_features] as usize;
        let mut post_slots = vec![0u32; total];
        let mut post_weights = vec![0f64; total];
        let mut cursor: Vec<u64> = offsets[..n_features].to_vec();

        let mut pmids = Vec::with_capacity(articles.len());
        let mut sq_norms = Vec::with_capacity(articles.len());
        let mut n_present = Vec::with_capacity(articles.len());
        let mut empty = Vec::new();
        for (slot, &i) in order.iter().enumerate() {
            let (pmid, v) = &articles[i];
            pmids.push(*pmid);
            sq_norms.push(v.squared_norm());
            n_present.push(v.n_features_present() as u32);
            if v.is_empty() {
                empty.push(*pmid);
            }
            for &(f, w) in v.entries() {
                let at = cursor[f as usize] as usize;
                post_slots[at] = slot as u32;
                post_weights[at] = w;
                cursor[f as usize] += 1;
            }
        }
        if !empty.is_empty() {
            log::info!(
                "{}: {} articles have no features in this space{}",
                config,
                empty.len(),
                if config.measure == Measure::EuclideanNormalized {
                    " and are excluded from rankings"
                } else {
                    ""
                }
            );
        }
        Ok(InvertedIndex {
            config,
            vocab_digest: vocab.digest(),
            pmids,
            sq_norms,
            n_present,
            offsets,
            post_slots,
            post_weights,
        })
    }

    pub fn config(&self) -> MethodConfig {
        self.config
    }

    pub fn vocab_digest(&self) -> [u8; 32] {
        self.vocab_digest
    }

    pub fn n_articles(&self) -> usize {
        self.pmids.len()
    }

    pub fn n_features(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn pmids(&self) -> &[Pmid] {
        &self.pmids
    }

    /// Postings of one feature as (pmid, weight).
    pub fn postings(&self, feature: u32) -> impl Iterator<Item = (Pmid, f64)> + '_ {
        let (lo, hi) = self.posting_range(feature);
        (lo..hi).map(move |p| {
            (
                self.pmids[self.post_slots[p] as usize],
                self.post_weights[p],
            )
        })
    }

    /// Articles with no feature in this space. Euclidean rankings skip them.
    pub fn empty_articles(&self) -> Vec<Pmid> {
        self.n_present
            .iter()
            .zip(&self.pmids)
            .filter(|(n, _)| **n == 0)
            .map(|(_, p)| *p)
            .collect()
    }

    fn posting_range(&self, feature: u32) -> (usize, usize) {
        let f = feature as usize;
        if f + 1 >= self.offsets.len() {
            return (0, 0);
        }
        (self.offsets[f] as usize, self.offsets[f + 1] as usize)
    }

    fn check_query(
        &self,
        nct_id: &NctId,
        query: &WeightedVector,
        config: MethodConfig,
    ) -> Result<()> {
        MethodConfig::new(config.representation, config.scheme, config.measure)?;
        if config.representation != self.config.representation
            || config.scheme != self.config.scheme
        {
            return Err(Error::SpaceMismatch(format!(
                "index holds {}, asked for {}",
                self.config, config
            )));
        }
        if query.scheme() != config.scheme {
            return Err(Error::SpaceMismatch(format!(
                "query {} is {}, config is {}",
                nct_id,
                query.scheme(),
                config.scheme
            )));
        }
        if query.is_empty() {
            return Err(Error::Unrankable(nct_id.to_string()));
        }
        Ok(())
    }

    /// Score per slot; `None` for slots the measure cannot rank.
    fn scores(&self, query: &WeightedVector, measure: Measure) -> Vec<Option<f64>> {
        // Each slot accumulates its products in ascending feature order, the
        // same order as the pairwise merge join.
        let mut dots = vec![0f64; self.pmids.len()];
        for &(f, qw) in query.entries() {
            let (lo, hi) = self.posting_range(f);
            for p in lo..hi {
                dots[self.post_slots[p] as usize] += qw * self.post_weights[p];
            }
        }
        let q_sq = query.squared_norm();
        let q_n = query.n_features_present();
        dots.iter()
            .enumerate()
            .map(|(slot, &d)| {
                let n = self.n_present[slot] as usize;
                match measure {
                    Measure::Cosine => Some(cosine_from_parts(d, q_sq, self.sq_norms[slot])),
                    Measure::Jaccard => Some(jaccard_from_parts(d, q_n, n)),
                    Measure::EuclideanNormalized => {
                        (n > 0).then(|| euclidean_from_parts(d, q_sq, self.sq_norms[slot], n))
                    }
                }
            })
            .collect()
    }

    fn order(measure: Measure, a: &(f64, u32), b: &(f64, u32)) -> Ordering {
        // slot order is pmid order
        let by_score = if measure.higher_is_better() {
            b.0.total_cmp(&a.0)
        } else {
            a.0.total_cmp(&b.0)
        };
        by_score.then(a.1.cmp(&b.1))
    }
}

impl Ranker for InvertedIndex {
    fn rank(
        &self,
        nct_id: &NctId,
        query: &WeightedVector,
        config: MethodConfig,
        k: Option<usize>,
    ) -> Result<RankedCandidates> {
        self.check_query(nct_id, query, config)?;
        let measure = config.measure;
        let mut scored: Vec<(f64, u32)> = self
            .scores(query, measure)
            .into_iter()
            .enumerate()
            .filter_map(|(slot, s)| s.map(|s| (s, slot as u32)))
            .collect();
        let truncated_at = match k {
            Some(k) if k < scored.len() => {
                if k > 0 {
                    scored.select_nth_unstable_by(k - 1, |a, b| Self::order(measure, a, b));
                }
                scored.truncate(k);
                Some(k)
            }
            Some(k) => Some(k),
            None => None,
        };
        scored.sort_unstable_by(|a, b| Self::order(measure, a, b));
        Ok(RankedCandidates {
            nct_id: nct_id.clone(),
            config,
            ranking: scored
                .into_iter()
                .map(|(score, slot)| Candidate {
                    pmid: self.pmids[slot as usize],
                    score,
                })
                .collect(),
            truncated_at,
        })
    }

    /// Counts the slots ordered ahead of the target without sorting.
    fn rank_of(
        &self,
        nct_id: &NctId,
        query: &WeightedVector,
        config: MethodConfig,
        target: Pmid,
    ) -> Result<Option<usize>> {
        self.check_query(nct_id, query, config)?;
        let Ok(target_slot) = self.pmids.binary_search(&target) else {
            return Ok(None);
        };
        let scores = self.scores(query, config.measure);
        let Some(target_score) = scores[target_slot] else {
            return Ok(None);
        };
        let target_key = (target_score, target_slot as u32);
        let ahead = scores
            .iter()
            .enumerate()
            .filter(|(slot, s)| {
                s.is_some_and(|s| {
                    Self::order(config.measure, &(s, *slot as u32), &target_key) == Ordering::Less
                })
            })
            .count();
        Ok(Some(ahead + 1))
    }
}
