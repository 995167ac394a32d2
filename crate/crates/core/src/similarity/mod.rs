//! Pairwise measures, method configurations and per-registration ranking.

mod index;
mod persist;

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Representation;
use crate::ingest::{NctId, Pmid};
use crate::weighting::{Scheme, WeightedVector};

pub use index::InvertedIndex;
pub use persist::INDEX_FORMAT_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    #[serde(alias = "euclidean")]
    EuclideanNormalized,
    Jaccard,
    Cosine,
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::EuclideanNormalized => "euclidean_normalized",
            Measure::Jaccard => "jaccard",
            Measure::Cosine => "cosine",
        }
    }

    /// Cosine is a similarity (higher first); the others are distances.
    pub fn higher_is_better(self) -> bool {
        self == Measure::Cosine
    }

    /// Orders two scored candidates best-first, ties by ascending pmid.
    pub fn compare(self, a: (f64, Pmid), b: (f64, Pmid)) -> Ordering {
        let by_score = if self.higher_is_better() {
            b.0.total_cmp(&a.0)
        } else {
            a.0.total_cmp(&b.0)
        };
        by_score.then(a.1.cmp(&b.1))
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "cosine" => Ok(Measure::Cosine),
            "jaccard" => Ok(Measure::Jaccard),
            "euclidean" | "euclidean_normalized" => Ok(Measure::EuclideanNormalized),
            _ => Err(Error::InvalidConfig(format!("unknown measure {s:?}"))),
        }
    }
}

/// One representation × weighting × measure combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MethodConfig {
    pub representation: Representation,
    pub scheme: Scheme,
    pub measure: Measure,
}

impl MethodConfig {
    /// Jaccard is only defined over binary vectors.
    pub fn new(representation: Representation, scheme: Scheme, measure: Measure) -> Result<Self> {
        if measure == Measure::Jaccard && scheme != Scheme::Binary {
            return Err(Error::InvalidConfig(
                "jaccard requires the binary scheme".into(),
            ));
        }
        Ok(MethodConfig {
            representation,
            scheme,
            measure,
        })
    }

    /// The ten legal combinations in results-table order: per representation,
    /// binary {euclidean, jaccard, cosine} then tf-idf {euclidean, cosine}.
    pub fn all_legal() -> Vec<MethodConfig> {
        let mut out = Vec::with_capacity(10);
        for representation in Representation::ALL {
            for scheme in Scheme::ALL {
                for measure in [
                    Measure::EuclideanNormalized,
                    Measure::Jaccard,
                    Measure::Cosine,
                ] {
                    if let Ok(c) = MethodConfig::new(representation, scheme, measure) {
                        out.push(c);
                    }
                }
            }
        }
        out
    }

    /// `term-tfidf-cosine` style label, also accepted by `FromStr`.
    pub fn slug(&self) -> String {
        format!("{}-{}-{}", self.representation, self.scheme, self.measure)
    }
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            representation: Representation::Term,
            scheme: Scheme::Tfidf,
            measure: Measure::Cosine,
        }
    }
}

impl fmt::Display for MethodConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.slug())
    }
}

impl FromStr for MethodConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.splitn(3, '-').collect();
        match parts.as_slice() {
            [r, sch, m] => MethodConfig::new(r.parse()?, sch.parse()?, m.parse()?),
            _ => Err(Error::InvalidConfig(format!(
                "expected representation-scheme-measure, got {s:?}"
            ))),
        }
    }
}

/// Dot product by merge join over both sorted entry lists.
pub fn dot(a: &WeightedVector, b: &WeightedVector) -> f64 {
    let (x, y) = (a.entries(), b.entries());
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < x.len() && j < y.len() {
        match x[i].0.cmp(&y[j].0) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                acc += x[i].1 * y[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

pub(crate) fn cosine_from_parts(dot: f64, sq_a: f64, sq_b: f64) -> f64 {
    if sq_a == 0.0 || sq_b == 0.0 {
        0.0
    } else {
        (dot / (sq_a.sqrt() * sq_b.sqrt())).min(1.0)
    }
}

pub(crate) fn jaccard_from_parts(shared: f64, n_a: usize, n_b: usize) -> f64 {
    let union = (n_a + n_b) as f64 - shared;
    if union == 0.0 {
        1.0
    } else {
        1.0 - shared / union
    }
}

pub(crate) fn euclidean_from_parts(
    dot: f64,
    sq_query: f64,
    sq_article: f64,
    n_article: usize,
) -> f64 {
    (sq_query + sq_article - 2.0 * dot).max(0.0).sqrt() / n_article as f64
}

/// Cosine of the angle between the vectors; 0 when either is zero.
pub fn cosine_similarity(query: &WeightedVector, candidate: &WeightedVector) -> f64 {
    cosine_from_parts(
        dot(query, candidate),
        query.squared_norm(),
        candidate.squared_norm(),
    )
}

/// `1 − |shared| / |either|` over feature supports; 1 when both are empty.
pub fn jaccard_distance(query: &WeightedVector, candidate: &WeightedVector) -> Result<f64> {
    if query.scheme() != Scheme::Binary || candidate.scheme() != Scheme::Binary {
        return Err(Error::NonBinaryVector);
    }
    Ok(jaccard_from_parts(
        dot(query, candidate),
        query.n_features_present(),
        candidate.n_features_present(),
    ))
}

/// Euclidean distance divided by the number of features present in the
/// candidate article. Computed as `‖q‖² + ‖a‖² − 2·q·a` so the indexed
/// ranker, which only sees shared features, reproduces it exactly.
pub fn euclidean_normalized(query: &WeightedVector, candidate: &WeightedVector) -> Result<f64> {
    let n = candidate.n_features_present();
    if n == 0 {
        return Err(Error::EmptyCandidate(candidate.doc_id().to_string()));
    }
    Ok(euclidean_from_parts(
        dot(query, candidate),
        query.squared_norm(),
        candidate.squared_norm(),
        n,
    ))
}

/// Scores one pair under `measure`.
pub fn score(measure: Measure, query: &WeightedVector, candidate: &WeightedVector) -> Result<f64> {
    match measure {
        Measure::Cosine => Ok(cosine_similarity(query, candidate)),
        Measure::Jaccard => jaccard_distance(query, candidate),
        Measure::EuclideanNormalized => euclidean_normalized(query, candidate),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub pmid: Pmid,
    pub score: f64,
}

/// Best-first ranking of articles for one registration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidates {
    pub nct_id: NctId,
    pub config: MethodConfig,
    pub ranking: Vec<Candidate>,
    pub truncated_at: Option<usize>,
}

#[derive(Serialize)]
struct RankingRow<'a> {
    nct_id: &'a NctId,
    rank: usize,
    pmid: Pmid,
    score: f64,
}

impl RankedCandidates {
    /// 1-based position of `pmid`, if ranked.
    pub fn position_of(&self, pmid: Pmid) -> Option<usize> {
        self.ranking
            .iter()
            .position(|c| c.pmid == pmid)
            .map(|p| p + 1)
    }

    /// Rows `nct_id<TAB>rank<TAB>pmid<TAB>score`, no header.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, c) in self.ranking.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{}", self.nct_id, i + 1, c.pmid, c.score)?;
        }
        Ok(())
    }

    /// One JSON object per row with the TSV's fields.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, c) in self.ranking.iter().enumerate() {
            serde_json::to_writer(
                &mut out,
                &RankingRow {
                    nct_id: &self.nct_id,
                    rank: i + 1,
                    pmid: c.pmid,
                    score: c.score,
                },
            )?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub const RANKING_TSV_HEADER: &str = "nct_id\trank\tpmid\tscore";

/// Anything that can rank the article corpus for a registration vector.
pub trait Ranker {
    fn rank(
        &self,
        nct_id: &NctId,
        query: &WeightedVector,
        config: MethodConfig,
        k: Option<usize>,
    ) -> Result<RankedCandidates>;

    /// 1-based rank of `target`, or `None` when it is not ranked at all.
    fn rank_of(
        &self,
        nct_id: &NctId,
        query: &WeightedVector,
        config: MethodConfig,
        target: Pmid,
    ) -> Result<Option<usize>> {
        Ok(self.rank(nct_id, query, config, None)?.position_of(target))
    }
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bin(ids: &[u32]) -> WeightedVector {
        WeightedVector::new("v", Scheme::Binary, ids.iter().map(|&i| (i, 1.0)).collect()).unwrap()
    }

    fn tf(entries: &[(u32, f64)]) -> WeightedVector {
        WeightedVector::new("v", Scheme::Tfidf, entries.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let v = tf(&[(0, 0.3), (4, 1.7), (9, 2.2)]);
        assert!((cosine_similarity(&v, &v) - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&bin(&[0, 1]), &bin(&[2, 3])), 0.0);
        assert!((cosine_similarity(&bin(&[0, 1]), &bin(&[0, 2])) - 0.5).abs() < 1e-15);
        assert_eq!(cosine_similarity(&bin(&[]), &bin(&[1])), 0.0);
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(
            jaccard_distance(&bin(&[1, 2, 3]), &bin(&[1, 2, 3])).unwrap(),
            0.0
        );
        assert_eq!(jaccard_distance(&bin(&[1, 2]), &bin(&[3, 4])).unwrap(), 1.0);
        assert_eq!(
            jaccard_distance(&bin(&[0, 1, 2]), &bin(&[1, 2, 3])).unwrap(),
            0.5
        );
        assert_eq!(jaccard_distance(&bin(&[]), &bin(&[])).unwrap(), 1.0);
        assert!(matches!(
            jaccard_distance(&tf(&[(1, 0.5)]), &bin(&[1])),
            Err(Error::NonBinaryVector)
        ));
    }

    #[test]
    fn euclidean_examples() {
        let v = tf(&[(0, 0.3), (4, 1.7)]);
        assert_eq!(euclidean_normalized(&v, &v).unwrap(), 0.0);
        assert!((euclidean_normalized(&bin(&[0]), &bin(&[1])).unwrap() - 1.414214).abs() < 5e-7);
        assert!(
            (euclidean_normalized(&bin(&[0, 1]), &bin(&[0, 2, 3])).unwrap() - 0.577350).abs()
                < 5e-7
        );
        assert!(matches!(
            euclidean_normalized(&bin(&[0]), &bin(&[])),
            Err(Error::EmptyCandidate(_))
        ));
    }

    #[test]
    fn euclidean_normalizer_is_the_article_side() {
        let a = bin(&[0, 1]);
        let b = bin(&[0, 2, 3]);
        assert_ne!(
            euclidean_normalized(&a, &b).unwrap(),
            euclidean_normalized(&b, &a).unwrap()
        );
    }

    #[test]
    fn config_rules() {
        assert!(MethodConfig::new(Representation::Term, Scheme::Tfidf, Measure::Jaccard).is_err());
        let all = MethodConfig::all_legal();
        assert_eq!(all.len(), 10);
        assert_eq!(all[0].slug(), "term-binary-euclidean_normalized");
        assert_eq!(all[4].slug(), "term-tfidf-cosine");
        for c in &all {
            assert_eq!(c.slug().parse::<MethodConfig>().unwrap(), *c);
        }
        assert_eq!(
            "concept-binary-euclidean"
                .parse::<MethodConfig>()
                .unwrap()
                .measure,
            Measure::EuclideanNormalized
        );
        assert!("term-tfidf-jaccard".parse::<MethodConfig>().is_err());
    }

    #[test]
    fn ordering_direction_and_ties() {
        let c = Measure::Cosine;
        assert_eq!(c.compare((0.9, Pmid(5)), (0.1, Pmid(1))), Ordering::Less);
        assert_eq!(c.compare((0.5, Pmid(2)), (0.5, Pmid(10))), Ordering::Less);
        let j = Measure::Jaccard;
        assert_eq!(j.compare((0.1, Pmid(5)), (0.9, Pmid(1))), Ordering::Less);
        assert_eq!(
            j.compare((1.0, Pmid(10)), (1.0, Pmid(2))),
            Ordering::Greater
        );
    }

    #[test]
    fn tsv_and_jsonl_rows() {
        let r = RankedCandidates {
            nct_id: NctId::new("NCT00000001").unwrap(),
            config: MethodConfig::default(),
            ranking: vec![
                Candidate {
                    pmid: Pmid(7),
                    score: 0.5,
                },
                Candidate {
                    pmid: Pmid(3),
                    score: 0.25,
                },
            ],
            truncated_at: None,
        };
        let mut tsv = Vec::new();
        r.write_tsv(&mut tsv).unwrap();
        assert_eq!(
            String::from_utf8(tsv).unwrap(),
            "NCT00000001\t1\t7\t0.5\nNCT00000001\t2\t3\t0.25\n"
        );
        let mut jsonl = Vec::new();
        r.write_jsonl(&mut jsonl).unwrap();
        assert!(String::from_utf8(jsonl)
            .unwrap()
            .starts_with("{\"nct_id\":\"NCT00000001\",\"rank\":1,\"pmid\":\"7\",\"score\":0.5}\n"));
        assert_eq!(r.position_of(Pmid(3)), Some(2));
        assert_eq!(r.position_of(Pmid(4)), None);
    }

    fn sparse(max_index: u32, max_len: usize) -> impl Strategy<Value = Vec<(u32, f64)>> {
        proptest::collection::btree_map(0..max_index, 0.01f64..10.0, 0..max_len)
            .prop_map(|m| m.into_iter().collect())
    }

    fn support(max_index: u32, max_len: usize) -> impl Strategy<Value = Vec<u32>> {
        proptest::collection::btree_set(0..max_index, 0..max_len)
            .prop_map(|s| s.into_iter().collect())
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_bounded(a in sparse(40, 20), b in sparse(40, 20)) {
            let (a, b) = (tf(&a), tf(&b));
            let ab = cosine_similarity(&a, &b);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((ab - cosine_similarity(&b, &a)).abs() < 1e-15);
        }

        #[test]
        fn jaccard_symmetric_bounded_identity(a in support(30, 15), b in support(30, 15)) {
            let (va, vb) = (bin(&a), bin(&b));
            let d = jaccard_distance(&va, &vb).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(d, jaccard_distance(&vb, &va).unwrap());
            prop_assert_eq!(d == 0.0, a == b && !a.is_empty());
        }

        #[test]
        fn euclidean_identity_matches_direct_difference(a in sparse(40, 20), b in sparse(40, 20)) {
            prop_assume!(!b.is_empty());
            let (va, vb) = (tf(&a), tf(&b));
            let via_identity = euclidean_normalized(&va, &vb).unwrap();
            let mut direct = 0.0;
            for i in 0..40u32 {
                let d = va.weight(i) - vb.weight(i);
                direct += d * d;
            }
            let direct = direct.sqrt() / vb.n_features_present() as f64;
            let scale = (va.squared_norm() + vb.squared_norm()).sqrt();
            prop_assert!((via_identity - direct).abs() <= 1e-9 * scale.max(1.0));
            prop_assert_eq!(via_identity == 0.0, a == b);
        }
    }
}
