//! Binary and tf-idf sparse vectors over a pruned vocabulary.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ProjectedFeatures, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Binary,
    Tfidf,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Binary, Scheme::Tfidf];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Binary => "binary",
            Scheme::Tfidf => "tfidf",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "binary" => Ok(Scheme::Binary),
            "tfidf" => Ok(Scheme::Tfidf),
            _ => Err(Error::InvalidConfig(format!(
                "unknown weighting scheme {s:?}"
            ))),
        }
    }
}

/// Sparse weighted vector with entries strictly sorted by feature index and
/// no zero weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedVector {
    doc_id: String,
    scheme: Scheme,
    entries: Vec<(u32, f64)>,
    sq_norm: f64,
    norm: f64,
}

/// Sum of squared weights, accumulated in ascending index order. Every
/// distance computation in the crate derives norms from this one routine.
pub(crate) fn squared_norm(entries: &[(u32, f64)]) -> f64 {
    entries.iter().fold(0.0, |acc, &(_, w)| acc + w * w)
}

impl WeightedVector {
    /// Builds a vector from raw entries. Zero weights are dropped; unsorted,
    /// duplicated, negative or non-finite entries are rejected, as is a binary
    /// vector with a weight other than 1.
    pub fn new(
        doc_id: impl Into<String>,
        scheme: Scheme,
        entries: Vec<(u32, f64)>,
    ) -> Result<Self> {
        let doc_id = doc_id.into();
        let entries: Vec<(u32, f64)> = entries.into_iter().filter(|&(_, w)| w != 0.0).collect();
        for pair in entries.windows(2) {
            if pair[0].0 >= pair[1].0 {
                return Err(Error::InvalidConfig(format!(
                    "{doc_id}: entries not strictly sorted by index"
                )));
            }
        }
        for &(i, w) in &entries {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{doc_id}: bad weight {w} at {i}"
                )));
            }
            if scheme == Scheme::Binary && w != 1.0 {
                return Err(Error::NonBinaryVector);
            }
        }
        let sq_norm = squared_norm(&entries);
        Ok(WeightedVector {
            doc_id,
            scheme,
            entries,
            sq_norm,
            norm: sq_norm.sqrt(),
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn squared_norm(&self) -> f64 {
        self.sq_norm
    }

    pub fn n_features_present(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weight(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    /// The same vector with every weight multiplied by `factor` (> 0). The
    /// result is tagged tf-idf unless the factor is exactly 1.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "scale factor {factor} must be positive"
            )));
        }
        let scheme = if factor == 1.0 {
            self.scheme
        } else {
            Scheme::Tfidf
        };
        WeightedVector::new(
            self.doc_id.clone(),
            scheme,
            self.entries.iter().map(|&(i, w)| (i, w * factor)).collect(),
        )
    }

    /// Debug dump line: `{doc_id, scheme, entries: [[index, weight]...]}`.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Dump<'a> {
            doc_id: &'a str,
            scheme: Scheme,
            entries: &'a [(u32, f64)],
        }
        serde_json::to_writer(
            &mut out,
            &Dump {
                doc_id: &self.doc_id,
                scheme: self.scheme,
                entries: &self.entries,
            },
        )?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

pub fn binary_vector(features: &ProjectedFeatures) -> WeightedVector {
    let entries = features.counts.iter().map(|&(i, _)| (i, 1.0)).collect();
    WeightedVector::new(features.doc_id.clone(), Scheme::Binary, entries)
        .expect("projected features are sorted")
}

/// `(1 + ln tf) · ln(n_articles / df)`.
pub fn tfidf_weight(tf: u32, df: u32, n_articles: u32) -> Result<f64> {
    if df == 0 {
        return Err(Error::ZeroDocumentFrequency(0));
    }
    if tf == 0 || df > n_articles {
        return Err(Error::InvalidConfig(format!(
            "tf-idf needs tf ≥ 1 and df ≤ N (tf={tf}, df={df}, N={n_articles})"
        )));
    }
    Ok((1.0 + (tf as f64).ln()) * (n_articles as f64 / df as f64).ln())
}

/// tf-idf vector using the article-corpus document frequencies held by
/// `vocab`, for registrations and articles alike.
pub fn tfidf_vector(features: &ProjectedFeatures, vocab: &Vocabulary) -> Result<WeightedVector> {
    let n = vocab.n_articles();
    let entries = features
        .counts
        .iter()
        .map(|&(i, tf)| {
            let df = vocab.doc_frequency(i);
            if df == 0 {
                return Err(Error::ZeroDocumentFrequency(i));
            }
            tfidf_weight(tf, df, n).map(|w| (i, w))
        })
        .collect::<Result<Vec<_>>>()?;
    WeightedVector::new(features.doc_id.clone(), Scheme::Tfidf, entries)
}

pub fn weigh(
    features: &ProjectedFeatures,
    vocab: &Vocabulary,
    scheme: Scheme,
) -> Result<WeightedVector> {
    match scheme {
        Scheme::Binary => Ok(binary_vector(features)),
        Scheme::Tfidf => tfidf_vector(features, vocab),
    }
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use crate::features::{
        build_vocabulary, extract_term_features, project, PruningRule, Representation,
    };
    use proptest::prelude::*;

    fn projected(counts: &[(u32, u32)]) -> ProjectedFeatures {
        ProjectedFeatures {
            doc_id: "d".into(),
            counts: counts.to_vec(),
        }
    }

    #[test]
    fn binary_marks_presence_only() {
        let v = binary_vector(&projected(&[(0, 3), (1, 1)]));
        assert_eq!(v.entries(), &[(0, 1.0), (1, 1.0)]);
        assert_eq!(v.n_features_present(), 2);
        assert_eq!(v.norm(), 2f64.sqrt());
    }

    #[test]
    fn empty_binary_vector() {
        let v = binary_vector(&projected(&[]));
        assert!(v.is_empty());
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn binary_fixture() {
        let v = binary_vector(&projected(&[(2, 1), (5, 4), (9, 2)]));
        assert_eq!(v.entries(), &[(2, 1.0), (5, 1.0), (9, 1.0)]);
    }

    #[test]
    fn ubiquitous_feature_weighs_nothing() {
        assert_eq!(tfidf_weight(1, 10, 10).unwrap(), 0.0);
    }

    #[test]
    fn tfidf_hand_values() {
        assert!((tfidf_weight(1, 1, 10).unwrap() - 2.302585).abs() < 5e-7);
        assert!((tfidf_weight(3, 2, 4).unwrap() - 1.454647).abs() < 5e-7);
    }

    #[test]
    fn zero_df_is_an_error() {
        assert!(matches!(
            tfidf_weight(1, 0, 10),
            Err(Error::ZeroDocumentFrequency(_))
        ));
    }

    fn toy_vocab(n_articles: usize, df_of_a: usize) -> Vocabulary {
        // feature "a" in `df_of_a` articles, "b" in one article (twice), "c" in two
        let mut arts: Vec<String> = (0..n_articles).map(|_| String::from("z")).collect();
        for art in arts.iter_mut().take(df_of_a) {
            art.push_str(" a");
        }
        arts[0].push_str(" b b c");
        arts[1].push_str(" c");
        let arts: Vec<_> = arts
            .iter()
            .enumerate()
            .map(|(i, t)| extract_term_features(&i.to_string(), &[t]))
            .collect();
        let regs = vec![extract_term_features("r", &["a a b b c c"])];
        build_vocabulary(&regs, &arts, Representation::Term, PruningRule::Occurrence).unwrap()
    }

    #[test]
    fn all_ubiquitous_features_give_empty_vector() {
        let vocab = toy_vocab(4, 4);
        let idx = vocab.index_of("a").unwrap();
        let v = tfidf_vector(&projected(&[(idx, 2)]), &vocab).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn single_rare_feature() {
        let vocab = toy_vocab(10, 2);
        let b = vocab.index_of("b").unwrap();
        assert_eq!(vocab.doc_frequency(b), 1);
        let v = tfidf_vector(&projected(&[(b, 1)]), &vocab).unwrap();
        assert_eq!(v.entries().len(), 1);
        assert!((v.entries()[0].1 - 10f64.ln()).abs() < 1e-12);
        assert!((v.norm() - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn three_feature_fixture() {
        // N = 4: df(a)=3, df(b)=1, df(c)=2
        let vocab = toy_vocab(4, 3);
        let (a, b, c) = (
            vocab.index_of("a").unwrap(),
            vocab.index_of("b").unwrap(),
            vocab.index_of("c").unwrap(),
        );
        let doc = extract_term_features("q", &["a b b b c c"]);
        let v = tfidf_vector(&project(&doc, &vocab), &vocab).unwrap();
        // a: (1+ln1)·ln(4/3) = 0.287682; b: (1+ln3)·ln4 = 2.909294; c: (1+ln2)·ln2 = 1.173600
        let expected = [(a, 0.287682), (b, 2.909294), (c, 1.173600)];
        for (i, w) in expected {
            assert!(
                (v.weight(i) - w).abs() < 5e-7,
                "feature {i}: {} vs {w}",
                v.weight(i)
            );
        }
    }

    #[test]
    fn constructor_validates() {
        assert!(WeightedVector::new("d", Scheme::Tfidf, vec![(2, 1.0), (1, 1.0)]).is_err());
        assert!(WeightedVector::new("d", Scheme::Tfidf, vec![(1, 1.0), (1, 2.0)]).is_err());
        assert!(WeightedVector::new("d", Scheme::Tfidf, vec![(1, -1.0)]).is_err());
        assert!(WeightedVector::new("d", Scheme::Binary, vec![(1, 2.0)]).is_err());
        let v = WeightedVector::new("d", Scheme::Tfidf, vec![(1, 0.0), (2, 3.0)]).unwrap();
        assert_eq!(v.entries(), &[(2, 3.0)]);
    }

    #[test]
    fn dump_format() {
        let v = binary_vector(&projected(&[(3, 1)]));
        let mut buf = Vec::new();
        v.write_dump(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"doc_id\":\"d\",\"scheme\":\"binary\",\"entries\":[[3,1.0]]}\n"
        );
    }

    proptest! {
        #[test]
        fn weight_monotone_in_tf_and_df(tf in 1u32..1000, df in 1u32..999, extra in 1u32..1000) {
            let n = 1000;
            let base = tfidf_weight(tf, df, n).unwrap();
            prop_assert!(tfidf_weight(tf + 1, df, n).unwrap() >= base);
            let df2 = (df + extra).min(n);
            if df2 > df {
                prop_assert!(tfidf_weight(tf, df2, n).unwrap() < base);
            }
        }

        #[test]
        fn cached_norm_matches_recount(weights in proptest::collection::btree_map(0u32..500, 0.001f64..100.0, 0..60)) {
            let v = WeightedVector::new("d", Scheme::Tfidf, weights.into_iter().collect()).unwrap();
            let recount = v.entries().iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            prop_assert!((v.norm() - recount).abs() <= 1e-9 * recount.max(1e-300));
        }

        #[test]
        fn tfidf_support_within_binary_support(
            counts in proptest::collection::btree_map(0u32..4, 1u32..5, 0..4),
            df_a in 1usize..=4,
        ) {
            let vocab = toy_vocab(4, df_a);
            let counts: Vec<(u32, u32)> = counts.into_iter().filter(|(i, _)| (*i as usize) < vocab.len()).collect();
            let p = projected(&counts);
            let bin = binary_vector(&p);
            let tf = tfidf_vector(&p, &vocab).unwrap();
            let bin_support: Vec<u32> = bin.entries().iter().map(|e| e.0).collect();
            let tf_support: Vec<u32> = tf.entries().iter().map(|e| e.0).collect();
            prop_assert!(tf_support.iter().all(|i| bin_support.contains(i)));
            let any_ubiquitous = counts.iter().any(|&(i, _)| vocab.doc_frequency(i) == vocab.n_articles());
            prop_assert_eq!(tf_support == bin_support, !any_ubiquitous);
        }
    }
}
