use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::features::{DocumentFeatures, Representation};

/// Number of features (value) having each total occurrence count (key).
pub type OccurrenceHistogram = BTreeMap<u64, u64>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusSide {
    pub n_documents: usize,
    pub n_features: usize,
    pub n_occurring_twice: usize,
    pub histogram: OccurrenceHistogram,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub representation: Representation,
    /// Distinct features across both corpora.
    pub n_features: usize,
    /// Features occurring at least twice in each corpus.
    pub n_retained: usize,
    pub registrations: CorpusSide,
    pub articles: CorpusSide,
}

fn occurrences(docs: &[DocumentFeatures]) -> HashMap<&str, u64> {
    let mut out = HashMap::new();
    for doc in docs {
        for (k, &n) in &doc.counts {
            *out.entry(k.as_str()).or_insert(0) += n as u64;
        }
    }
    out
}

fn side(docs: &[DocumentFeatures], occ: &HashMap<&str, u64>) -> CorpusSide {
    let mut histogram = OccurrenceHistogram::new();
    for &n in occ.values() {
        *histogram.entry(n).or_insert(0) += 1;
    }
    CorpusSide {
        n_documents: docs.len(),
        n_features: occ.len(),
        n_occurring_twice: occ.values().filter(|&&n| n >= 2).count(),
        histogram,
    }
}

/// Feature occurrence distributions per corpus for one representation.
pub fn corpus_stats(
    registrations: &[DocumentFeatures],
    articles: &[DocumentFeatures],
    representation: Representation,
) -> CorpusStats {
    let reg = occurrences(registrations);
    let art = occurrences(articles);
    let mut all: Vec<&str> = reg.keys().chain(art.keys()).copied().collect();
    all.sort_unstable();
    all.dedup();
    let n_retained = reg
        .iter()
        .filter(|(k, &n)| n >= 2 && art.get(*k).is_some_and(|&m| m >= 2))
        .count();
    CorpusStats {
        representation,
        n_features: all.len(),
        n_retained,
        registrations: side(registrations, &reg),
        articles: side(articles, &art),
    }
}

impl CorpusStats {
    /// Plot-ready histogram rows: `corpus,representation,occurrences,features`.
    pub fn write_histogram_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "corpus,representation,occurrences,features")?;
        for (name, side) in [
            ("registrations", &self.registrations),
            ("articles", &self.articles),
        ] {
            for (occ, n) in &side.histogram {
                writeln!(out, "{name},{},{occ},{n}", self.representation)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::extract_term_features;

    fn docs(texts: &[&str]) -> Vec<DocumentFeatures> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| extract_term_features(&i.to_string(), &[t]))
            .collect()
    }

    #[test]
    fn singletons_put_all_mass_at_one() {
        let s = corpus_stats(&docs(&["a b"]), &docs(&["c", "d e"]), Representation::Term);
        assert_eq!(s.registrations.histogram, [(1, 2)].into());
        assert_eq!(s.articles.histogram, [(1, 3)].into());
        assert_eq!(s.n_features, 5);
        assert_eq!(s.n_retained, 0);
    }

    #[test]
    fn shared_term_counts_twice() {
        let s = corpus_stats(
            &[],
            &docs(&["aspirin trial", "aspirin"]),
            Representation::Term,
        );
        assert_eq!(s.articles.histogram, [(1, 1), (2, 1)].into());
        assert_eq!(s.articles.n_occurring_twice, 1);
    }

    #[test]
    fn csv_layout() {
        let s = corpus_stats(&docs(&["a a"]), &docs(&["a"]), Representation::Term);
        let mut buf = Vec::new();
        s.write_histogram_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "corpus,representation,occurrences,features\nregistrations,term,2,1\narticles,term,1,1\n"
        );
    }
}
