//! Engine over a synthetic corpus, with JSON-friendly views for the page.

use std::collections::HashMap;

use serde::Serialize;
use trialink_core::evaluation::{Benchmark, BenchmarkKind, CurveGrid, EvalReport};
use trialink_core::features::{extract_concept_features, extract_term_features, project, tokenize};
use trialink_core::similarity::Ranker;
use trialink_core::synth::{generate, SynthConfig};
use trialink_core::weighting::weigh;
use trialink_core::{
    ConceptLexicon, Engine, Error, MethodConfig, NctId, Pmid, PruningRule, Representation, Result,
    Scheme, WeightedVector,
};

/// Placeholder id for free-text queries; never a real registration.
const FREE_TEXT_ID: &str = "NCT00000000";

pub struct Demo {
    engine: Engine,
    lexicon: ConceptLexicon,
    planted: HashMap<NctId, Pmid>,
}

#[derive(Debug, Serialize)]
pub struct RegistrationView {
    pub nct_id: String,
    pub title: String,
    pub planted_pmid: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct FeatureRow {
    pub feature: String,
    pub tf: u32,
    pub df: u32,
    pub binary: f64,
    pub tfidf: f64,
}

#[derive(Debug, Serialize)]
pub struct Exploration {
    pub representation: Representation,
    pub tokens: usize,
    pub vocabulary_size: usize,
    pub n_articles: u32,
    pub kept: Vec<FeatureRow>,
    /// Extracted but pruned from the shared vocabulary.
    pub dropped: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct RankRow {
    pub rank: usize,
    pub pmid: String,
    pub score: f64,
    pub title: String,
    pub planted: bool,
}

#[derive(Debug, Serialize)]
pub struct Ranking {
    pub config: String,
    pub higher_is_better: bool,
    /// Rank of the planted article in the full ranking, if it was ranked.
    pub planted_rank: Option<usize>,
    pub rows: Vec<RankRow>,
}

#[derive(Debug, Serialize)]
pub struct CurveSummary {
    pub config: String,
    pub median_rank: f64,
    pub first_ranked_pct: f64,
    pub recall_at_50_pct: f64,
    pub points: Vec<(usize, f64)>,
}

impl Demo {
    pub fn new(seed: u64, n_articles: usize, n_registrations: usize) -> Result<Demo> {
        let corpus = generate(&SynthConfig {
            seed,
            n_articles,
            n_registrations,
            ..SynthConfig::default()
        })?;
        let planted = corpus
            .planted
            .iter()
            .map(|l| (l.nct_id.clone(), l.pmid))
            .collect();
        let engine = Engine::new(
            corpus.registrations,
            corpus.articles,
            Some(&corpus.lexicon),
            PruningRule::default(),
        )?;
        Ok(Demo {
            engine,
            lexicon: corpus.lexicon,
            planted,
        })
    }

    pub fn registrations(&self) -> Vec<RegistrationView> {
        self.engine
            .registrations()
            .iter()
            .map(|r| RegistrationView {
                nct_id: r.nct_id.to_string(),
                title: r.brief_title.clone(),
                planted_pmid: self.planted.get(&r.nct_id).map(Pmid::to_string),
            })
            .collect()
    }

    /// Registration text, for prefilling the query box.
    pub fn registration_text(&self, nct_id: &str) -> Result<String> {
        let id = NctId::new(nct_id)?;
        let reg = self
            .engine
            .registration(&id)
            .ok_or_else(|| Error::UnknownRegistration(nct_id.to_string()))?;
        Ok(reg
            .text_fields()
            .into_iter()
            .filter(|f| !f.is_empty())
            .collect::<Vec<_>>()
            .join("\n"))
    }

    /// Features of free text as the registration side would see them.
    pub fn explore(&self, text: &str, representation: Representation) -> Result<Exploration> {
        let vocab = self.engine.vocabulary(representation)?;
        let doc = match representation {
            Representation::Term => extract_term_features(FREE_TEXT_ID, &[text]),
            Representation::Concept => {
                extract_concept_features(FREE_TEXT_ID, &[text], &self.lexicon)
            }
        };
        let projected = project(&doc, vocab);
        let tfidf = weigh(&projected, vocab, Scheme::Tfidf)?;
        let mut kept: Vec<FeatureRow> = projected
            .counts
            .iter()
            .map(|&(i, tf)| FeatureRow {
                feature: vocab.key(i).unwrap_or_default().to_string(),
                tf,
                df: vocab.doc_frequency(i),
                binary: 1.0,
                tfidf: tfidf.weight(i),
            })
            .collect();
        kept.sort_by(|a, b| {
            b.tfidf
                .total_cmp(&a.tfidf)
                .then_with(|| a.feature.cmp(&b.feature))
        });
        let dropped = doc
            .counts
            .keys()
            .filter(|k| vocab.index_of(k).is_none())
            .cloned()
            .collect();
        Ok(Exploration {
            representation,
            tokens: tokenize(text).len(),
            vocabulary_size: vocab.len(),
            n_articles: vocab.n_articles(),
            kept,
            dropped,
        })
    }

    /// Ranks articles against free text. `planted_for` marks that
    /// registration's planted article in the output.
    pub fn rank_text(
        &self,
        text: &str,
        config: MethodConfig,
        k: usize,
        planted_for: Option<&str>,
    ) -> Result<Ranking> {
        let vocab = self.engine.vocabulary(config.representation)?;
        let doc = match config.representation {
            Representation::Term => extract_term_features(FREE_TEXT_ID, &[text]),
            Representation::Concept => {
                extract_concept_features(FREE_TEXT_ID, &[text], &self.lexicon)
            }
        };
        let query = weigh(&project(&doc, vocab), vocab, config.scheme)?;
        let planted = match planted_for {
            Some(id) => self.planted.get(&NctId::new(id)?).copied(),
            None => None,
        };
        self.ranking(&query, config, k, planted)
    }

    pub fn rank(&self, nct_id: &str, config: MethodConfig, k: usize) -> Result<Ranking> {
        let id = NctId::new(nct_id)?;
        let query = self
            .engine
            .query_vector(&id, config.representation, config.scheme)?;
        self.ranking(query, config, k, self.planted.get(&id).copied())
    }

    fn ranking(
        &self,
        query: &WeightedVector,
        config: MethodConfig,
        k: usize,
        planted: Option<Pmid>,
    ) -> Result<Ranking> {
        let id = NctId::new(FREE_TEXT_ID)?;
        let full = self.engine.index(config)?.rank(&id, query, config, None)?;
        let planted_rank = planted
            .and_then(|p| full.ranking.iter().position(|c| c.pmid == p))
            .map(|i| i + 1);
        let rows = full
            .ranking
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, c)| RankRow {
                rank: i + 1,
                pmid: c.pmid.to_string(),
                score: c.score,
                title: self
                    .engine
                    .article(c.pmid)
                    .map(|a| a.title.clone())
                    .unwrap_or_default(),
                planted: Some(c.pmid) == planted,
            })
            .collect();
        Ok(Ranking {
            config: config.slug(),
            higher_is_better: config.measure.higher_is_better(),
            planted_rank,
            rows,
        })
    }

    /// Planted-link recall curves for every legal configuration.
    pub fn curves(&self, max_n: usize) -> Result<Vec<CurveSummary>> {
        let links = self
            .planted
            .iter()
            .map(|(n, p)| trialink_core::ReportedLink {
                nct_id: n.clone(),
                pmid: *p,
            })
            .collect();
        let targets =
            self.engine
                .targets(&Benchmark::new("planted", BenchmarkKind::Curated, links));
        let grid = CurveGrid::Explicit((1..=max_n.max(1)).collect());
        self.engine
            .configs()
            .into_iter()
            .map(|config| {
                let report: EvalReport = self.engine.evaluate(&targets, config, &grid)?;
                Ok(CurveSummary {
                    config: config.slug(),
                    median_rank: report.median_rank,
                    first_ranked_pct: report.first_ranked_pct,
                    recall_at_50_pct: report.recall_at_50_pct,
                    points: report
                        .recall_curve
                        .iter()
                        .map(|p| (p.n, p.recall))
                        .collect(),
                })
            })
            .collect()
    }
}
