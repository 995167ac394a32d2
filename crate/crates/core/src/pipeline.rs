//! Whole-corpus wiring: features, vocabularies, vectors and indexes for every
//! representation, built once and shared by the CLI, the service and tests.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::{self, Benchmark, CurveGrid, EvalReport, TargetSet};
use crate::features::{
    build_vocabulary, extract_concept_features, extract_term_features, project, ConceptLexicon,
    DocumentFeatures, PruningRule, Representation, Vocabulary,
};
use crate::ingest::{
    corpus_stats, extract_reported_links, Article, CorpusStats, LinkExtraction, NctId, Pmid,
    Registration,
};
use crate::similarity::{InvertedIndex, MethodConfig, RankedCandidates, Ranker};
use crate::weighting::{weigh, Scheme, WeightedVector};

struct Vectors {
    queries: HashMap<NctId, WeightedVector>,
    articles: Vec<(Pmid, WeightedVector)>,
}

struct Space {
    vocab: Vocabulary,
    reg_features: Vec<DocumentFeatures>,
    art_features: Vec<DocumentFeatures>,
    vectors: BTreeMap<Scheme, Vectors>,
}

fn map_docs<T: Sync, F: Fn(&T) -> DocumentFeatures + Sync + Send>(
    items: &[T],
    f: F,
) -> Vec<DocumentFeatures> {
    #[cfg(feature = "parallel")]
    return items.par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return items.iter().map(f).collect();
}

impl Space {
    fn build(
        representation: Representation,
        regs: &[Registration],
        arts: &[Article],
        lexicon: Option<&ConceptLexicon>,
        rule: PruningRule,
    ) -> Result<Space> {
        let extract = |id: &str, fields: &[&str]| match (representation, lexicon) {
            (Representation::Concept, Some(lex)) => extract_concept_features(id, fields, lex),
            _ => extract_term_features(id, fields),
        };
        let reg_features = map_docs(regs, |r| extract(r.nct_id.as_str(), &r.text_fields()));
        let art_features = map_docs(arts, |a| extract(&a.pmid.to_string(), &a.text_fields()));
        let vocab = build_vocabulary(&reg_features, &art_features, representation, rule)?;
        let mut vectors = BTreeMap::new();
        for scheme in Scheme::ALL {
            let queries = regs
                .iter()
                .zip(&reg_features)
                .map(|(r, f)| {
                    Ok((
                        r.nct_id.clone(),
                        weigh(&project(f, &vocab), &vocab, scheme)?,
                    ))
                })
                .collect::<Result<HashMap<_, _>>>()?;
            let articles = arts
                .iter()
                .zip(&art_features)
                .map(|(a, f)| Ok((a.pmid, weigh(&project(f, &vocab), &vocab, scheme)?)))
                .collect::<Result<Vec<_>>>()?;
            vectors.insert(scheme, Vectors { queries, articles });
        }
        Ok(Space {
            vocab,
            reg_features,
            art_features,
            vectors,
        })
    }
}

/// Both corpora plus every derived vector space.
///
/// The term space is always available; the concept space needs a lexicon.
/// Indexes are built on first use and cached.
pub struct Engine {
    registrations: Vec<Registration>,
    articles: Vec<Article>,
    reg_pos: HashMap<NctId, usize>,
    art_pos: HashMap<Pmid, usize>,
    spaces: BTreeMap<Representation, Space>,
    indexes: Mutex<HashMap<MethodConfig, Arc<InvertedIndex>>>,
}

impl Engine {
    pub fn new(
        registrations: Vec<Registration>,
        articles: Vec<Article>,
        lexicon: Option<&ConceptLexicon>,
        rule: PruningRule,
    ) -> Result<Engine> {
        if articles.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut reg_pos = HashMap::with_capacity(registrations.len());
        for (i, r) in registrations.iter().enumerate() {
            if reg_pos.insert(r.nct_id.clone(), i).is_some() {
                return Err(Error::DuplicateId(r.nct_id.to_string()));
            }
        }
        let mut art_pos = HashMap::with_capacity(articles.len());
        for (i, a) in articles.iter().enumerate() {
            if art_pos.insert(a.pmid, i).is_some() {
                return Err(Error::DuplicateId(a.pmid.to_string()));
            }
        }
        let mut spaces = BTreeMap::new();
        spaces.insert(
            Representation::Term,
            Space::build(Representation::Term, &registrations, &articles, None, rule)?,
        );
        if let Some(lex) = lexicon {
            spaces.insert(
                Representation::Concept,
                Space::build(
                    Representation::Concept,
                    &registrations,
                    &articles,
                    Some(lex),
                    rule,
                )?,
            );
        }
        Ok(Engine {
            registrations,
            articles,
            reg_pos,
            art_pos,
            spaces,
            indexes: Mutex::new(HashMap::new()),
        })
    }

    pub fn registrations(&self) -> &[Registration] {
        &self.registrations
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn registration(&self, nct_id: &NctId) -> Option<&Registration> {
        self.reg_pos.get(nct_id).map(|&i| &self.registrations[i])
    }

    pub fn article(&self, pmid: Pmid) -> Option<&Article> {
        self.art_pos.get(&pmid).map(|&i| &self.articles[i])
    }

    pub fn representations(&self) -> Vec<Representation> {
        self.spaces.keys().copied().collect()
    }

    /// Legal configs over the available representations, in table order.
    pub fn configs(&self) -> Vec<MethodConfig> {
        MethodConfig::all_legal()
            .into_iter()
            .filter(|c| self.spaces.contains_key(&c.representation))
            .collect()
    }

    fn space(&self, representation: Representation) -> Result<&Space> {
        self.spaces.get(&representation).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "no {representation} space: a concept lexicon is required"
            ))
        })
    }

    pub fn vocabulary(&self, representation: Representation) -> Result<&Vocabulary> {
        Ok(&self.space(representation)?.vocab)
    }

    pub fn registration_features(
        &self,
        representation: Representation,
        nct_id: &NctId,
    ) -> Result<&DocumentFeatures> {
        let i = *self
            .reg_pos
            .get(nct_id)
            .ok_or_else(|| Error::UnknownRegistration(nct_id.to_string()))?;
        Ok(&self.space(representation)?.reg_features[i])
    }

    pub fn article_features(
        &self,
        representation: Representation,
        pmid: Pmid,
    ) -> Option<&DocumentFeatures> {
        let i = *self.art_pos.get(&pmid)?;
        self.spaces.get(&representation).map(|s| &s.art_features[i])
    }

    pub fn corpus_stats(&self, representation: Representation) -> Result<CorpusStats> {
        let s = self.space(representation)?;
        Ok(corpus_stats(
            &s.reg_features,
            &s.art_features,
            representation,
        ))
    }

    fn vectors(&self, representation: Representation, scheme: Scheme) -> Result<&Vectors> {
        Ok(&self.space(representation)?.vectors[&scheme])
    }

    pub fn queries(
        &self,
        representation: Representation,
        scheme: Scheme,
    ) -> Result<&HashMap<NctId, WeightedVector>> {
        Ok(&self.vectors(representation, scheme)?.queries)
    }

    pub fn query_vector(
        &self,
        nct_id: &NctId,
        representation: Representation,
        scheme: Scheme,
    ) -> Result<&WeightedVector> {
        self.queries(representation, scheme)?
            .get(nct_id)
            .ok_or_else(|| Error::UnknownRegistration(nct_id.to_string()))
    }

    /// Article vectors in corpus order.
    pub fn article_vectors(
        &self,
        representation: Representation,
        scheme: Scheme,
    ) -> Result<&[(Pmid, WeightedVector)]> {
        Ok(&self.vectors(representation, scheme)?.articles)
    }

    pub fn article_vector(
        &self,
        pmid: Pmid,
        representation: Representation,
        scheme: Scheme,
    ) -> Option<&WeightedVector> {
        let i = *self.art_pos.get(&pmid)?;
        self.vectors(representation, scheme)
            .ok()
            .map(|v| &v.articles[i].1)
    }

    pub fn index(&self, config: MethodConfig) -> Result<Arc<InvertedIndex>> {
        if let Some(idx) = self
            .indexes
            .lock()
            .expect("index cache poisoned")
            .get(&config)
        {
            return Ok(Arc::clone(idx));
        }
        let space = self.space(config.representation)?;
        let built = Arc::new(InvertedIndex::build(
            &space.vectors[&config.scheme].articles,
            &space.vocab,
            config,
        )?);
        let mut cache = self.indexes.lock().expect("index cache poisoned");
        Ok(Arc::clone(cache.entry(config).or_insert(built)))
    }

    /// Uses a previously persisted index for its config. It must have been
    /// built over this engine's vocabulary.
    pub fn install_index(&self, index: InvertedIndex) -> Result<()> {
        let config = index.config();
        let vocab = self.vocabulary(config.representation)?;
        if index.vocab_digest() != vocab.digest() || index.n_articles() != self.articles.len() {
            return Err(Error::SpaceMismatch(format!(
                "index for {config} does not match the loaded corpora"
            )));
        }
        self.indexes
            .lock()
            .expect("index cache poisoned")
            .insert(config, Arc::new(index));
        Ok(())
    }

    pub fn rank(
        &self,
        nct_id: &NctId,
        config: MethodConfig,
        k: Option<usize>,
    ) -> Result<RankedCandidates> {
        let query = self.query_vector(nct_id, config.representation, config.scheme)?;
        self.index(config)?.rank(nct_id, query, config, k)
    }

    pub fn reported_links(&self) -> LinkExtraction {
        extract_reported_links(&self.registrations, &self.articles)
    }

    pub fn targets(&self, benchmark: &Benchmark) -> TargetSet {
        evaluation::build_targets(benchmark, &self.registrations, &self.articles)
    }

    pub fn evaluate(
        &self,
        targets: &TargetSet,
        config: MethodConfig,
        grid: &CurveGrid,
    ) -> Result<EvalReport> {
        let index = self.index(config)?;
        let queries = self.queries(config.representation, config.scheme)?;
        evaluation::evaluate(
            targets,
            queries,
            index.as_ref(),
            config,
            self.articles.len(),
            grid,
        )
    }
}
