//! Seeded synthetic corpora with planted registration/article matches.
//!
//! Article text mixes Zipf-distributed common words with a handful of rarer
//! topic words. Each registration is a noisy excerpt of one article: a random
//! share of its tokens is kept and tokens drawn from other articles are mixed
//! in. The article a registration was cut from is its planted match, and it
//! is also recorded as a reported link on the article.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Days, NaiveDate};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ConceptLexicon, DEFAULT_MAX_PHRASE_LEN};
use crate::ingest::{
    Article, NctId, OverallStatus, Phase, Pmid, Registration, ReportedLink, StudyType,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_articles: usize,
    pub n_registrations: usize,
    /// Size of the shared Zipf vocabulary.
    pub common_words: usize,
    /// Topic words per article; the topic vocabulary holds about two per article.
    pub topic_words: usize,
    /// Share of article tokens drawn from the article's topic words.
    pub topic_share: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Share of the article's tokens a registration keeps.
    pub retain: f64,
    /// Distractor tokens added, relative to the kept token count.
    pub distractors: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            n_articles: 1000,
            n_registrations: 200,
            common_words: 3000,
            topic_words: 10,
            topic_share: 0.3,
            min_tokens: 80,
            max_tokens: 180,
            retain: 0.4,
            distractors: 0.2,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_articles == 0 {
            return bad("n_articles must be positive");
        }
        if self.n_registrations > self.n_articles {
            return bad("n_registrations cannot exceed n_articles");
        }
        if self.common_words == 0 || self.topic_words == 0 {
            return bad("word counts must be positive");
        }
        if self.min_tokens < 2 || self.min_tokens > self.max_tokens {
            return bad("token bounds must satisfy 2 <= min_tokens <= max_tokens");
        }
        for (name, x) in [("topic_share", self.topic_share), ("retain", self.retain)] {
            if !(0.0..=1.0).contains(&x) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.distractors >= 0.0 && self.distractors.is_finite()) {
            return bad("distractors must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub registrations: Vec<Registration>,
    pub articles: Vec<Article>,
    pub lexicon: ConceptLexicon,
    /// Registration and the article it was excerpted from, sorted.
    pub planted: Vec<ReportedLink>,
    /// Ground-truth term occurrence totals, as generated.
    pub registration_term_counts: BTreeMap<String, u64>,
    pub article_term_counts: BTreeMap<String, u64>,
}

const ONSETS: [&str; 16] = [
    "b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

/// Distinct pronounceable word for every index: consonant-vowel syllables
/// spelling the index in base 80, at least two syllables long.
pub fn pseudo_word(index: usize) -> String {
    let base = ONSETS.len() * VOWELS.len();
    let mut n = index + base;
    let mut syllables = Vec::new();
    while n > 0 {
        let d = n % base;
        syllables.push(format!(
            "{}{}",
            ONSETS[d / VOWELS.len()],
            VOWELS[d % VOWELS.len()]
        ));
        n /= base;
    }
    syllables.reverse();
    syllables.concat()
}

fn date(days_after_2008: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2008, 1, 1).unwrap() + Days::new(days_after_2008)
}

fn common_word(i: usize) -> String {
    pseudo_word(i)
}

fn topic_word(i: usize, common_words: usize) -> String {
    pseudo_word(common_words + i)
}

/// Generates a corpus; identical configs give identical corpora.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let zipf = WeightedIndex::new((1..=config.common_words).map(|r| 1.0 / (r as f64).powf(1.07)))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let n_topic = (2 * config.n_articles).max(config.topic_words);

    let pmids: Vec<u64> = rand::seq::index::sample(&mut rng, 30_000_000, config.n_articles)
        .into_iter()
        .map(|p| p as u64 + 10_000_000)
        .collect();

    let mut texts: Vec<Vec<String>> = Vec::with_capacity(config.n_articles);
    for _ in 0..config.n_articles {
        let topics: Vec<usize> =
            rand::seq::index::sample(&mut rng, n_topic, config.topic_words).into_vec();
        let len = rng.gen_range(config.min_tokens..=config.max_tokens);
        let tokens = (0..len)
            .map(|_| {
                if rng.gen_bool(config.topic_share) {
                    topic_word(topics[rng.gen_range(0..topics.len())], config.common_words)
                } else {
                    common_word(zipf.sample(&mut rng))
                }
            })
            .collect();
        texts.push(tokens);
    }

    let planted_slots: Vec<usize> =
        rand::seq::index::sample(&mut rng, config.n_articles, config.n_registrations).into_vec();
    let mut registrations = Vec::with_capacity(config.n_registrations);
    let mut links = Vec::with_capacity(config.n_registrations);
    let mut completion = Vec::with_capacity(config.n_registrations);
    let mut registration_term_counts = BTreeMap::new();
    for (r, &slot) in planted_slots.iter().enumerate() {
        let nct_id = NctId::new(&format!("NCT{:08}", 10_000_000 + r))?;
        let source = &texts[slot];
        let mut kept: Vec<String> = source
            .iter()
            .filter(|_| rng.gen_bool(config.retain))
            .cloned()
            .collect();
        let n_distract = (kept.len() as f64 * config.distractors).round() as usize;
        for _ in 0..n_distract {
            if config.n_articles < 2 {
                break;
            }
            let mut other = rng.gen_range(0..config.n_articles - 1);
            if other >= slot {
                other += 1;
            }
            let t = &texts[other];
            let at = rng.gen_range(0..=kept.len());
            kept.insert(at, t[rng.gen_range(0..t.len())].clone());
        }
        for t in &kept {
            *registration_term_counts.entry(t.clone()).or_insert(0) += 1;
        }
        let split = (kept.len() / 8).clamp(1.min(kept.len()), 14.min(kept.len()));
        let received = rng.gen_range(0..1500);
        let completed = received + rng.gen_range(200..900);
        completion.push(completed);
        registrations.push(Registration {
            nct_id: nct_id.clone(),
            brief_title: kept[..split].join(" "),
            official_title: String::new(),
            brief_summary: kept[split..].join(" "),
            detailed_description: String::new(),
            conditions: Vec::new(),
            received_date: date(received),
            completion_date: Some(date(completed)),
            overall_status: OverallStatus::Completed,
            study_type: StudyType::Interventional,
            phase: Some([Phase::Phase1, Phase::Phase2, Phase::Phase3, Phase::Phase4][r % 4]),
            enrollment: Some(rng.gen_range(10..2000)),
            funding_class: None,
        });
        links.push((slot, nct_id));
    }

    let mut planted_of: Vec<Option<usize>> = vec![None; config.n_articles];
    for (r, (slot, _)) in links.iter().enumerate() {
        planted_of[*slot] = Some(r);
    }
    let mut articles = Vec::with_capacity(config.n_articles);
    let mut article_term_counts = BTreeMap::new();
    for (slot, tokens) in texts.iter().enumerate() {
        for t in tokens {
            *article_term_counts.entry(t.clone()).or_insert(0) += 1;
        }
        let split = (tokens.len() / 10).clamp(4, 16).min(tokens.len());
        let (published, linked) = match planted_of[slot] {
            Some(r) => (
                completion[r] + rng.gen_range(60..700),
                BTreeSet::from([links[r].1.clone()]),
            ),
            None => (rng.gen_range(0..3000), BTreeSet::new()),
        };
        articles.push(Article {
            pmid: Pmid(pmids[slot]),
            title: tokens[..split].join(" "),
            abstract_text: tokens[split..].join(" "),
            publication_date: Some(date(published)),
            publication_types: BTreeSet::from(["Randomized Controlled Trial".to_string()]),
            linked_nct_ids: linked,
        });
    }

    let mut planted: Vec<ReportedLink> = links
        .iter()
        .map(|(slot, nct)| ReportedLink {
            nct_id: nct.clone(),
            pmid: Pmid(pmids[*slot]),
        })
        .collect();
    planted.sort();

    Ok(SynthCorpus {
        config: config.clone(),
        registrations,
        articles,
        lexicon: lexicon(config.common_words, n_topic)?,
        planted,
        registration_term_counts,
        article_term_counts,
    })
}

/// Concepts over the synthetic words: pairs of topic words are synonyms, the
/// most frequent common words each get a concept, and some adjacent common
/// word pairs form two-token phrases with their own concept.
fn lexicon(common_words: usize, n_topic: usize) -> Result<ConceptLexicon> {
    let mut lex = ConceptLexicon::new(DEFAULT_MAX_PHRASE_LEN)?;
    for t in 0..n_topic {
        lex.insert(&topic_word(t, common_words), &format!("T{:07}", t / 2))?;
    }
    for c in 0..common_words.min(400) {
        lex.insert(&common_word(c), &format!("C{c:07}"))?;
    }
    for c in (0..common_words.min(60)).step_by(3) {
        let phrase = format!("{} {}", common_word(c), common_word(c + 1));
        lex.insert(&phrase, &format!("P{c:07}"))?;
    }
    Ok(lex)
}
