//! Linkage engine that ranks bibliographic article records against clinical
//! trial registrations using term or concept sparse-vector similarity.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`ingest`] parses canonical or XML records and applies the corpus
//!    inclusion filters, then extracts the reported registration/article links.
//! 2. [`features`] turns document text into term or concept multisets and
//!    prunes the shared vocabulary.
//! 3. [`weighting`] builds binary or tf-idf sparse vectors.
//! 4. [`similarity`] scores and ranks every article for a registration, using
//!    an inverted index so only shared features are traversed.
//! 5. [`evaluation`] measures where the linked article lands in each ranking.
//!
//! [`pipeline`] wires the stages together for callers that hold whole corpora,
//! and [`synth`] generates seeded synthetic corpora with planted matches.

pub mod error;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod pipeline;
pub mod similarity;
pub mod synth;
pub mod weighting;

pub use error::{Error, Result};
pub use evaluation::{Benchmark, BenchmarkKind, EvalReport};
pub use features::{ConceptLexicon, DocumentFeatures, PruningRule, Representation, Vocabulary};
pub use ingest::{Article, CorpusFilterConfig, NctId, Pmid, Registration, ReportedLink};
pub use pipeline::Engine;
pub use similarity::{InvertedIndex, Measure, MethodConfig, RankedCandidates, Ranker};
pub use weighting::{Scheme, WeightedVector};
