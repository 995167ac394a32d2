//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;
use trialink_core::evaluation::CurveGrid;
use trialink_core::features::DEFAULT_MAX_PHRASE_LEN;
use trialink_core::{
    CorpusFilterConfig, Measure, MethodConfig, PruningRule, Representation, Scheme,
};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Directory for every artifact [default: trialink-out]
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,

    /// Raw registrations (canonical JSON lines or registry XML).
    #[arg(long, global = true, value_name = "FILE")]
    pub registrations: Option<PathBuf>,

    /// Raw articles (canonical JSON lines or bibliographic XML).
    #[arg(long, global = true, value_name = "FILE")]
    pub articles: Option<PathBuf>,

    /// Concept lexicon, `phrase<TAB>concept_id` per line.
    #[arg(long, global = true, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,

    /// term or concept
    #[arg(long, global = true)]
    pub representation: Option<Representation>,

    /// binary or tfidf
    #[arg(long, global = true)]
    pub scheme: Option<Scheme>,

    /// cosine, jaccard or euclidean
    #[arg(long, global = true)]
    pub measure: Option<Measure>,

    /// Candidates kept per registration [default: 50]
    #[arg(long, global = true)]
    pub k: Option<usize>,

    /// occurrence or document-frequency
    #[arg(long, global = true, value_name = "RULE")]
    pub pruning: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    output_dir: Option<PathBuf>,
    registrations: Option<PathBuf>,
    articles: Option<PathBuf>,
    lexicon: Option<PathBuf>,
    method: Option<String>,
    all_configs: bool,
    k: Option<usize>,
    pruning: Option<PruningRule>,
    max_phrase_len: Option<usize>,
    curve_points: Option<Vec<usize>>,
    filter: Option<CorpusFilterConfig>,
    serve: ServeFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ServeFile {
    addr: Option<String>,
    log: Option<PathBuf>,
    compact_every: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: String,
    pub log: PathBuf,
    pub compact_every: Option<u64>,
}

/// Everything a command needs, resolved and validated.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub registrations: Option<PathBuf>,
    pub articles: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub method: MethodConfig,
    pub all_configs: bool,
    pub k: usize,
    pub pruning: PruningRule,
    pub max_phrase_len: usize,
    pub curve: CurveGrid,
    pub filter: CorpusFilterConfig,
    pub serve: ServeConfig,
}

fn parse_pruning(raw: &str) -> CliResult<PruningRule> {
    match raw.to_ascii_lowercase().replace('_', "-").as_str() {
        "occurrence" => Ok(PruningRule::Occurrence),
        "document-frequency" | "df" => Ok(PruningRule::DocumentFrequency),
        _ => Err(CliError::Usage(format!(
            "unknown pruning rule {raw:?}: expected occurrence or document-frequency"
        ))),
    }
}

impl RunConfig {
    pub fn resolve(args: &GlobalArgs) -> CliResult<RunConfig> {
        let (file, base) = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let file: FileConfig = toml::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                (
                    file,
                    path.parent().map(Path::to_path_buf).unwrap_or_default(),
                )
            }
            None => (FileConfig::default(), PathBuf::new()),
        };
        // Paths in the file are relative to the file itself.
        let from_file =
            |p: Option<PathBuf>| p.map(|p| if p.is_absolute() { p } else { base.join(p) });

        let method = match &file.method {
            Some(slug) => slug
                .parse::<MethodConfig>()
                .map_err(|e| CliError::Usage(e.to_string()))?,
            None => MethodConfig::default(),
        };
        let method = MethodConfig::new(
            args.representation.unwrap_or(method.representation),
            args.scheme.unwrap_or(method.scheme),
            args.measure.unwrap_or(method.measure),
        )
        .map_err(|e| CliError::Usage(e.to_string()))?;

        let k = args.k.or(file.k).unwrap_or(50);
        if k == 0 {
            return Err(CliError::Usage("k must be at least 1".into()));
        }
        let pruning = match &args.pruning {
            Some(raw) => parse_pruning(raw)?,
            None => file.pruning.unwrap_or_default(),
        };
        let filter = file.filter.unwrap_or_default();
        filter
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let output_dir = args
            .output_dir
            .clone()
            .or(from_file(file.output_dir))
            .unwrap_or_else(|| PathBuf::from("trialink-out"));
        let serve = ServeConfig {
            addr: file.serve.addr.unwrap_or_else(|| "127.0.0.1:8080".into()),
            log: from_file(file.serve.log).unwrap_or_else(|| output_dir.join("decisions.jsonl")),
            compact_every: file.serve.compact_every,
        };
        let config = RunConfig {
            registrations: args.registrations.clone().or(from_file(file.registrations)),
            articles: args.articles.clone().or(from_file(file.articles)),
            lexicon: args.lexicon.clone().or(from_file(file.lexicon)),
            output_dir,
            method,
            all_configs: file.all_configs,
            k,
            pruning,
            max_phrase_len: file.max_phrase_len.unwrap_or(DEFAULT_MAX_PHRASE_LEN),
            curve: file
                .curve_points
                .map_or(CurveGrid::Default, CurveGrid::Explicit),
            filter,
            serve,
        };
        for path in [&config.registrations, &config.articles, &config.lexicon]
            .into_iter()
            .flatten()
        {
            if !path.exists() {
                return Err(CliError::Input(format!("{}: no such file", path.display())));
            }
        }
        Ok(config)
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.output_dir.join("corpus")
    }

    pub fn index_path(&self, config: MethodConfig) -> PathBuf {
        self.output_dir
            .join("index")
            .join(format!("{}.idx", config.slug()))
    }
}
