use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, ValueEnum};
use serde::Serialize;
use trialink_core::evaluation::{write_curves_csv, write_results_table, CurveGrid};
use trialink_core::ingest::{
    parse_articles, parse_registrations, write_articles, write_registrations, IngestOutcome,
};
use trialink_core::similarity::RANKING_TSV_HEADER;
use trialink_core::synth::{generate, SynthConfig};
use trialink_core::{
    Article, Benchmark, BenchmarkKind, ConceptLexicon, Engine, EvalReport, InvertedIndex,
    MethodConfig, NctId, Registration,
};
use trialink_service::{AppState, ServiceConfig, Store};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Prints a line to standard output; a closed pipe is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(io::stdout().lock(), $($arg)*);
    }};
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

/// Writes a whole file through `f` and flushes it.
fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> trialink_core::Result<()>,
) -> CliResult<()> {
    let mut out = create(path)?;
    f(&mut out).map_err(|e| CliError::at(path, e))?;
    out.flush().map_err(|e| CliError::io(path, e))
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn log_outcome<T>(what: &str, path: &Path, outcome: &IngestOutcome<T>) {
    for w in &outcome.warnings {
        log::debug!("{}: {w}", path.display());
    }
    if !outcome.warnings.is_empty() {
        log::warn!("{}: {} warnings", path.display(), outcome.warnings.len());
    }
    log::info!(
        "{what}: kept {} of {} records, rejected {}",
        outcome.records.len(),
        outcome.total,
        outcome.rejections.len()
    );
}

fn read_registrations(path: &Path, cfg: &RunConfig) -> CliResult<IngestOutcome<Registration>> {
    parse_registrations(&read(path)?, &cfg.filter).map_err(|e| CliError::at(path, e))
}

fn read_articles(path: &Path, cfg: &RunConfig) -> CliResult<IngestOutcome<Article>> {
    parse_articles(&read(path)?, &cfg.filter).map_err(|e| CliError::at(path, e))
}

fn read_lexicon(path: &Path, cfg: &RunConfig) -> CliResult<ConceptLexicon> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let lexicon = ConceptLexicon::from_reader(BufReader::new(file), cfg.max_phrase_len)
        .map_err(|e| CliError::at(path, e))?;
    for w in lexicon.warnings() {
        log::debug!("{}: {w}", path.display());
    }
    Ok(lexicon)
}

/// Canonical corpora from a previous `ingest` when present, otherwise the
/// raw inputs ingested in memory.
fn load_engine(cfg: &RunConfig) -> CliResult<Engine> {
    let dir = cfg.corpus_dir();
    let ingested = dir.join("registrations.jsonl").exists() && dir.join("articles.jsonl").exists();
    let (reg_path, art_path, lex_path) = if ingested {
        let lex = dir.join("lexicon.tsv");
        (
            dir.join("registrations.jsonl"),
            dir.join("articles.jsonl"),
            lex.exists().then_some(lex).or(cfg.lexicon.clone()),
        )
    } else {
        let missing = || {
            CliError::Usage(
                "no corpora: run `trialink ingest` first or pass --registrations and --articles"
                    .into(),
            )
        };
        (
            cfg.registrations.clone().ok_or_else(missing)?,
            cfg.articles.clone().ok_or_else(missing)?,
            cfg.lexicon.clone(),
        )
    };
    let regs = read_registrations(&reg_path, cfg)?;
    let arts = read_articles(&art_path, cfg)?;
    log_outcome("registrations", &reg_path, &regs);
    log_outcome("articles", &art_path, &arts);
    let lexicon = lex_path
        .as_deref()
        .map(|p| read_lexicon(p, cfg))
        .transpose()?;
    let engine = Engine::new(regs.records, arts.records, lexicon.as_ref(), cfg.pruning)?;
    log::info!(
        "loaded {} registrations and {} articles; representations: {:?}",
        engine.registrations().len(),
        engine.articles().len(),
        engine.representations()
    );
    Ok(engine)
}

/// Installs persisted indexes that still match the corpora; stale ones are
/// skipped and rebuilt in memory on use.
fn install_saved_indexes(engine: &Engine, cfg: &RunConfig, configs: &[MethodConfig]) {
    for &config in configs {
        let path = cfg.index_path(config);
        if !path.exists() {
            continue;
        }
        let Ok(vocab) = engine.vocabulary(config.representation) else {
            continue;
        };
        match InvertedIndex::load(&path, config, Some(&vocab.digest()))
            .and_then(|idx| engine.install_index(idx))
        {
            Ok(()) => log::info!("using index {}", path.display()),
            Err(e) => log::warn!("ignoring {}: {e}", path.display()),
        }
    }
}

fn selected_configs(engine: &Engine, cfg: &RunConfig, all: bool) -> CliResult<Vec<MethodConfig>> {
    if all || cfg.all_configs {
        return Ok(engine.configs());
    }
    if !engine.configs().contains(&cfg.method) {
        return Err(CliError::Usage(format!(
            "{} needs a concept lexicon (--lexicon)",
            cfg.method
        )));
    }
    Ok(vec![cfg.method])
}

#[derive(Serialize)]
struct SideSummary {
    path: PathBuf,
    total: usize,
    kept: usize,
    rejected: usize,
    warnings: usize,
}

impl SideSummary {
    fn new<T>(path: &Path, o: &IngestOutcome<T>) -> Self {
        SideSummary {
            path: path.to_path_buf(),
            total: o.total,
            kept: o.records.len(),
            rejected: o.rejections.len(),
            warnings: o.warnings.len(),
        }
    }
}

#[derive(Serialize)]
struct IngestSummary {
    registrations: SideSummary,
    articles: SideSummary,
    lexicon_entries: Option<usize>,
    reported_links: usize,
    dangling_links: usize,
}

pub fn ingest(cfg: &RunConfig) -> CliResult<()> {
    let reg_path = cfg
        .registrations
        .as_deref()
        .ok_or_else(|| CliError::Usage("ingest needs --registrations".into()))?;
    let art_path = cfg
        .articles
        .as_deref()
        .ok_or_else(|| CliError::Usage("ingest needs --articles".into()))?;
    let regs = read_registrations(reg_path, cfg)?;
    let arts = read_articles(art_path, cfg)?;
    log_outcome("registrations", reg_path, &regs);
    log_outcome("articles", art_path, &arts);
    let lexicon = cfg
        .lexicon
        .as_deref()
        .map(|p| read_lexicon(p, cfg))
        .transpose()?;

    let dir = cfg.corpus_dir();
    write_file(&dir.join("registrations.jsonl"), |w| {
        write_registrations(&regs.records, w)
    })?;
    write_file(&dir.join("articles.jsonl"), |w| {
        write_articles(&arts.records, w)
    })?;
    write_file(&dir.join("registrations.rejections.tsv"), |w| {
        regs.write_rejections(w)
    })?;
    write_file(&dir.join("articles.rejections.tsv"), |w| {
        arts.write_rejections(w)
    })?;
    if let Some(lex) = &lexicon {
        write_file(&dir.join("lexicon.tsv"), |w| lex.write_tsv(w))?;
    }
    let links = trialink_core::ingest::extract_reported_links(&regs.records, &arts.records);
    let reported = Benchmark::new("reported", BenchmarkKind::Reported, links.links);
    write_file(&dir.join("reported_links.tsv"), |w| reported.write_tsv(w))?;
    write_file(&dir.join("dangling_links.tsv"), |w| {
        writeln!(w, "pmid\tnct_id")?;
        for (pmid, nct) in &links.dangling {
            writeln!(w, "{pmid}\t{nct}")?;
        }
        Ok(())
    })?;
    let summary = IngestSummary {
        registrations: SideSummary::new(reg_path, &regs),
        articles: SideSummary::new(art_path, &arts),
        lexicon_entries: lexicon.as_ref().map(ConceptLexicon::len),
        reported_links: reported.links.len(),
        dangling_links: links.dangling.len(),
    };
    write_file(&dir.join("summary.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        writeln!(w)?;
        Ok(())
    })?;
    say!(
        "registrations: kept {} of {}; articles: kept {} of {}; reported links: {}; output: {}",
        summary.registrations.kept,
        summary.registrations.total,
        summary.articles.kept,
        summary.articles.total,
        summary.reported_links,
        dir.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Build an index for every legal configuration.
    #[arg(long)]
    pub all_configs: bool,
}

pub fn index(cfg: &RunConfig, args: &IndexArgs) -> CliResult<()> {
    let engine = load_engine(cfg)?;
    for config in selected_configs(&engine, cfg, args.all_configs)? {
        let index = engine.index(config)?;
        let path = cfg.index_path(config);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        index.save(&path).map_err(|e| CliError::at(&path, e))?;
        say!(
            "{config}\t{}\t{}",
            hex(&index.fingerprint()),
            path.display()
        );
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RankFormat {
    Tsv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Registration identifiers, ranked in the order given.
    pub nct_ids: Vec<String>,

    /// One identifier per line (first tab-separated column); blank lines,
    /// `#` comments and an `nct_id` header are skipped.
    #[arg(long, value_name = "FILE")]
    pub ids_file: Option<PathBuf>,

    /// Use exactly this persisted index; a mismatch is an error.
    #[arg(long, value_name = "FILE")]
    pub index: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "tsv")]
    pub format: RankFormat,

    /// Write here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn rank(cfg: &RunConfig, args: &RankArgs) -> CliResult<()> {
    let mut raw_ids = args.nct_ids.clone();
    if let Some(path) = &args.ids_file {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| CliError::io(path, e))?;
            // First column, so link and benchmark files work as is.
            let id = line.split('\t').next().unwrap_or("").trim();
            if !id.is_empty() && !id.starts_with('#') && id != "nct_id" {
                raw_ids.push(id.to_string());
            }
        }
    }
    if raw_ids.is_empty() {
        return Err(CliError::Usage(
            "rank needs at least one registration id".into(),
        ));
    }
    let ids = raw_ids
        .iter()
        .map(|s| NctId::new(s.trim()))
        .collect::<trialink_core::Result<Vec<_>>>()?;
    let engine = load_engine(cfg)?;
    if let Some(unknown) = ids.iter().find(|id| engine.registration(id).is_none()) {
        return Err(CliError::Input(format!("unknown registration {unknown}")));
    }
    let config = selected_configs(&engine, cfg, false)?[0];
    match &args.index {
        Some(path) => {
            let digest = engine.vocabulary(config.representation)?.digest();
            let idx = InvertedIndex::load(path, config, Some(&digest))
                .map_err(|e| CliError::at(path, e))?;
            engine
                .install_index(idx)
                .map_err(|e| CliError::at(path, e))?;
        }
        None => install_saved_indexes(&engine, cfg, &[config]),
    }
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match write_rankings(&engine, &ids, config, cfg.k, args.format, &mut out)
        .and_then(|()| Ok(out.flush()?))
    {
        Err(trialink_core::Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        Err(trialink_core::Error::Io(e)) => {
            Err(CliError::Internal(format!("writing rankings: {e}")))
        }
        other => Ok(other?),
    }
}

fn write_rankings(
    engine: &Engine,
    ids: &[NctId],
    config: MethodConfig,
    k: usize,
    format: RankFormat,
    out: &mut dyn Write,
) -> trialink_core::Result<()> {
    if matches!(format, RankFormat::Tsv) {
        writeln!(out, "{RANKING_TSV_HEADER}")?;
    }
    for id in ids {
        let ranked = engine.rank(id, config, Some(k))?;
        match format {
            RankFormat::Tsv => ranked.write_tsv(&mut *out)?,
            RankFormat::Jsonl => ranked.write_jsonl(&mut *out)?,
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// `reported` for the links found during ingest, or a TSV of
    /// `nct_id<TAB>pmid` rows.
    #[arg(long, default_value = "reported")]
    pub benchmark: String,

    /// How the benchmark links were obtained.
    #[arg(long, default_value = "curated")]
    pub kind: BenchmarkKind,

    /// Evaluate every legal configuration.
    #[arg(long)]
    pub all_configs: bool,

    /// Screening depths for the recall curve, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "N,...")]
    pub curve_points: Option<Vec<usize>>,
}

pub fn evaluate(cfg: &RunConfig, args: &EvaluateArgs) -> CliResult<()> {
    let engine = load_engine(cfg)?;
    let benchmark = if args.benchmark == "reported" {
        Benchmark::new(
            "reported",
            BenchmarkKind::Reported,
            engine.reported_links().links,
        )
    } else {
        let path = Path::new(&args.benchmark);
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let name = path
            .file_stem()
            .map_or("benchmark".into(), |s| s.to_string_lossy().into_owned());
        Benchmark::from_tsv(BufReader::new(file), name, args.kind)
            .map_err(|e| CliError::at(path, e))?
    };
    let targets = engine.targets(&benchmark);
    log::info!(
        "benchmark {}: {} links, {} targets, {} excluded",
        benchmark.name,
        benchmark.links.len(),
        targets.targets.len(),
        targets.excluded.len()
    );
    let grid = args
        .curve_points
        .clone()
        .map_or(cfg.curve.clone(), CurveGrid::Explicit);
    let configs = selected_configs(&engine, cfg, args.all_configs)?;
    install_saved_indexes(&engine, cfg, &configs);
    let dir = cfg.output_dir.join("reports").join(&benchmark.name);
    let mut reports: Vec<EvalReport> = Vec::with_capacity(configs.len());
    for config in configs {
        let report = engine.evaluate(&targets, config, &grid)?;
        write_file(&dir.join(format!("{}.json", config.slug())), |w| {
            report.write_json(w)
        })?;
        write_file(&dir.join(format!("{}.curve.csv", config.slug())), |w| {
            report.recall_curve_export(w)
        })?;
        reports.push(report);
    }
    write_file(&dir.join("results_table.tsv"), |w| {
        write_results_table(&reports, w)
    })?;
    write_file(&dir.join("recall_curves.csv"), |w| {
        write_curves_csv(&reports, w)
    })?;
    // The table is also on disk, so a closed pipe loses nothing.
    let _ = write_results_table(&reports, io::stdout().lock());
    Ok(())
}

pub fn stats(cfg: &RunConfig) -> CliResult<()> {
    let engine = load_engine(cfg)?;
    let dir = cfg.output_dir.join("stats");
    for representation in engine.representations() {
        let stats = engine.corpus_stats(representation)?;
        write_file(&dir.join(format!("{representation}.histogram.csv")), |w| {
            stats.write_histogram_csv(w)
        })?;
        write_file(&dir.join(format!("{representation}.summary.json")), |w| {
            serde_json::to_writer_pretty(&mut *w, &stats)?;
            writeln!(w)?;
            Ok(())
        })?;
        say!(
            "{representation}: {} distinct features, {} retained; registrations {} docs, articles {} docs",
            stats.n_features, stats.n_retained, stats.registrations.n_documents, stats.articles.n_documents
        );
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address, e.g. 127.0.0.1:8080.
    #[arg(long)]
    pub addr: Option<String>,

    /// Decision log path [default: <output-dir>/decisions.jsonl]
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
}

pub fn serve(cfg: &RunConfig, args: &ServeArgs) -> CliResult<()> {
    let engine = load_engine(cfg)?;
    let default_config = selected_configs(&engine, cfg, false)?[0];
    install_saved_indexes(&engine, cfg, &engine.configs());
    let log_path = args.log.clone().unwrap_or_else(|| cfg.serve.log.clone());
    let mut store = Store::open(&log_path)
        .map_err(|e| CliError::Input(format!("{}: {e}", log_path.display())))?;
    if let Some(n) = cfg.serve.compact_every {
        store = store.with_compaction_every(n);
    }
    let service = ServiceConfig {
        default_config,
        default_k: cfg.k,
        ..ServiceConfig::default()
    };
    let state = AppState::new(Arc::new(engine), store, service);
    let addr = args.addr.clone().unwrap_or_else(|| cfg.serve.addr.clone());
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Usage(format!("cannot listen on {addr}: {e}")))?;
        let bound = listener
            .local_addr()
            .map_err(|e| CliError::Internal(e.to_string()))?;
        eprintln!(
            "serving on http://{bound} (decision log {})",
            log_path.display()
        );
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        trialink_service::serve(listener, state, shutdown)
            .await
            .map_err(|e| CliError::Internal(e.to_string()))
    })
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    #[arg(long, default_value_t = 1000)]
    pub n_articles: usize,

    #[arg(long, default_value_t = 200)]
    pub n_registrations: usize,

    /// Target directory [default: <output-dir>/synth]
    #[arg(long, value_name = "DIR")]
    pub dir: Option<PathBuf>,
}

/// Writes a synthetic corpus with planted registration-article pairs.
pub fn synth(cfg: &RunConfig, args: &SynthArgs) -> CliResult<()> {
    let config = SynthConfig {
        seed: args.seed,
        n_articles: args.n_articles,
        n_registrations: args.n_registrations,
        ..SynthConfig::default()
    };
    let corpus = generate(&config).map_err(|e| CliError::Usage(e.to_string()))?;
    let dir = args
        .dir
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("synth"));
    write_file(&dir.join("registrations.jsonl"), |w| {
        write_registrations(&corpus.registrations, w)
    })?;
    write_file(&dir.join("articles.jsonl"), |w| {
        write_articles(&corpus.articles, w)
    })?;
    write_file(&dir.join("lexicon.tsv"), |w| corpus.lexicon.write_tsv(w))?;
    let planted = Benchmark::new("planted", BenchmarkKind::Curated, corpus.planted);
    write_file(&dir.join("planted_links.tsv"), |w| planted.write_tsv(w))?;
    say!(
        "{} registrations, {} articles, {} planted links in {}",
        corpus.registrations.len(),
        corpus.articles.len(),
        planted.links.len(),
        dir.display()
    );
    Ok(())
}
