use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::Json;
use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use trialink_core::similarity::Candidate;
use trialink_core::{
    Engine, Measure, MethodConfig, NctId, Pmid, Representation, Scheme, WeightedVector,
};

use crate::error::{ApiError, ErrorCode};
use crate::store::{
    write_confirmed_tsv, AuditEntry, ConfirmedLink, Decision, DecisionRecord, DecisionRequest,
    Progress, Session, SessionStatus, Store,
};

const SNIPPET_CHARS: usize = 400;
const MAX_LISTED_FEATURES: usize = 25;

/// Shown next to each candidate; the reviewer judges these, the service
/// does not enforce them.
pub const CONFIRMATION_CHECKLIST: [&str; 3] = [
    "participants match the registered population",
    "design and interventions match the registration",
    "publication follows the registered study dates",
];

#[derive(Debug, Clone, Copy)]
pub struct ServiceConfig {
    pub default_config: MethodConfig,
    pub default_k: usize,
    pub max_k: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            default_config: MethodConfig::default(),
            default_k: 50,
            max_k: 1000,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Engine>,
    store: Arc<Mutex<Store>>,
    config: ServiceConfig,
}

impl AppState {
    pub fn new(engine: Arc<Engine>, store: Store, config: ServiceConfig) -> AppState {
        AppState {
            engine,
            store: Arc::new(Mutex::new(store)),
            config,
        }
    }

    fn store(&self) -> MutexGuard<'_, Store> {
        self.store.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Runs a store mutation off the async workers; appends sync to disk.
    async fn mutate<T: Send + 'static>(
        &self,
        f: impl FnOnce(&mut Store) -> Result<T, ApiError> + Send + 'static,
    ) -> Result<T, ApiError> {
        let store = Arc::clone(&self.store);
        tokio::task::spawn_blocking(move || f(&mut store.lock().unwrap_or_else(|p| p.into_inner())))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
    }

    async fn rank(
        &self,
        nct_id: &NctId,
        config: MethodConfig,
        k: usize,
    ) -> Result<Vec<Candidate>, ApiError> {
        let (engine, nct_id) = (Arc::clone(&self.engine), nct_id.clone());
        let ranked = tokio::task::spawn_blocking(move || engine.rank(&nct_id, config, Some(k)))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))??;
        Ok(ranked.ranking)
    }

    fn known_registration(&self, raw: &str) -> Result<NctId, ApiError> {
        let nct_id = NctId::new(raw).map_err(|e| ApiError::invalid(e.to_string()))?;
        if self.engine.registration(&nct_id).is_none() {
            return Err(ApiError::new(
                ErrorCode::NotFound,
                format!("registration {nct_id} is not in the loaded corpus"),
            ));
        }
        Ok(nct_id)
    }

    /// Opens a session under the service defaults if none exists.
    async fn ensure_session(&self, nct_id: &NctId) -> Result<(), ApiError> {
        if self.store().session(nct_id).is_some() {
            return Ok(());
        }
        let (config, k) = (self.config.default_config, self.config.default_k);
        let ranking = self.rank(nct_id, config, k).await?;
        let nct = nct_id.clone();
        self.mutate(move |s| {
            s.open_session(&nct, config, k, ranking.iter().map(|c| c.pmid).collect())?;
            Ok(())
        })
        .await
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct CandidateQuery {
    pub k: Option<String>,
    pub representation: Option<String>,
    pub scheme: Option<String>,
    pub measure: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct RegistrationView {
    pub nct_id: NctId,
    pub brief_title: String,
    pub official_title: String,
    pub summary: String,
    pub conditions: Vec<String>,
    pub completion_date: Option<NaiveDate>,
    /// Highest-weighted features of the query vector.
    pub features: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct CandidateView {
    pub rank: usize,
    pub pmid: Pmid,
    pub score: f64,
    pub title: String,
    pub abstract_snippet: String,
    pub publication_date: Option<NaiveDate>,
    /// Features present in both the registration and this article, by
    /// contribution.
    pub shared_features: Vec<String>,
    pub decision: Option<DecisionRecord>,
}

#[derive(Debug, Serialize)]
pub struct CandidatePage {
    pub nct_id: NctId,
    pub config: MethodConfig,
    pub k: usize,
    pub status: SessionStatus,
    pub registration: RegistrationView,
    pub candidates: Vec<CandidateView>,
    pub confirmation_checklist: [&'static str; 3],
}

#[derive(Debug, Serialize)]
pub struct DecisionView {
    pub pmid: Pmid,
    pub rank: usize,
    pub decision: Decision,
    pub decided_at: DateTime<Utc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SessionView {
    pub nct_id: NctId,
    pub config: MethodConfig,
    pub k: usize,
    pub status: SessionStatus,
    pub opened_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub candidates: Vec<Pmid>,
    pub decisions: Vec<DecisionView>,
    pub confirmed: Option<Pmid>,
    pub audit: Vec<AuditEntry>,
}

impl From<&Session> for SessionView {
    fn from(s: &Session) -> Self {
        let mut decisions: Vec<DecisionView> = s
            .decisions
            .iter()
            .map(|(&pmid, d)| DecisionView {
                pmid,
                rank: s.rank_of(pmid).unwrap_or(0),
                decision: d.decision,
                decided_at: d.decided_at,
                note: d.note.clone(),
            })
            .collect();
        decisions.sort_by_key(|d| d.rank);
        SessionView {
            nct_id: s.nct_id.clone(),
            config: s.config,
            k: s.k,
            status: s.status,
            opened_at: s.opened_at,
            updated_at: s.updated_at,
            candidates: s.candidates.clone(),
            decisions,
            confirmed: s.confirmed().map(|(p, _)| p),
            audit: s.audit.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SessionSummary {
    pub nct_id: NctId,
    pub brief_title: String,
    pub status: SessionStatus,
    pub config: MethodConfig,
    pub opened_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub candidates: usize,
    pub decided: usize,
    pub confirmed: Option<Pmid>,
}

#[derive(Debug, Deserialize)]
pub struct QueueQuery {
    pub status: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct PageQuery {
    pub offset: Option<usize>,
    pub limit: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct RegistrationItem {
    pub nct_id: NctId,
    pub brief_title: String,
    pub session: Option<SessionStatus>,
}

#[derive(Debug, Serialize)]
pub struct RegistrationList {
    pub total: usize,
    pub offset: usize,
    pub items: Vec<RegistrationItem>,
}

#[derive(Debug, Serialize)]
pub struct Meta {
    pub default_config: MethodConfig,
    pub default_k: usize,
    pub max_k: usize,
    pub configs: Vec<MethodConfig>,
    pub n_registrations: usize,
    pub n_articles: usize,
}

#[derive(Debug, Deserialize)]
pub struct FormatQuery {
    pub format: Option<String>,
}

fn snippet(text: &str) -> String {
    match text.char_indices().nth(SNIPPET_CHARS) {
        None => text.to_string(),
        Some((cut, _)) => {
            let head = &text[..cut];
            let head = head.rfind(' ').map_or(head, |i| &head[..i]);
            format!("{}...", head.trim_end())
        }
    }
}

fn top_features(
    engine: &Engine,
    config: MethodConfig,
    weights: impl Iterator<Item = (u32, f64)>,
) -> Vec<String> {
    let Ok(vocab) = engine.vocabulary(config.representation) else {
        return Vec::new();
    };
    let mut ranked: Vec<(u32, f64)> = weights.collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
        .into_iter()
        .take(MAX_LISTED_FEATURES)
        .filter_map(|(f, _)| vocab.key(f).map(str::to_string))
        .collect()
}

fn shared<'a>(
    query: &'a WeightedVector,
    article: &'a WeightedVector,
) -> impl Iterator<Item = (u32, f64)> + 'a {
    query.entries().iter().filter_map(|&(f, w)| {
        let a = article.weight(f);
        (a > 0.0).then_some((f, w * a))
    })
}

fn parse_part<T: std::str::FromStr<Err = trialink_core::Error>>(
    raw: &Option<String>,
) -> Result<Option<T>, ApiError> {
    raw.as_deref()
        .map(str::parse)
        .transpose()
        .map_err(|e: trialink_core::Error| ApiError::invalid(e.to_string()))
}

fn build_page(
    app: &AppState,
    session: &Session,
    ranking: &[Candidate],
    k: usize,
) -> Result<CandidatePage, ApiError> {
    let engine = &app.engine;
    let config = session.config;
    let reg = engine
        .registration(&session.nct_id)
        .ok_or_else(|| ApiError::internal("session for unknown registration"))?;
    let query = engine.query_vector(&session.nct_id, config.representation, config.scheme)?;
    let mut candidates = Vec::with_capacity(k.min(ranking.len()));
    for (i, c) in ranking.iter().take(k).enumerate() {
        let article = engine
            .article(c.pmid)
            .ok_or_else(|| ApiError::internal(format!("ranked unknown article {}", c.pmid)))?;
        let shared_features = engine
            .article_vector(c.pmid, config.representation, config.scheme)
            .map(|a| top_features(engine, config, shared(query, a)))
            .unwrap_or_default();
        candidates.push(CandidateView {
            rank: i + 1,
            pmid: c.pmid,
            score: c.score,
            title: article.title.clone(),
            abstract_snippet: snippet(&article.abstract_text),
            publication_date: article.publication_date,
            shared_features,
            decision: session.decisions.get(&c.pmid).cloned(),
        });
    }
    let summary = if reg.brief_summary.is_empty() {
        &reg.detailed_description
    } else {
        &reg.brief_summary
    };
    Ok(CandidatePage {
        nct_id: session.nct_id.clone(),
        config,
        k,
        status: session.status,
        registration: RegistrationView {
            nct_id: reg.nct_id.clone(),
            brief_title: reg.brief_title.clone(),
            official_title: reg.official_title.clone(),
            summary: snippet(summary),
            conditions: reg.conditions.clone(),
            completion_date: reg.completion_date,
            features: top_features(engine, config, query.entries().iter().copied()),
        },
        candidates,
        confirmation_checklist: CONFIRMATION_CHECKLIST,
    })
}

/// `GET /api/registrations/{nct_id}/candidates`. Opens the screening session
/// on first use; afterwards the session's config and depth are fixed.
pub async fn get_candidates(
    State(app): State<AppState>,
    Path(raw): Path<String>,
    Query(q): Query<CandidateQuery>,
) -> Result<Json<CandidatePage>, ApiError> {
    let nct_id = app.known_registration(&raw)?;
    let existing = app.store().session(&nct_id).map(|s| (s.config, s.k));
    let base = existing.map_or(app.config.default_config, |(c, _)| c);
    let config = MethodConfig::new(
        parse_part::<Representation>(&q.representation)?.unwrap_or(base.representation),
        parse_part::<Scheme>(&q.scheme)?.unwrap_or(base.scheme),
        parse_part::<Measure>(&q.measure)?.unwrap_or(base.measure),
    )
    .map_err(|e| ApiError::invalid(e.to_string()))?;
    if !app.engine.configs().contains(&config) {
        return Err(ApiError::invalid(format!(
            "{config} is not available: no concept lexicon was loaded"
        )));
    }
    let k = match q.k.as_deref() {
        Some(raw) => raw
            .parse::<usize>()
            .map_err(|_| ApiError::invalid(format!("k must be a positive integer, got {raw:?}")))?,
        None => existing.map_or(app.config.default_k, |(_, k)| k),
    };
    if k == 0 || k > app.config.max_k {
        return Err(ApiError::invalid(format!(
            "k must be between 1 and {}",
            app.config.max_k
        )));
    }
    if let Some((session_config, session_k)) = existing {
        if session_config != config {
            return Err(ApiError::new(
                ErrorCode::Conflict,
                format!("session {nct_id} was opened under {session_config}, not {config}"),
            ));
        }
        if k > session_k {
            return Err(ApiError::new(
                ErrorCode::Conflict,
                format!("session {nct_id} holds {session_k} candidates, not {k}"),
            ));
        }
    }
    let depth = existing.map_or(k, |(_, k)| k);
    let ranking = app.rank(&nct_id, config, depth).await?;
    let pmids: Vec<Pmid> = ranking.iter().map(|c| c.pmid).collect();
    let nct = nct_id.clone();
    let session = app
        .mutate(move |s| Ok(s.open_session(&nct, config, depth, pmids)?.clone()))
        .await?;
    if session.config != config
        || session
            .candidates
            .iter()
            .ne(ranking.iter().map(|c| &c.pmid))
    {
        return Err(ApiError::new(
            ErrorCode::Conflict,
            format!("session {nct_id} no longer matches the loaded index"),
        ));
    }
    Ok(Json(build_page(&app, &session, &ranking, k)?))
}

pub async fn post_decision(
    State(app): State<AppState>,
    Path(raw): Path<String>,
    body: Result<Json<DecisionRequest>, JsonRejection>,
) -> Result<Json<SessionView>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::invalid(e.body_text()))?;
    let nct_id = app.known_registration(&raw)?;
    app.ensure_session(&nct_id).await?;
    let view = app
        .mutate(move |s| Ok(SessionView::from(s.decide(&nct_id, req)?)))
        .await?;
    Ok(Json(view))
}

pub async fn post_reopen(
    State(app): State<AppState>,
    Path(raw): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let nct_id = NctId::new(&raw).map_err(|e| ApiError::invalid(e.to_string()))?;
    let view = app
        .mutate(move |s| Ok(SessionView::from(s.reopen(&nct_id)?)))
        .await?;
    Ok(Json(view))
}

pub async fn get_session(
    State(app): State<AppState>,
    Path(raw): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let nct_id = NctId::new(&raw).map_err(|e| ApiError::invalid(e.to_string()))?;
    let store = app.store();
    let session = store.session(&nct_id).ok_or_else(|| {
        ApiError::new(
            ErrorCode::NotFound,
            format!("no screening session for {nct_id}"),
        )
    })?;
    Ok(Json(SessionView::from(session)))
}

/// Sessions oldest first, optionally only `open` or `closed` ones.
pub async fn list_sessions(
    State(app): State<AppState>,
    Query(q): Query<QueueQuery>,
) -> Result<Json<Vec<SessionSummary>>, ApiError> {
    let wanted = match q.status.as_deref() {
        None | Some("all") => None,
        Some("open") => Some(SessionStatus::Open),
        Some("closed") => Some(SessionStatus::Closed),
        Some(other) => {
            return Err(ApiError::invalid(format!(
                "status must be open, closed or all, got {other:?}"
            )))
        }
    };
    let store = app.store();
    let mut out: Vec<SessionSummary> = store
        .sessions()
        .values()
        .filter(|s| wanted.is_none_or(|w| s.status == w))
        .map(|s| SessionSummary {
            nct_id: s.nct_id.clone(),
            brief_title: app
                .engine
                .registration(&s.nct_id)
                .map(|r| r.brief_title.clone())
                .unwrap_or_default(),
            status: s.status,
            config: s.config,
            opened_at: s.opened_at,
            updated_at: s.updated_at,
            candidates: s.candidates.len(),
            decided: s.decisions.len(),
            confirmed: s.confirmed().map(|(p, _)| p),
        })
        .collect();
    out.sort_by(|a, b| {
        a.opened_at
            .cmp(&b.opened_at)
            .then_with(|| a.nct_id.cmp(&b.nct_id))
    });
    Ok(Json(out))
}

pub async fn list_registrations(
    State(app): State<AppState>,
    Query(q): Query<PageQuery>,
) -> Json<RegistrationList> {
    let offset = q.offset.unwrap_or(0);
    let limit = q.limit.unwrap_or(100).min(1000);
    let store = app.store();
    let regs = app.engine.registrations();
    let items = regs
        .iter()
        .skip(offset)
        .take(limit)
        .map(|r| RegistrationItem {
            nct_id: r.nct_id.clone(),
            brief_title: r.brief_title.clone(),
            session: store.session(&r.nct_id).map(|s| s.status),
        })
        .collect();
    Json(RegistrationList {
        total: regs.len(),
        offset,
        items,
    })
}

pub async fn get_progress(State(app): State<AppState>) -> Json<Progress> {
    Json(app.store().progress())
}

/// Confirmed links as JSON, or tab-separated with `?format=tsv`.
pub async fn get_confirmed_links(
    State(app): State<AppState>,
    Query(q): Query<FormatQuery>,
) -> Result<Response, ApiError> {
    let links: Vec<ConfirmedLink> = app.store().confirmed_links();
    match q.format.as_deref() {
        None | Some("json") => Ok(Json(links).into_response()),
        Some("tsv") => {
            let mut body = Vec::new();
            write_confirmed_tsv(&links, &mut body)
                .map_err(|e| ApiError::internal(e.to_string()))?;
            Ok((
                [(
                    header::CONTENT_TYPE,
                    "text/tab-separated-values; charset=utf-8",
                )],
                body,
            )
                .into_response())
        }
        Some(other) => Err(ApiError::invalid(format!(
            "format must be json or tsv, got {other:?}"
        ))),
    }
}

pub async fn get_meta(State(app): State<AppState>) -> Json<Meta> {
    Json(Meta {
        default_config: app.config.default_config,
        default_k: app.config.default_k,
        max_k: app.config.max_k,
        configs: app.engine.configs(),
        n_registrations: app.engine.registrations().len(),
        n_articles: app.engine.articles().len(),
    })
}

pub async fn fallback() -> ApiError {
    ApiError::new(ErrorCode::NotFound, "no such endpoint")
}
