use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use trialink_core::synth::{generate, SynthConfig};
use trialink_core::{Engine, MethodConfig, NctId, PruningRule, Registration};
use trialink_service::{router, AppState, ServiceConfig, Store};

const UNRANKABLE: &str = "NCT09999999";

fn engine() -> Arc<Engine> {
    let corpus = generate(&SynthConfig {
        n_articles: 300,
        n_registrations: 12,
        ..SynthConfig::default()
    })
    .unwrap();
    let mut regs = corpus.registrations;
    let stray: Registration = serde_json::from_value(json!({
        "nct_id": UNRANKABLE,
        "brief_title": "qqqq xxxx",
        "received_date": "2009-01-01",
        "overall_status": "completed",
        "study_type": "interventional",
    }))
    .unwrap();
    regs.push(stray);
    Arc::new(
        Engine::new(
            regs,
            corpus.articles,
            Some(&corpus.lexicon),
            PruningRule::Occurrence,
        )
        .unwrap(),
    )
}

fn app(engine: &Arc<Engine>, log: &Path) -> Router {
    router(AppState::new(
        Arc::clone(engine),
        Store::open(log).unwrap(),
        ServiceConfig::default(),
    ))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call_raw(app, method, uri, body).await;
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn call_raw(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    (
        status,
        resp.into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec(),
    )
}

fn nct(engine: &Engine, i: usize) -> String {
    engine.registrations()[i].nct_id.to_string()
}

fn pmid_at(page: &Value, rank: usize) -> String {
    page["candidates"][rank - 1]["pmid"]
        .as_str()
        .unwrap()
        .to_string()
}

async fn decide(app: &Router, nct: &str, pmid: &str, decision: &str) -> (StatusCode, Value) {
    call(
        app,
        Method::POST,
        &format!("/api/sessions/{nct}/decisions"),
        Some(json!({"pmid": pmid, "decision": decision})),
    )
    .await
}

#[tokio::test]
async fn candidates_follow_the_engine_ranking() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine();
    let app = app(&engine, &dir.path().join("log.jsonl"));
    let id = nct(&engine, 0);
    let (status, page) = call(
        &app,
        Method::GET,
        &format!("/api/registrations/{id}/candidates?k=50"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let candidates = page["candidates"].as_array().unwrap();
    assert_eq!(candidates.len(), 50);
    let direct = engine
        .rank(&NctId::new(&id).unwrap(), MethodConfig::default(), Some(50))
        .unwrap();
    for (i, (c, d)) in candidates.iter().zip(&direct.ranking).enumerate() {
        assert_eq!(c["rank"], i + 1);
        assert_eq!(c["pmid"].as_str().unwrap(), d.pmid.to_string());
        assert!((c["score"].as_f64().unwrap() - d.score).abs() < 1e-12);
    }
    assert!(candidates
        .windows(2)
        .all(|w| w[0]["score"].as_f64() >= w[1]["score"].as_f64()));
    assert!(!candidates[0]["shared_features"]
        .as_array()
        .unwrap()
        .is_empty());
    assert_eq!(page["registration"]["nct_id"], id);
    assert_eq!(page["status"], "open");

    let (_, page) = call(
        &app,
        Method::GET,
        &format!("/api/registrations/{id}/candidates?k=10"),
        None,
    )
    .await;
    assert_eq!(page["candidates"].as_array().unwrap().len(), 10);
}

#[tokio::test]
async fn lookup_errors_carry_codes() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine();
    let app = app(&engine, &dir.path().join("log.jsonl"));
    let id = nct(&engine, 0);
    let cases = [
        (
            "/api/registrations/NCT00000000/candidates",
            StatusCode::NOT_FOUND,
            "not_found",
        ),
        (
            "/api/registrations/bogus/candidates",
            StatusCode::BAD_REQUEST,
            "invalid_argument",
        ),
        (
            &format!("/api/registrations/{UNRANKABLE}/candidates") as &str,
            StatusCode::UNPROCESSABLE_ENTITY,
            "unprocessable",
        ),
        (
            &format!("/api/registrations/{id}/candidates?scheme=tfidf&measure=jaccard"),
            StatusCode::BAD_REQUEST,
            "invalid_argument",
        ),
        (
            &format!("/api/registrations/{id}/candidates?k=0"),
            StatusCode::BAD_REQUEST,
            "invalid_argument",
        ),
        (
            &format!("/api/registrations/{id}/candidates?k=ten"),
            StatusCode::BAD_REQUEST,
            "invalid_argument",
        ),
        (
            "/api/sessions/NCT00000000",
            StatusCode::NOT_FOUND,
            "not_found",
        ),
        ("/api/nothing", StatusCode::NOT_FOUND, "not_found"),
    ];
    for (uri, status, code) in cases {
        let (got, body) = call(&app, Method::GET, uri, None).await;
        assert_eq!(
            (got, body["code"].as_str()),
            (status, Some(code)),
            "{uri}: {body}"
        );
        assert!(body["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
    let (_, body) = call(
        &app,
        Method::GET,
        &format!("/api/registrations/{UNRANKABLE}/candidates"),
        None,
    )
    .await;
    assert!(body["message"].as_str().unwrap().contains("empty"));
}

#[tokio::test]
async fn session_config_is_fixed_once_opened() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine();
    let app = app(&engine, &dir.path().join("log.jsonl"));
    let id = nct(&engine, 1);
    let uri = format!("/api/registrations/{id}/candidates?representation=concept&scheme=binary&measure=jaccard&k=20");
    let (status, page) = call(&app, Method::GET, &uri, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        page["config"],
        json!({"representation": "concept", "scheme": "binary", "measure": "jaccard"})
    );
    let (status, page) = call(
        &app,
        Method::GET,
        &format!("/api/registrations/{id}/candidates"),
        None,
    )
    .await;
    assert_eq!((status, page["k"].as_u64()), (StatusCode::OK, Some(20)));
    let (status, body) = call(
        &app,
        Method::GET,
        &format!("/api/registrations/{id}/candidates?measure=cosine"),
        None,
    )
    .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::CONFLICT, Some("conflict"))
    );
    let (status, _) = call(
        &app,
        Method::GET,
        &format!("/api/registrations/{id}/candidates?k=21"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn confirmation_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine();
    let app = app(&engine, &dir.path().join("log.jsonl"));
    let id = nct(&engine, 2);
    let (_, page) = call(
        &app,
        Method::GET,
        &format!("/api/registrations/{id}/candidates"),
        None,
    )
    .await;

    let (status, session) = decide(&app, &id, &pmid_at(&page, 3), "confirmed").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(session["confirmed"].as_str().unwrap(), pmid_at(&page, 3));
    assert_eq!(session["status"], "closed");
    assert_eq!(session["decisions"][0]["rank"], 3);

    let (status, body) = decide(&app, &id, &pmid_at(&page, 1), "confirmed").await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::CONFLICT, Some("conflict"))
    );

    let (status, session) = call(
        &app,
        Method::POST,
        &format!("/api/sessions/{id}/reopen"),
        None,
    )
    .await;
    assert_eq!(
        (status, session["status"].as_str()),
        (StatusCode::OK, Some("open"))
    );
    let (status, session) = decide(&app, &id, &pmid_at(&page, 1), "confirmed").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(session["confirmed"].as_str().unwrap(), pmid_at(&page, 1));
    let demoted = session["decisions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|d| d["rank"] == 3)
        .unwrap();
    assert_eq!(demoted["decision"], "rejected");
    assert_eq!(
        session["audit"][0]["pmid"].as_str().unwrap(),
        pmid_at(&page, 3)
    );
    assert_eq!(
        session["audit"][0]["superseded_by"].as_str().unwrap(),
        pmid_at(&page, 1)
    );

    let (_, links) = call(&app, Method::GET, "/api/links/confirmed", None).await;
    assert_eq!(links.as_array().unwrap().len(), 1);
    assert_eq!(links[0]["pmid"].as_str().unwrap(), pmid_at(&page, 1));

    call(
        &app,
        Method::POST,
        &format!("/api/sessions/{id}/reopen"),
        None,
    )
    .await;
    let (status, body) = decide(&app, &id, "1", "rejected").await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_argument"))
    );
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/api/sessions/{id}/decisions"),
        Some(json!({"pmid": "x"})),
    )
    .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_argument"))
    );
    let (status, _) = call(&app, Method::POST, "/api/sessions/NCT00000000/reopen", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn decisions_open_a_default_session_and_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let engine = engine();
    let app = app(&engine, &log);
    let id = nct(&engine, 3);
    let top = engine
        .rank(&NctId::new(&id).unwrap(), MethodConfig::default(), Some(1))
        .unwrap()
        .ranking[0]
        .pmid;
    let body =
        json!({"pmid": top.0, "decision": "unsure", "decision_id": "d-1", "note": "check dates"});
    let uri = format!("/api/sessions/{id}/decisions");
    let (status, first) = call(&app, Method::POST, &uri, Some(body.clone())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first["k"], 50);
    assert_eq!(first["decisions"][0]["note"], "check dates");
    let lines = std::fs::read_to_string(&log).unwrap().lines().count();
    let (status, again) = call(&app, Method::POST, &uri, Some(body)).await;
    assert_eq!((status, &again), (StatusCode::OK, &first));
    assert_eq!(
        std::fs::read_to_string(&log).unwrap().lines().count(),
        lines
    );
}

#[tokio::test]
async fn progress_and_export_track_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine();
    let app = app(&engine, &dir.path().join("log.jsonl"));
    let (_, p) = call(&app, Method::GET, "/api/progress", None).await;
    assert_eq!(p["sessions"], json!({"open": 0, "closed": 0, "total": 0}));
    assert_eq!(p["decisions"]["total"], 0);
    assert_eq!(p["screening_curve"], json!([]));
    let (_, links) = call(&app, Method::GET, "/api/links/confirmed", None).await;
    assert_eq!(links, json!([]));

    let ids: Vec<String> = [5, 4, 6, 7].iter().map(|&i| nct(&engine, i)).collect();
    let mut pages = Vec::new();
    for id in &ids {
        pages.push(
            call(
                &app,
                Method::GET,
                &format!("/api/registrations/{id}/candidates"),
                None,
            )
            .await
            .1,
        );
    }
    decide(&app, &ids[3], &pmid_at(&pages[3], 2), "rejected").await;
    let (_, p) = call(&app, Method::GET, "/api/progress", None).await;
    assert_eq!(p["sessions"], json!({"open": 4, "closed": 0, "total": 4}));
    for (i, rank) in [(0, 1), (1, 4), (2, 1)] {
        decide(&app, &ids[i], &pmid_at(&pages[i], rank), "confirmed").await;
    }
    let (_, p) = call(&app, Method::GET, "/api/progress", None).await;
    assert_eq!(p["sessions"], json!({"open": 1, "closed": 3, "total": 4}));
    assert_eq!(
        p["decisions"],
        json!({"confirmed": 3, "rejected": 1, "unsure": 0, "total": 4})
    );
    assert_eq!(p["candidates_offered"], 200);
    assert_eq!(
        p["screening_curve"][0],
        json!({"inspected": 1, "found": 2, "recall": 2.0 / 3.0})
    );
    assert_eq!(p["screening_curve"][3]["recall"], 1.0);

    let (_, links) = call(&app, Method::GET, "/api/links/confirmed", None).await;
    let got: Vec<&str> = links
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l["nct_id"].as_str().unwrap())
        .collect();
    let mut expected: Vec<&str> = ids[..3].iter().map(String::as_str).collect();
    expected.sort();
    assert_eq!(got, expected);

    let (status, tsv) = call_raw(&app, Method::GET, "/api/links/confirmed?format=tsv", None).await;
    assert_eq!(status, StatusCode::OK);
    let tsv = String::from_utf8(tsv).unwrap();
    let rows: Vec<&str> = tsv.lines().collect();
    assert_eq!(rows[0], "nct_id\tpmid\tdecided_at\trank\tconfig");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with(&format!("{}\t", expected[0])));
    let benchmark = trialink_core::Benchmark::from_tsv(
        tsv.as_bytes(),
        "screened",
        trialink_core::BenchmarkKind::Curated,
    )
    .unwrap();
    assert_eq!(benchmark.links.len(), 3);

    let (_, queue) = call(&app, Method::GET, "/api/sessions?status=open", None).await;
    assert_eq!(queue.as_array().unwrap().len(), 1);
    assert_eq!(queue[0]["nct_id"].as_str().unwrap(), ids[3]);
    let (_, all) = call(&app, Method::GET, "/api/sessions", None).await;
    let order: Vec<&str> = all
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["nct_id"].as_str().unwrap())
        .collect();
    assert_eq!(order, ids.iter().map(String::as_str).collect::<Vec<_>>());
}

#[tokio::test]
async fn restart_replays_to_the_same_state() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let engine = engine();
    let before = {
        let app = app(&engine, &log);
        for i in 0..3 {
            let id = nct(&engine, i);
            let (_, page) = call(
                &app,
                Method::GET,
                &format!("/api/registrations/{id}/candidates"),
                None,
            )
            .await;
            decide(&app, &id, &pmid_at(&page, 1), "rejected").await;
            decide(
                &app,
                &id,
                &pmid_at(&page, 2),
                if i == 1 { "unsure" } else { "confirmed" },
            )
            .await;
        }
        let mut snapshot = Vec::new();
        for uri in [
            "/api/progress",
            "/api/sessions",
            "/api/links/confirmed",
            &format!("/api/sessions/{}", nct(&engine, 0)),
        ] {
            snapshot.push(call_raw(&app, Method::GET, uri, None).await.1);
        }
        snapshot
    };
    let app = app(&engine, &log);
    let mut after = Vec::new();
    for uri in [
        "/api/progress",
        "/api/sessions",
        "/api/links/confirmed",
        &format!("/api/sessions/{}", nct(&engine, 0)),
    ] {
        after.push(call_raw(&app, Method::GET, uri, None).await.1);
    }
    assert_eq!(before, after);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_decisions_stay_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let engine = engine();
    let app = app(&engine, &log);
    let ids: Vec<String> = (0..8).map(|i| nct(&engine, i)).collect();
    let mut pages = Vec::new();
    for id in &ids {
        pages.push(
            call(
                &app,
                Method::GET,
                &format!("/api/registrations/{id}/candidates?k=10"),
                None,
            )
            .await
            .1,
        );
    }
    let mut tasks = Vec::new();
    for (id, page) in ids.iter().zip(&pages) {
        for rank in 1..=10 {
            let (app, id, pmid) = (app.clone(), id.clone(), pmid_at(page, rank));
            tasks.push(tokio::spawn(async move {
                decide(&app, &id, &pmid, "rejected").await.0
            }));
        }
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
    let (_, live) = call(&app, Method::GET, "/api/progress", None).await;
    assert_eq!(live["decisions"]["rejected"], 80);
    let (_, replayed) = call(
        &self::app(&engine, &log),
        Method::GET,
        "/api/progress",
        None,
    )
    .await;
    assert_eq!(live, replayed);
    let log = std::fs::read_to_string(&log).unwrap();
    let seqs: Vec<u64> = log
        .lines()
        .map(|l| {
            serde_json::from_str::<Value>(l).unwrap()["seq"]
                .as_u64()
                .unwrap()
        })
        .collect();
    assert_eq!(seqs, (1..=seqs.len() as u64).collect::<Vec<_>>());
}

#[tokio::test]
async fn screening_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let engine = engine();
    let id = nct(&engine, 9);
    let app = app(&engine, &log);
    let (_, page) = call(
        &app,
        Method::GET,
        &format!("/api/registrations/{id}/candidates?k=50"),
        None,
    )
    .await;
    assert_eq!(page["candidates"].as_array().unwrap().len(), 50);
    decide(&app, &id, &pmid_at(&page, 1), "rejected").await;
    decide(&app, &id, &pmid_at(&page, 2), "rejected").await;
    decide(&app, &id, &pmid_at(&page, 3), "confirmed").await;
    let (_, links) = call(&app, Method::GET, "/api/links/confirmed", None).await;
    assert_eq!(links.as_array().unwrap().len(), 1);
    assert_eq!(
        (
            links[0]["nct_id"].as_str().unwrap(),
            links[0]["pmid"].as_str().unwrap()
        ),
        (id.as_str(), pmid_at(&page, 3).as_str())
    );

    let reloaded = self::app(&engine, &log);
    let (_, again) = call(
        &reloaded,
        Method::GET,
        &format!("/api/registrations/{id}/candidates"),
        None,
    )
    .await;
    let decisions: Vec<Value> = again["candidates"].as_array().unwrap()[..4]
        .iter()
        .map(|c| c["decision"]["decision"].clone())
        .collect();
    assert_eq!(
        decisions,
        [
            json!("rejected"),
            json!("rejected"),
            json!("confirmed"),
            Value::Null
        ]
    );
    assert_eq!(again["status"], "closed");
}
