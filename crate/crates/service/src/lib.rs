//! HTTP service for ranking candidates and recording screening decisions.
//!
//! Ranking reads the shared [`Engine`](trialink_core::Engine) concurrently.
//! Decisions go through one serialized writer that syncs each log entry to
//! disk before answering.

pub mod api;
pub mod error;
pub mod store;

use std::future::Future;

use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;

pub use api::{AppState, ServiceConfig};
pub use error::{ApiError, ErrorCode};
pub use store::{Decision, SessionStatus, Store, StoreError};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/meta", get(api::get_meta))
        .route("/api/registrations", get(api::list_registrations))
        .route(
            "/api/registrations/{nct_id}/candidates",
            get(api::get_candidates),
        )
        .route("/api/sessions", get(api::list_sessions))
        .route("/api/sessions/{nct_id}", get(api::get_session))
        .route("/api/sessions/{nct_id}/decisions", post(api::post_decision))
        .route("/api/sessions/{nct_id}/reopen", post(api::post_reopen))
        .route("/api/progress", get(api::get_progress))
        .route("/api/links/confirmed", get(api::get_confirmed_links))
        .fallback(api::fallback)
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
