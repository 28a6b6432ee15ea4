//! Every endpoint's success and error responses against checked-in JSON.
//!
//! Regenerate with `UPDATE_GOLDEN=1 cargo test -p imgraph-service --test api_golden`.

mod common;

use std::time::{Duration, Instant};

use axum::http::{Method, StatusCode};
use serde_json::json;

use common::{app, call, verify};

#[tokio::test]
async fn config_and_session() {
    verify(&common::config_and_session().await).unwrap();
}

#[tokio::test]
async fn search_responses() {
    verify(&common::search().await).unwrap();
}

#[tokio::test]
async fn drag_responses() {
    verify(&common::drag().await).unwrap();
}

#[tokio::test]
async fn zoom_responses() {
    verify(&common::zoom().await).unwrap();
}

#[tokio::test]
async fn recenter_responses() {
    verify(&common::recenter().await).unwrap();
}

#[tokio::test]
async fn idle_sessions_are_evicted() {
    let state = app();
    state.open_session("old");
    assert_eq!(state.evict_idle(Instant::now()), 0);
    assert_eq!(state.evict_idle(Instant::now() + Duration::from_secs(31 * 60)), 1);
    assert_eq!(state.session_count(), 0);
    let (status, body) = call(&state, Method::GET, "/api/search?session=old&q=kw0", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body, json!({ "error": "UnknownSession" }));
}
