//! API scenarios shared by the golden-file tests and the acceptance run.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use imgraph_core::generate_synthetic;
use imgraph_core::navigator::NavConfig;
use imgraph_service::api::{router, ApiSettings, AppState};
use imgraph_service::improver::GraphStore;
use imgraph_service::Collection;

pub const COLS: i64 = 4;
pub const ROWS: i64 = 3;

/// One recorded response, compared against `tests/golden/<name>.json`.
pub struct Entry {
    pub name: &'static str,
    pub status: StatusCode,
    pub body: Value,
}

pub fn app() -> AppState {
    let c = Collection::build(generate_synthetic(2, 60, true, 7).unwrap(), 7)
        .unwrap()
        .with_url_template("https://img.example/{id}.jpg")
        .unwrap();
    let (_, graph, keywords, url) = c.into_parts();
    let settings = ApiSettings {
        cols: COLS as usize,
        rows: ROWS as usize,
        nav: NavConfig::default(),
        ..ApiSettings::default()
    };
    AppState::new(keywords, url, Arc::new(GraphStore::new(graph)), settings).unwrap()
}

pub async fn call(state: &AppState, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes)
        .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.json"))
}

/// Compares with the golden file, or rewrites it when `UPDATE_GOLDEN` is set.
pub fn check(entry: &Entry) -> Result<(), String> {
    let path = golden_path(entry.name);
    let actual = json!({ "status": entry.status.as_u16(), "body": entry.body });
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(&actual).unwrap() + "\n").unwrap();
        return Ok(());
    }
    let text = std::fs::read_to_string(&path).map_err(|_| format!("missing golden file {}", path.display()))?;
    let expected: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", entry.name))?;
    if actual == expected {
        Ok(())
    } else {
        Err(format!("{}: got {actual}, want {expected}", entry.name))
    }
}

/// Structural check shared by every map response.
pub fn map_shape(v: &Value) -> Result<(), String> {
    let fail = |what: &str| Err(format!("bad map response ({what}): {v}"));
    let Some(obj) = v.as_object() else { return fail("not an object") };
    if obj.len() != 4 || !obj.get("layer").is_some_and(Value::is_u64) {
        return fail("top-level fields");
    }
    let Some(cells) = obj.get("cells").and_then(Value::as_array) else { return fail("cells") };
    if cells.len() as i64 > COLS * ROWS {
        return fail("too many cells");
    }
    let mut seen = std::collections::HashSet::new();
    for c in cells {
        let ok = c.as_object().is_some_and(|c| c.len() == 3)
            && c["id"].is_u64()
            && c["x"].is_i64()
            && c["y"].is_i64()
            && seen.insert((c["x"].as_i64(), c["y"].as_i64()));
        if !ok {
            return fail("cell");
        }
    }
    let Some(related) = obj.get("related").and_then(Value::as_array) else { return fail("related") };
    if !related.iter().all(|r| r["label"].is_string() && r["id"].is_u64()) {
        return fail("related entry");
    }
    let Some(transitions) = obj.get("transitions").and_then(Value::as_array) else { return fail("transitions") };
    let keys = ["id", "fromX", "fromY", "toX", "toY"];
    if !transitions.iter().all(|t| keys.iter().all(|k| t[k].is_i64())) {
        return fail("transition entry");
    }
    Ok(())
}

fn entry(name: &'static str, (status, body): (StatusCode, Value)) -> Entry {
    Entry { name, status, body }
}

pub async fn config_and_session() -> Vec<Entry> {
    let state = app();
    let mut out = vec![entry("config", call(&state, Method::GET, "/api/config", None).await)];
    let (status, mut body) = call(&state, Method::POST, "/api/session", None).await;
    let id = body["sessionId"].as_str().unwrap_or_default().to_string();
    assert_eq!(id.len(), 32, "session id {id:?}");
    body["sessionId"] = json!("<session>");
    out.push(entry("session_created", (status, body)));
    // the issued id is accepted by the other endpoints
    let uri = format!("/api/search?session={id}&q=kw0");
    out.push(entry("search_ok", call(&state, Method::GET, &uri, None).await));
    out
}

pub async fn search() -> Vec<Entry> {
    let state = app();
    state.open_session("g");
    let get = |q: &'static str| {
        let state = state.clone();
        async move { call(&state, Method::GET, q, None).await }
    };
    vec![
        entry("search_ok", get("/api/search?session=g&q=kw0").await),
        entry("search_ok", get("/api/search?session=g&q=KW0").await),
        entry("search_keyword_not_found", get("/api/search?session=g&q=zebra").await),
        entry("search_unknown_session", get("/api/search?session=nobody&q=kw0").await),
        entry("search_bad_request", get("/api/search?session=g").await),
        entry("search_bad_request", get("/api/search?session=g&q=").await),
    ]
}

pub async fn drag() -> Vec<Entry> {
    let state = app();
    state.open_session("g");
    let drag = |dx: i64, dy: i64| Some(json!({ "session": "g", "dx": dx, "dy": dy }));
    let mut out = vec![entry("drag_no_map", call(&state, Method::POST, "/api/drag", drag(1, 0)).await)];
    let (_, start) = call(&state, Method::GET, "/api/search?session=g&q=kw1", None).await;
    out.push(entry("drag_ok", call(&state, Method::POST, "/api/drag", drag(1, -1)).await));
    let (_, back) = call(&state, Method::POST, "/api/drag", drag(-1, 1)).await;
    assert_eq!(back["cells"], start["cells"], "drag round trip");
    let bad = Some(json!({ "session": "g", "dx": "one" }));
    out.push(entry("drag_bad_request", call(&state, Method::POST, "/api/drag", bad).await));
    out
}

pub async fn zoom() -> Vec<Entry> {
    let state = app();
    state.open_session("g");
    let zoom = |dir: &str| Some(json!({ "session": "g", "direction": dir, "focusX": 0, "focusY": 0 }));
    let mut out = vec![entry("zoom_no_map", call(&state, Method::POST, "/api/zoom", zoom("in")).await)];
    let (_, map) = call(&state, Method::GET, "/api/search?session=g&q=kw0", None).await;
    assert_eq!(map["layer"], 1);
    out.push(entry("zoom_at_top", call(&state, Method::POST, "/api/zoom", zoom("out")).await));
    out.push(entry("zoom_in_ok", call(&state, Method::POST, "/api/zoom", zoom("in")).await));
    out.push(entry("zoom_at_bottom", call(&state, Method::POST, "/api/zoom", zoom("in")).await));
    out.push(entry("zoom_out_ok", call(&state, Method::POST, "/api/zoom", zoom("out")).await));
    out.push(entry("zoom_bad_request", call(&state, Method::POST, "/api/zoom", zoom("sideways")).await));
    out
}

pub async fn recenter() -> Vec<Entry> {
    let state = app();
    state.open_session("g");
    let (_, map) = call(&state, Method::GET, "/api/search?session=g&q=kw0", None).await;
    let target = map["cells"][0]["id"].as_u64().unwrap();
    let body = |v: Value| Some(v);
    vec![
        entry(
            "recenter_ok",
            call(&state, Method::POST, "/api/recenter", body(json!({ "session": "g", "imageId": target }))).await,
        ),
        entry(
            "recenter_not_found",
            call(&state, Method::POST, "/api/recenter", body(json!({ "session": "g", "imageId": 424242 }))).await,
        ),
        entry(
            "recenter_bad_request",
            call(&state, Method::POST, "/api/recenter", body(json!({ "session": "g" }))).await,
        ),
    ]
}

/// Every scenario, in a fixed order.
pub async fn all_entries() -> Vec<Entry> {
    let mut out = config_and_session().await;
    out.extend(search().await);
    out.extend(drag().await);
    out.extend(zoom().await);
    out.extend(recenter().await);
    out
}

/// Golden + shape checks over a list of entries.
pub fn verify(entries: &[Entry]) -> Result<(), String> {
    for e in entries {
        check(e)?;
        if e.status == StatusCode::OK {
            map_shape(&e.body).or_else(|err| if e.name == "config" { Ok(()) } else { Err(err) })?;
        }
    }
    Ok(())
}
