//! Drives the /v1 API in-process: create a session from a fixture, answer
//! until it finishes, then read the explain table of a fresh one.
//!
//!     cargo run -p sqlclarify-service --example http_session
//!
//! The same requests work against `sqlclarify serve --fixture <file>`.

use axum::body::Body;
use axum::http::{Method, Request};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use sqlclarify::source::load_fixtures;
use sqlclarify_service::api::{router, AppState, ServiceOptions};

async fn call(app: &AppState, method: Method, uri: &str, body: Option<Value>) -> (u16, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = router(app.clone()).oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::main]
async fn main() {
    let fixtures = load_fixtures(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/fig3.json")).unwrap();
    let app = AppState::new(ServiceOptions { fixtures, ..ServiceOptions::default() });

    let (status, created) = call(&app, Method::POST, "/v1/sessions", Some(json!({"instance_id": "fig3"}))).await;
    let mut view = created["payload"].clone();
    let id = view["session_id"].as_str().unwrap().to_string();
    println!("POST /v1/sessions -> {status}, session {id}");

    while view["status"] == "AWAITING_ANSWER" {
        let q = &view["pending_question"];
        println!("  {}", q["text"].as_str().unwrap());
        let turn = view["turn"].clone();
        let (status, reply) =
            call(&app, Method::POST, &format!("/v1/sessions/{id}/answer"), Some(json!({"turn": turn, "option": 0}))).await;
        view = reply["payload"].clone();
        let probs: Vec<String> = view["candidates"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| format!("Q{}={:.2}", c["id"], c["probability"].as_f64().unwrap()))
            .collect();
        println!("  answer option 0 -> {status}; {}; H trace {}", probs.join(" "), view["entropy_trace"]);
    }
    println!("final: {}", view["result"]["sql"].as_str().unwrap());

    // a second post for the same turn is a replay, not a second answer
    let (status, _) = call(&app, Method::POST, &format!("/v1/sessions/{id}/answer"), Some(json!({"turn": 0, "option": 0}))).await;
    println!("replay turn 0 -> {status}");
    let (status, err) = call(&app, Method::POST, &format!("/v1/sessions/{id}/answer"), Some(json!({"option": 0}))).await;
    println!("answer after finish -> {status} {}", err["error"]);

    let (_, fresh) = call(&app, Method::POST, "/v1/sessions", Some(json!({"instance_id": "fig3"}))).await;
    let fresh_id = fresh["payload"]["session_id"].as_str().unwrap();
    let (_, explain) = call(&app, Method::GET, &format!("/v1/sessions/{fresh_id}/explain"), None).await;
    println!("\nexplain, H(Y) = {:.3}", explain["payload"]["table"]["entropy"].as_f64().unwrap());
    for row in explain["payload"]["table"]["rows"].as_array().unwrap() {
        println!(
            "  X{} {:<18} EIG {:.3}  H(Y|X) {:.3}{}",
            row["variable_id"],
            row["slot"]["key"].as_str().filter(|k| !k.is_empty()).unwrap_or(row["slot"]["clause"].as_str().unwrap()),
            row["eig"].as_f64().unwrap(),
            row["conditional_entropy"].as_f64().unwrap(),
            if row["selected"] == true { "  <- asked next" } else { "" }
        );
    }
    let (status, _) = call(&app, Method::DELETE, &format!("/v1/sessions/{fresh_id}"), None).await;
    println!("DELETE -> {status}");
}
