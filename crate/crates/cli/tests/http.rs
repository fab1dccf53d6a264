use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use draftlab_cli::http::router;
use draftlab_core::agents::{AgentCatalog, RandomAgent};
use draftlab_core::engine::simulate_corpus;
use draftlab_core::service::DraftService;
use draftlab_core::{training, CardSet, Collection, PickContext};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    let set = Arc::new(CardSet::desk());
    let mut catalog = AgentCatalog::new(Arc::clone(&set));
    catalog.add_bayes("toy", Arc::new(toy_bayes(&set))).unwrap();
    router(Arc::new(DraftService::new(vec![catalog])), &[])
}

fn toy_bayes(set: &Arc<CardSet>) -> draftlab_core::agents::BayesModel {
    let a: Arc<dyn draftlab_core::Agent> = Arc::new(RandomAgent::new(5));
    let logs = simulate_corpus(set, &vec![a; 8], 5, 1, &[0, 1, 2, 3, 4, 5, 6, 7]).unwrap();
    training::train_bayes(&logs, set, true).unwrap()
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value, String) {
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
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let json = serde_json::from_str(&text).unwrap_or(Value::Null);
    (status, json, text)
}

async fn create(app: &Router, seed: u64) -> Value {
    let (status, v, _) = call(app, "POST", "/drafts", Some(json!({"agents": vec!["draftsim"; 7], "seed": seed}))).await;
    assert_eq!(status, StatusCode::CREATED);
    v
}

#[tokio::test]
async fn sets_listing() {
    let app = app();
    let (status, v, _) = call(&app, "GET", "/sets", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v[0]["code"], "DESK");
    assert_eq!(v[0]["cards"].as_array().unwrap().len(), 40);
    assert_eq!(v[0]["bayes_models"], json!(["toy"]));
}

#[tokio::test]
async fn create_validates_agents() {
    let app = app();
    let v = create(&app, 7).await;
    assert_eq!(v["pack"].as_array().unwrap().len(), 15);
    assert_eq!(v["pick_number"], 1);
    assert_eq!(create(&app, 7).await["pack"], v["pack"]);

    let (status, err, _) = call(&app, "POST", "/drafts", Some(json!({"agents": vec!["draftsim"; 6]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "bad_agents");
    assert!(err["message"].is_string());

    let (status, err, _) = call(&app, "POST", "/drafts", Some(json!({"agents": vec!["oracle"; 7]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "unknown_agent");

    let (status, err, _) = call(&app, "POST", "/drafts", Some(json!({"bots": 3}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "bad_request");
}

#[tokio::test]
async fn unknown_draft_is_404() {
    let app = app();
    let (status, err, _) = call(&app, "GET", "/drafts/missing/state", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "not_found");
}

#[tokio::test]
async fn pick_flow_and_log() {
    let app = app();
    let v = create(&app, 11).await;
    let id = v["draft_id"].as_str().unwrap().to_string();

    let in_pack: Vec<u64> = v["pack"].as_array().unwrap().iter().map(|c| c["index"].as_u64().unwrap()).collect();
    let outside = (0..40).find(|c| !in_pack.contains(c)).unwrap();
    let (status, err, _) = call(
        &app,
        "POST",
        &format!("/drafts/{id}/pick"),
        Some(json!({"card": outside, "pick_number": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "illegal_pick");
    assert!(!err["legal_picks"].as_array().unwrap().is_empty());
    let (_, unchanged, _) = call(&app, "GET", &format!("/drafts/{id}/state"), None).await;
    assert_eq!(unchanged, v);

    let (status, _, _) = call(&app, "GET", &format!("/drafts/{id}/log"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let mut state = v;
    while state["status"] == "awaiting_human" {
        let pick = state["pick_number"].as_u64().unwrap();
        let card = state["pack"][0]["index"].as_u64().unwrap();
        let (status, next, _) = call(
            &app,
            "POST",
            &format!("/drafts/{id}/pick"),
            Some(json!({"card": card, "pick_number": pick})),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        if pick == 1 {
            assert_eq!(next["pick_number"], 2);
            assert_eq!(next["pack"].as_array().unwrap().len(), 14);
            let (status, stale, _) = call(
                &app,
                "POST",
                &format!("/drafts/{id}/pick"),
                Some(json!({"card": card, "pick_number": 1})),
            )
            .await;
            assert_eq!(status, StatusCode::CONFLICT);
            assert_eq!(stale["code"], "stale_pick");
        }
        state = next;
    }
    assert_eq!(state["status"], "finished");
    assert!(state["pack"].as_array().unwrap().is_empty());

    let (status, _, text) = call(&app, "GET", &format!("/drafts/{id}/log"), None).await;
    assert_eq!(status, StatusCode::OK);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 9);
    let file = draftlab_core::dataset::read_logs_from(text.as_bytes(), std::path::Path::new("response")).unwrap();
    file.validate(&CardSet::desk()).unwrap();
    assert_eq!(file.logs.iter().filter(|l| l.is_human()).count(), 1);

    let (status, err, _) = call(
        &app,
        "POST",
        &format!("/drafts/{id}/pick"),
        Some(json!({"card": 0, "pick_number": 45})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "draft_finished");
}

#[tokio::test]
async fn responses_hide_bot_seats() {
    let app = app();
    let v = create(&app, 2).await;
    let id = v["draft_id"].as_str().unwrap();
    let card = v["pack"][0]["index"].as_u64().unwrap();
    let (_, after, _) = call(&app, "POST", &format!("/drafts/{id}/pick"), Some(json!({"card": card, "pick_number": 1}))).await;
    let mut keys: Vec<&String> = after.as_object().unwrap().keys().collect();
    keys.sort();
    assert_eq!(
        keys,
        [
            "agents",
            "collection",
            "draft_id",
            "human_seat",
            "pack",
            "pack_number",
            "pick_in_pack",
            "pick_number",
            "picks_made",
            "seed",
            "set_code",
            "status"
        ]
    );
    assert_eq!(after["collection"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn suggestions_match_library_call() {
    let app = app();
    let v = create(&app, 4).await;
    let id = v["draft_id"].as_str().unwrap();
    let uri = format!("/drafts/{id}/suggestions?agent=bayes:toy");
    let (status, a, _) = call(&app, "GET", &uri, None).await;
    assert_eq!(status, StatusCode::OK);
    let (_, b, _) = call(&app, "GET", &uri, None).await;
    assert_eq!(a, b);
    let (_, after, _) = call(&app, "GET", &format!("/drafts/{id}/state"), None).await;
    assert_eq!(after, v);

    let set = Arc::new(CardSet::desk());
    let model = toy_bayes(&set);
    let pack: Vec<usize> = v["pack"].as_array().unwrap().iter().map(|c| c["index"].as_u64().unwrap() as usize).collect();
    let collection = Collection::empty(set.len());
    let scores = model
        .scores(&PickContext {
            pack: &pack,
            collection: &collection,
            global_pick: 1,
        })
        .unwrap();
    for s in a["ranked"].as_array().unwrap() {
        let card = s["card"]["index"].as_u64().unwrap() as usize;
        let slot = pack.iter().position(|&c| c == card).unwrap();
        assert_eq!(s["score"].as_f64().unwrap(), scores[slot]);
    }

    let (status, err, _) = call(&app, "GET", &format!("/drafts/{id}/suggestions?agent=bayes:nope"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "unknown_agent");
}

#[tokio::test]
async fn cors_preflight_allowed() {
    let app = app();
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/drafts")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert!(resp.headers().contains_key("access-control-allow-origin"));
}
