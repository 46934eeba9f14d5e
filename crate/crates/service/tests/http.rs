use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use gamebot_core::exact::ExactAgent;
use gamebot_core::{play_match, GameSpec, Seats};
use gamebot_service::{router, Service, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

struct App {
    _dir: TempDir,
    svc: Arc<Service>,
}

fn app() -> App {
    let dir = TempDir::new().unwrap();
    let svc = Arc::new(Service::open(ServiceConfig::new(dir.path())).unwrap());
    App { _dir: dir, svc }
}

async fn call(app: &App, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(app.svc.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn error_code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap()
}

#[tokio::test]
async fn tictactoe_game_over_http() {
    let app = app();
    let (status, created) = call(
        &app,
        "POST",
        "/api/sessions",
        Some(json!({"game": "tictactoe", "agent": "dictionary", "participant": "ada"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let id = created["session_id"].as_str().unwrap().to_string();
    let view = &created["view"];
    assert_eq!(view["status"], "active");
    assert_eq!(view["to_move"], "first");
    assert_eq!(view["legal_actions"].as_array().unwrap().len(), 9);

    let (status, got) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(got["view"], created["view"]);

    // Always take the lowest legal cell until the game ends.
    let mut last = Value::Null;
    for _ in 0..5 {
        let (_, cur) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
        let Some(action) = cur["view"]["legal_actions"][0].as_u64() else {
            break;
        };
        let (status, moved) = call(
            &app,
            "POST",
            &format!("/api/sessions/{id}/moves"),
            Some(json!({"action": action})),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{moved}");
        last = moved;
        if last["view"]["status"] == "finished" {
            break;
        }
        assert_eq!(last["agent_moves"].as_array().unwrap().len(), 1);
    }
    assert_eq!(last["view"]["status"], "finished");
    let outcome = &last["outcome"];
    assert!(outcome.is_object());
    assert_ne!(
        outcome["winner"], "first",
        "the dictionary agent never loses"
    );
    assert_eq!(last["record_id"].as_str().unwrap(), id);
    assert_eq!(last["rating_delta"][0]["participant"], "ada");

    let (_, board) = call(&app, "GET", "/api/leaderboard", None).await;
    let entries = board["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["participant"], "ada");
    assert_eq!(entries[0]["games"], 1);

    let (status, closed) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/moves"),
        Some(json!({"action": 0})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(error_code(&closed), "SESSION_CLOSED");

    let (_, health) = call(&app, "GET", "/api/health", None).await;
    assert_eq!(health["status"], "ok");
    assert_eq!(health["pending_records"], 1);
}

#[tokio::test]
async fn error_codes() {
    let app = app();
    let (status, v) = call(
        &app,
        "POST",
        "/api/sessions",
        Some(json!({"game": "go", "agent": "exact"})),
    )
    .await;
    assert_eq!(
        (status, error_code(&v)),
        (StatusCode::BAD_REQUEST, "INVALID_CONFIG")
    );

    let (status, v) = call(
        &app,
        "POST",
        "/api/sessions",
        Some(json!({"game": "nim", "config": {"n": 8, "pits": 2}, "agent": "exact"})),
    )
    .await;
    assert_eq!(
        (status, error_code(&v)),
        (StatusCode::BAD_REQUEST, "INVALID_CONFIG")
    );

    let (status, v) = call(
        &app,
        "POST",
        "/api/sessions",
        Some(json!({"game": "nim", "agent": "alphazero"})),
    )
    .await;
    assert_eq!(
        (status, error_code(&v)),
        (StatusCode::BAD_REQUEST, "UNKNOWN_AGENT")
    );

    let (status, v) = call(
        &app,
        "POST",
        "/api/sessions",
        Some(json!({"agent": "exact"})),
    )
    .await;
    assert_eq!(
        (status, error_code(&v)),
        (StatusCode::BAD_REQUEST, "BAD_REQUEST")
    );

    let (status, v) = call(&app, "GET", "/api/sessions/nope", None).await;
    assert_eq!(
        (status, error_code(&v)),
        (StatusCode::NOT_FOUND, "NOT_FOUND")
    );

    let (_, created) = call(
        &app,
        "POST",
        "/api/sessions",
        Some(json!({"game": "tictactoe", "agent": "dictionary", "human_seat": "second"})),
    )
    .await;
    let id = created["session_id"].as_str().unwrap();
    assert_eq!(created["agent_moves"].as_array().unwrap().len(), 1);
    let taken = created["agent_moves"][0].as_u64().unwrap();
    let before = call(&app, "GET", &format!("/api/sessions/{id}"), None)
        .await
        .1;
    let (status, v) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/moves"),
        Some(json!({"action": taken})),
    )
    .await;
    assert_eq!(
        (status, error_code(&v)),
        (StatusCode::UNPROCESSABLE_ENTITY, "ILLEGAL_MOVE")
    );
    let (status, v) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/moves"),
        Some(json!({"action": "x"})),
    )
    .await;
    assert_eq!(
        (status, error_code(&v)),
        (StatusCode::BAD_REQUEST, "BAD_REQUEST")
    );
    assert_eq!(
        call(&app, "GET", &format!("/api/sessions/{id}"), None)
            .await
            .1,
        before
    );
}

#[tokio::test]
async fn records_endpoint_rates_once() {
    let app = app();
    let spec = GameSpec::nim(10, 3).unwrap();
    let mut rec = play_match(&spec, &mut ExactAgent, &mut ExactAgent, 0);
    rec.record_id = "r1".into();
    rec.agents = Seats::new("human:ada", "minimax:Hard");
    let body = json!({"record": rec});
    let (status, first) = call(&app, "POST", "/api/records", Some(body.clone())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first["duplicate"], false);
    let delta = first["rating_delta"][0]["delta"].as_f64().unwrap();
    let oracle = 32.0 * (1.0 - 1.0 / (1.0 + 10f64.powf(600.0 / 400.0)));
    assert!((delta - oracle).abs() < 1e-9);

    let (_, second) = call(&app, "POST", "/api/records", Some(body)).await;
    assert_eq!(second["duplicate"], true);
    assert_eq!(second["rating_delta"], first["rating_delta"]);

    let mut bad = rec.clone();
    bad.record_id = "r2".into();
    bad.moves[0].action = 9;
    let (status, v) = call(&app, "POST", "/api/records", Some(json!({"record": bad}))).await;
    assert_eq!(
        (status, error_code(&v)),
        (StatusCode::UNPROCESSABLE_ENTITY, "INVALID_RECORD")
    );

    let (_, board) = call(&app, "GET", "/api/leaderboard?limit=5", None).await;
    assert_eq!(board["entries"][0]["games"], 1);
}

#[tokio::test]
async fn leaderboard_limit_query() {
    let app = app();
    let spec = GameSpec::nim(10, 3).unwrap();
    for i in 0..10 {
        let mut rec = play_match(&spec, &mut ExactAgent, &mut ExactAgent, i);
        rec.record_id = format!("g{i}");
        rec.agents = Seats::new(format!("human:p{i}"), "minimax:Easy");
        app.svc.record_result(rec).unwrap();
    }
    let (_, board) = call(&app, "GET", "/api/leaderboard?limit=3", None).await;
    assert_eq!(board["entries"].as_array().unwrap().len(), 3);
    let (_, board) = call(&app, "GET", "/api/leaderboard", None).await;
    assert_eq!(board["entries"].as_array().unwrap().len(), 10);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn serve_drains_queue_on_shutdown() {
    let dir = TempDir::new().unwrap();
    let svc = Arc::new(Service::open(ServiceConfig::new(dir.path())).unwrap());
    let spec = GameSpec::nim(10, 3).unwrap();
    for i in 0..3 {
        let mut rec = play_match(&spec, &mut ExactAgent, &mut ExactAgent, i);
        rec.record_id = format!("d{i}");
        rec.agents = Seats::new("human:ada", "exact");
        svc.record_result(rec).unwrap();
    }
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let (addr_tx, addr_rx) = tokio::sync::oneshot::channel();
    let server = tokio::spawn(gamebot_service::bind_and_serve(
        svc.clone(),
        "127.0.0.1:0".parse().unwrap(),
        move |a| {
            let _ = addr_tx.send(a);
        },
        async move {
            let _ = rx.await;
        },
    ));
    let addr = addr_rx.await.unwrap();
    let health = tokio::task::spawn_blocking(move || {
        use std::io::{Read, Write};
        let mut s = std::net::TcpStream::connect(addr).unwrap();
        write!(
            s,
            "GET /api/health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n"
        )
        .unwrap();
        let mut out = String::new();
        s.read_to_string(&mut out).unwrap();
        out
    })
    .await
    .unwrap();
    assert!(health.starts_with("HTTP/1.1 200"));
    assert!(health.contains("\"status\":\"ok\""));
    tx.send(()).unwrap();
    server.await.unwrap().unwrap();
    assert!(svc.queue().is_empty());
    use gamebot_service::RecordStore;
    let stored = gamebot_service::FileStore::open(dir.path())
        .unwrap()
        .records()
        .unwrap();
    assert_eq!(stored.len(), 3);
}
