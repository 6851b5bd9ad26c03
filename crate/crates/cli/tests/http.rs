use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use casa_cli::server::{router, AppState};
use casa_core::causality::CommandLog;
use casa_core::engine::Engine;
use casa_core::system::Assistant;
use casa_core::{parse_timestamp, DeviceDescriptor, Registry, SystemClock, VirtualClock, WallClock};

fn registry() -> Registry {
    Registry::from_devices(vec![
        DeviceDescriptor::toggleable("kitchen", "kitchen light"),
        DeviceDescriptor::sensor("motion", "motion sensor"),
    ])
    .unwrap()
}

fn app_with(clock: SystemClock) -> Router {
    router(AppState::new(Assistant::new(Engine::new(registry(), clock, CommandLog::new()))))
}

fn app() -> Router {
    app_with(SystemClock::Virtual(VirtualClock::new(
        parse_timestamp("2024-03-04 07:00").unwrap(),
    )))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_owned())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, "POST", uri, Some(&body.to_string())).await
}

#[tokio::test]
async fn chat_turns_on_the_kitchen_light() {
    let app = app();
    let (status, reply) = post(&app, "/v1/chat", json!({"session_id": "s1", "utterance": "turn on the kitchen light"})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(reply["session_id"], "s1");
    assert_eq!(reply["turn_seq"], 1);
    assert!(reply["text"].as_str().unwrap().contains("kitchen light"), "{reply}");
    assert_eq!(reply["end_of_exchange"], true);

    let (_, devices) = call(&app, "GET", "/v1/devices", None).await;
    let kitchen = devices.as_array().unwrap().iter().find(|d| d["id"] == "kitchen").unwrap();
    assert_eq!(kitchen["state"], json!({"onoff": true}), "{kitchen}");
}

#[tokio::test]
async fn turn_seq_counts_per_session() {
    let app = app();
    for _ in 0..2 {
        post(&app, "/v1/chat", json!({"session_id": "a", "utterance": "hello"})).await;
    }
    let (_, a) = post(&app, "/v1/chat", json!({"session_id": "a", "utterance": "hello"})).await;
    let (_, b) = post(&app, "/v1/chat", json!({"session_id": "b", "utterance": "hello"})).await;
    assert_eq!(a["turn_seq"], 3);
    assert_eq!(b["turn_seq"], 1);
}

#[tokio::test]
async fn empty_rules_list() {
    let (status, rules) = call(&app(), "GET", "/v1/rules", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rules, json!([]));
}

#[tokio::test]
async fn rules_and_log_after_scheduling() {
    let app = app();
    post(&app, "/v1/chat", json!({"utterance": "turn on the kitchen light every day at 8am"})).await;
    let (_, rules) = call(&app, "GET", "/v1/rules", None).await;
    assert_eq!(rules.as_array().unwrap().len(), 1);
    assert_eq!(rules[0]["device"], "kitchen");

    let (_, log) = call(&app, "GET", "/v1/log?since=0", None).await;
    let n = log.as_array().unwrap().len();
    assert!(n >= 1);
    let (_, later) = call(&app, "GET", &format!("/v1/log?since={n}"), None).await;
    assert_eq!(later, json!([]));
    let (status, err) = call(&app, "GET", "/v1/log?since=soon", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "bad_query");
}

#[tokio::test]
async fn malformed_body_has_a_code() {
    let app = app();
    let (status, err) = call(&app, "POST", "/v1/chat", Some("{not json")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "malformed_body");
    let (status, err) = post(&app, "/v1/chat", json!({"session_id": "x"})).await;
    assert!(status.is_client_error());
    assert_eq!(err["code"], "malformed_body");
}

#[tokio::test]
async fn clock_control_needs_a_virtual_clock() {
    let wall = app_with(SystemClock::Wall(WallClock::default()));
    let (status, err) = post(&wall, "/v1/sim/clock", json!({"advance_seconds": 60})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "clock_not_virtual");

    let (status, now) = post(&app(), "/v1/sim/clock", json!({"advance_seconds": 90})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(now["now"], "2024-03-04T07:01:30");
}

#[tokio::test]
async fn sensor_injection() {
    let app = app();
    post(&app, "/v1/chat", json!({"utterance": "turn on the kitchen light when the motion sensor is activated"})).await;
    let (status, _) = post(&app, "/v1/sim/device/motion/state", json!({"value": true})).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (_, devices) = call(&app, "GET", "/v1/devices", None).await;
    assert_eq!(devices[0]["state"], json!({"onoff": true}), "{devices}");

    let (status, err) = post(&app, "/v1/sim/device/garage/state", json!({"value": true})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "unknown_device");
    let (status, _) = post(&app, "/v1/sim/device/motion/state", json!({"value": 3})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

/// Reads SSE frames until one with `event: <kind>` arrives.
async fn next_event(body: &mut Body, kind: &str) -> Value {
    let mut buf = String::new();
    loop {
        let frame = body.frame().await.expect("stream ended").unwrap();
        if let Some(data) = frame.data_ref() {
            buf.push_str(std::str::from_utf8(data).unwrap());
        }
        while let Some(end) = buf.find("\n\n") {
            let record: String = buf.drain(..end + 2).collect();
            let mut event = None;
            let mut data = None;
            for line in record.lines() {
                if let Some(v) = line.strip_prefix("event: ") {
                    event = Some(v.to_owned());
                } else if let Some(v) = line.strip_prefix("data: ") {
                    data = Some(v.to_owned());
                }
            }
            if event.as_deref() == Some(kind) {
                return serde_json::from_str(&data.unwrap()).unwrap();
            }
        }
    }
}

async fn within<T>(f: impl std::future::Future<Output = T>) -> T {
    tokio::time::timeout(Duration::from_secs(5), f).await.expect("timed out waiting for a stream event")
}

#[tokio::test]
async fn stream_reports_scheduled_fire() {
    let app = app();
    let resp = app
        .clone()
        .oneshot(Request::get("/v1/stream").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let mut body = resp.into_body();

    let hello = within(next_event(&mut body, "clock")).await;
    assert_eq!(hello, json!({"type": "clock", "now": "2024-03-04T07:00:00", "virtual": true}));

    post(&app, "/v1/chat", json!({"utterance": "turn on the kitchen light in 5 minutes"})).await;
    let reply = within(next_event(&mut body, "reply")).await;
    assert!(reply["text"].as_str().unwrap().contains("5 minutes"), "{reply}");

    post(&app, "/v1/sim/clock", json!({"advance_seconds": 300})).await;
    let change = within(next_event(&mut body, "state_change")).await;
    assert_eq!(change["device"], "kitchen");
    assert_eq!(change["new"], json!({"onoff": true}));
    assert_eq!(change["at"], "2024-03-04T07:05:00");
}
