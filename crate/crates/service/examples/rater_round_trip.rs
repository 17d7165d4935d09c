//! One rater's path through the HTTP API, driven in-process: register two
//! agents, pass calibration, take a lease, judge it, read the leaderboard.
//!
//!     cargo run -p arena-service --example rater_round_trip

use std::sync::Arc;

use arena_core::simlab::League;
use arena_service::{router, AppState, EngineConfig, SystemClock};
use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> anyhow::Result<Value> {
    let mut req = Request::builder().method(method.clone()).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body)?).await?;
    let status = resp.status();
    let bytes = resp.into_body().collect().await?.to_bytes();
    println!("{method} {uri} -> {status}");
    Ok(if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes)? })
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let config = EngineConfig {
        tasks: League::synthetic(1, 0, 2, 0).tasks,
        ..EngineConfig::default()
    };
    let app = router(AppState::from_config(&config, Arc::new(SystemClock))?);

    for team in ["team-a", "team-b"] {
        let reg = json!({
            "agentId": format!("{team}-cave-finder"),
            "participantId": team,
            "submissionId": format!("{team}-sub-1"),
            "taskId": "task-0",
            "videos": { "seed-0": format!("https://videos.example/{team}/0.mp4"),
                        "seed-1": format!("https://videos.example/{team}/1.mp4") },
        });
        call(&app, Method::POST, "/agents", Some(reg)).await?;
    }

    let next = "/matches/next?raterId=contractor-7&taskId=task-0&raterClass=contractor";
    let gate = call(&app, Method::GET, next, None).await?;
    println!("  {gate}");
    let calibration = json!({ "acknowledgedDescription": true, "reviewedExamples": ["cal-0", "cal-1", "cal-2"] });
    call(&app, Method::POST, "/raters/contractor-7/calibration/task-0", Some(calibration)).await?;

    // The lease shows only anonymous left/right videos.
    let lease = call(&app, Method::GET, next, None).await?;
    println!("  left {} | right {}", lease["left"]["video"], lease["right"]["video"]);

    let judgment = json!({
        "matchId": lease["matchId"],
        "raterId": "contractor-7",
        "raterClass": "contractor",
        "choice": "left",
        "questionnaire": { "notes": "left one actually went inside the cave" },
        "idempotencyKey": format!("{}-submit", lease["matchId"].as_str().unwrap_or_default()),
    });
    let ack = call(&app, Method::POST, "/judgments", Some(judgment.clone())).await?;
    println!("  {}", ack["ack"]);
    let again = call(&app, Method::POST, "/judgments", Some(judgment)).await?;
    println!("  resubmitted, duplicate = {}", again["ack"]["duplicate"]);

    let board = call(&app, Method::GET, "/leaderboard/task-0/official", None).await?;
    for e in board["entries"].as_array().into_iter().flatten() {
        println!("  #{} {} score {:.3}", e["rank"], e["agentId"].as_str().unwrap_or_default(), e["score"].as_f64().unwrap_or_default());
    }
    Ok(())
}
