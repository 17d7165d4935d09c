//! Serve the API on a local port with an in-memory store and the tasks from
//! the example engine config.
//!
//!     cargo run -p arena-service --example serve_demo [bind-address]
//!     curl localhost:8080/tasks

use std::path::PathBuf;
use std::sync::Arc;

use arena_service::{serve, AppState, EngineConfig, SystemClock};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/engine.example.json");
    let mut config = EngineConfig::load(&path)?;
    config.store.dir = None;
    let bind = std::env::args().nth(1).unwrap_or(config.service.bind.clone());
    let state = AppState::from_config(&config, Arc::new(SystemClock))?;
    println!("serving {} task(s) on http://{bind}", config.tasks.len());
    serve(state, &bind).await?;
    Ok(())
}
