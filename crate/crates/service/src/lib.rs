//! Authoring backend: sessions, clip browsing, path smoothing, streamed
//! transition generation and export over HTTP and WebSocket.

pub mod api;
pub mod error;
pub mod generate;
pub mod path;
pub mod state;
pub mod store;
pub mod types;

use std::sync::Arc;

pub use api::router;
pub use error::ApiError;
pub use state::{AppState, Limits, ServiceConfig};
pub use store::Store;

/// Load the model, clips and store, then serve until the process is stopped.
pub async fn serve(cfg: ServiceConfig) -> std::io::Result<()> {
    let state = tokio::task::spawn_blocking({
        let cfg = cfg.clone();
        move || AppState::load(&cfg)
    })
    .await
    .map_err(std::io::Error::other)?
    .map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(cfg.listen).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state))).await
}
