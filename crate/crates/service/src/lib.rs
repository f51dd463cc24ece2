//! HTTP service exposing gastimate lookup tables and price recommendations.
//!
//! | Route | Purpose |
//! |---|---|
//! | `GET /health` | liveness and current head block |
//! | `GET /v1/lookup?min&max&step` | lookup table at the current head |
//! | `GET /v1/recommend?deadline_minutes&kth` | kth cheapest price meeting the deadline |
//! | `POST /v1/chain` | replace the chain with block lines |
//! | `POST /v1/train` | fit a model on the current chain |
//! | `GET`/`POST /v1/model` | read or install the model |
//!
//! Errors are JSON objects with `code` and `message`.

mod api;
mod state;

use std::net::SocketAddr;

pub use api::{router, ApiError, PriceRange, Recommendation, TrainRequest, MAX_LOOKUP_ROWS};
pub use state::{AppState, ChainData, Metadata, SharedState, Snapshot};

pub const DEFAULT_PORT: u16 = 8645;

/// Serves until interrupted.
pub async fn serve(addr: SocketAddr, state: SharedState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
