//! Game service: live sessions against agents, an Elo leaderboard for human players, and
//! batched, crash-safe persistence of finished games.

pub mod api;
pub mod elo;
pub mod queue;
pub mod service;
pub mod session;
pub mod store;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

pub use api::router;
pub use elo::{rating_delta, Leaderboard, LeaderboardEntry, RatingDelta};
pub use queue::SyncQueue;
pub use service::{CreateSession, RecordOutcome, Service, ServiceConfig, ServiceError};
pub use session::{SessionStatus, View};
pub use store::{FileStore, RecordStore, StoreError};

/// Serves the API on `addr` until `shutdown` resolves, then drains the record queue.
pub async fn serve(
    service: Arc<Service>,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let worker = service.spawn_worker();
    let result = axum::serve(listener, router(service.clone()))
        .with_graceful_shutdown(shutdown)
        .await;
    worker.shutdown().await;
    result
}

/// Binds `addr`, reporting the bound address through `on_bound` before serving.
pub async fn bind_and_serve(
    service: Arc<Service>,
    addr: SocketAddr,
    on_bound: impl FnOnce(SocketAddr),
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    serve(service, listener, shutdown).await
}
