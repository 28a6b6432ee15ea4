//! Server side of imgraph: collections, graph files, background
//! improvement and the HTTP API used by the map client.

pub mod api;
pub mod collection;
pub mod config;
pub mod error;
pub mod improver;
pub mod persist;

use std::sync::Arc;
use std::time::Duration;

use imgraph_core::navigator::NavConfig;

pub use collection::{ingest, Collection};
pub use error::{Result, ServiceError};
pub use persist::{load_graph, save_graph};

use api::{ApiSettings, AppState};
use config::ServeConfig;
use improver::{GraphStore, ImproverConfig, ImproverHandle};

/// Loads the collection and serves it until Ctrl-C.
pub async fn serve(cfg: ServeConfig) -> Result<()> {
    let collection = load_graph(&cfg.graph, &cfg.meta)?.with_url_template(cfg.url_template.clone())?;
    let (_, graph, keywords, url_template) = collection.into_parts();
    log::info!(
        "loaded {} images in {} layers",
        graph.base().len(),
        graph.len()
    );
    let store = Arc::new(GraphStore::new(graph));
    let settings = ApiSettings {
        cols: cfg.cols,
        rows: cfg.rows,
        nav: NavConfig {
            working_layer: cfg.working_layer,
            seed: cfg.seed,
        },
        ..ApiSettings::default()
    };
    let state = AppState::new(keywords, url_template, store.clone(), settings)
        .map_err(|e| ServiceError::Config(e.to_string()))?;

    let improver = ImproverHandle::spawn(
        store.clone(),
        ImproverConfig {
            batch_size: cfg.batch_size,
            seed: cfg.seed,
            ..ImproverConfig::default()
        },
    );
    let evictor = api::spawn_evictor(state.clone(), Duration::from_secs(60));

    let listener = tokio::net::TcpListener::bind((cfg.bind.as_str(), cfg.port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, api::router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;

    evictor.abort();
    improver.stop();
    if cfg.batch_size > 0 {
        save_graph(&store.snapshot(), &cfg.graph)?;
        log::info!("saved improved graph to {}", cfg.graph.display());
    }
    Ok(())
}
