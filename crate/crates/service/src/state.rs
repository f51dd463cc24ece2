use std::sync::{Arc, RwLock};

use gastimate::{ChainView, FeatureIndex, LinearModel, DEFAULT_LOOKBACK};
use serde::Serialize;

/// Immutable view served to readers. Writers build a new one and swap it in.
#[derive(Debug, Default)]
pub struct Snapshot {
    pub chain: Option<Arc<ChainData>>,
    pub model: Option<LinearModel>,
    /// Unix seconds at which the model was installed.
    pub trained_at: Option<i64>,
}

#[derive(Debug)]
pub struct ChainData {
    pub view: ChainView,
    pub index: FeatureIndex,
}

impl ChainData {
    pub fn new(view: ChainView) -> Self {
        let index = FeatureIndex::new(&view);
        Self { view, index }
    }
}

#[derive(Debug, Serialize)]
pub struct Metadata {
    pub head: Option<u64>,
    pub blocks: usize,
    pub transactions: usize,
    pub trained_at: Option<i64>,
}

impl Snapshot {
    pub fn head(&self) -> Option<u64> {
        self.chain.as_ref().and_then(|c| c.view.head()).map(|b| b.number)
    }

    pub fn lookback(&self) -> u64 {
        self.model.as_ref().map_or(DEFAULT_LOOKBACK, |m| if m.lookback > 0 { m.lookback } else { DEFAULT_LOOKBACK })
    }

    pub fn metadata(&self) -> Metadata {
        Metadata {
            head: self.head(),
            blocks: self.chain.as_ref().map_or(0, |c| c.view.blocks().len()),
            transactions: self.chain.as_ref().map_or(0, |c| c.view.transaction_count()),
            trained_at: self.trained_at,
        }
    }
}

#[derive(Debug, Default)]
pub struct AppState {
    current: RwLock<Arc<Snapshot>>,
    /// Serializes writers so concurrent updates do not drop each other.
    writer: tokio::sync::Mutex<()>,
}

pub type SharedState = Arc<AppState>;

impl AppState {
    pub fn new(snapshot: Snapshot) -> SharedState {
        Arc::new(Self { current: RwLock::new(Arc::new(snapshot)), writer: Default::default() })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn publish(&self, snapshot: Snapshot) {
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(snapshot);
    }

    pub async fn lock_writer(&self) -> tokio::sync::MutexGuard<'_, ()> {
        self.writer.lock().await
    }
}
