//! Background graph improvement with snapshot publishing.
//!
//! One writer owns a private copy of the graph, improves it in batches and
//! publishes an immutable `Arc` snapshot after each batch that changed
//! something. Readers grab the current snapshot and keep it for the whole
//! request.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;
use std::time::Duration;

use imgraph_core::graph::ImproveStats;
use imgraph_core::seed::derive_seed;
use imgraph_core::HierarchicalGraph;

pub const DEFAULT_BATCH_SIZE: u64 = 10_000;
/// Upper layers are refreshed every this many batches.
pub const DEFAULT_REFRESH_EVERY: u64 = 100;

#[derive(Debug)]
pub struct GraphStore {
    current: RwLock<Arc<HierarchicalGraph>>,
}

impl GraphStore {
    pub fn new(graph: HierarchicalGraph) -> Self {
        Self {
            current: RwLock::new(Arc::new(graph)),
        }
    }

    pub fn snapshot(&self) -> Arc<HierarchicalGraph> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn publish(&self, graph: Arc<HierarchicalGraph>) {
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = graph;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImproverConfig {
    pub batch_size: u64,
    pub refresh_every: u64,
    pub seed: u64,
}

impl Default for ImproverConfig {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            refresh_every: DEFAULT_REFRESH_EVERY,
            seed: 0,
        }
    }
}

pub struct Improver {
    store: Arc<GraphStore>,
    working: HierarchicalGraph,
    config: ImproverConfig,
    batches: u64,
}

impl Improver {
    pub fn new(store: Arc<GraphStore>, config: ImproverConfig) -> Self {
        let working = (*store.snapshot()).clone();
        Self {
            store,
            working,
            config,
            batches: 0,
        }
    }

    pub fn batches(&self) -> u64 {
        self.batches
    }

    /// One batch on layer 0, plus an upper-layer refresh every
    /// `refresh_every` batches. Layers are improved in place, so layer
    /// membership (and therefore every session's cached ids) stays valid.
    pub fn step(&mut self) -> ImproveStats {
        let cfg = self.config;
        let mut stats = self
            .working
            .improve_layer(0, cfg.batch_size, derive_seed(cfg.seed, 2 * self.batches))
            .unwrap_or_default();
        self.batches += 1;
        if cfg.refresh_every > 0 && self.batches.is_multiple_of(cfg.refresh_every) {
            let base = self.working.base().len().max(1) as u64;
            let total = cfg.batch_size.saturating_mul(cfg.refresh_every);
            for level in 1..self.working.len() {
                let size = self.working.layer(level).map_or(0, |l| l.len()) as u64;
                let budget = (total / base).saturating_mul(size);
                let seed = derive_seed(cfg.seed, (2 * self.batches + 1) ^ ((level as u64) << 32));
                if let Some(s) = self.working.improve_layer(level, budget, seed) {
                    stats.attempts += s.attempts;
                    stats.accepted += s.accepted;
                }
            }
        }
        if stats.accepted > 0 {
            self.store.publish(Arc::new(self.working.clone()));
        }
        stats
    }

    pub fn run(mut self, stop: &AtomicBool) {
        while !stop.load(Ordering::Relaxed) {
            let stats = self.step();
            if self.batches.is_multiple_of(100) {
                log::debug!("improver: {} batches, last accepted {}", self.batches, stats.accepted);
            }
            if self.config.batch_size == 0 {
                std::thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

/// Improvement loop running on its own thread until stopped.
pub struct ImproverHandle {
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ImproverHandle {
    pub fn spawn(store: Arc<GraphStore>, config: ImproverConfig) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let improver = Improver::new(store, config);
        let thread = std::thread::Builder::new()
            .name("improver".into())
            .spawn(move || improver.run(&flag))
            .expect("spawn improver thread");
        Self {
            stop,
            thread: Some(thread),
        }
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ImproverHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use imgraph_core::{build_hierarchy, build_random_graph, generate_synthetic};

    fn store(n: usize) -> Arc<GraphStore> {
        let recs = generate_synthetic(4, n / 4, false, 1).unwrap();
        Arc::new(GraphStore::new(build_hierarchy(build_random_graph(&recs, 1).unwrap(), 1).unwrap()))
    }

    #[test]
    fn zero_batches_publish_nothing() {
        let s = store(200);
        let before = s.snapshot();
        let mut imp = Improver::new(
            s.clone(),
            ImproverConfig {
                batch_size: 0,
                refresh_every: 1,
                seed: 0,
            },
        );
        for _ in 0..5 {
            imp.step();
        }
        assert!(Arc::ptr_eq(&before, &s.snapshot()));
    }

    #[test]
    fn steps_raise_quality_and_refresh_upper_layers() {
        let s = store(400);
        let before = s.snapshot();
        let mut imp = Improver::new(
            s.clone(),
            ImproverConfig {
                batch_size: 500,
                refresh_every: 2,
                seed: 3,
            },
        );
        for _ in 0..4 {
            imp.step();
        }
        let after = s.snapshot();
        after.check_invariants().unwrap();
        assert!(after.base().quality().unwrap().quality > before.base().quality().unwrap().quality);
        assert!(after.layer(1).unwrap().quality().unwrap().quality >= before.layer(1).unwrap().quality().unwrap().quality);
        assert_ne!(after.layer(1), before.layer(1));
        for level in 0..after.len() {
            assert_eq!(after.layer(level).unwrap().sorted_ids(), before.layer(level).unwrap().sorted_ids());
        }
    }

    #[test]
    fn handle_stops() {
        let s = store(100);
        let h = ImproverHandle::spawn(s.clone(), ImproverConfig { batch_size: 100, ..Default::default() });
        std::thread::sleep(Duration::from_millis(50));
        h.stop();
        s.snapshot().check_invariants().unwrap();
    }
}
