//! Quartic (4-regular) similarity graphs over image descriptors.
//!
//! A [`GraphLayer`] connects every image to exactly four others and is
//! improved by degree-preserving two-edge swaps that raise the mean semantic
//! similarity of connected images. Layers stack into a [`HierarchicalGraph`]
//! whose upper levels are spread-out representative subsets of the level
//! below, used for overview and zoom-out.
//!
//! Layers with fewer than five nodes cannot be 4-regular; they hold the
//! complete graph instead and pad unused neighbor slots with [`NULL_ID`].

mod expand;
mod hierarchy;
mod layer;

pub use expand::Expansion;
pub use hierarchy::{build_hierarchy, HierarchicalGraph, MAX_TOP_LAYER};
pub use layer::{build_random_graph, graph_quality, GraphLayer, ImproveStats};

use thiserror::Error;

use crate::feature::{HasFeatures, Score, SemanticFeature, VisualFeature, NULL_ID};

/// Target degree of every node in a layer of five or more nodes.
pub const DEGREE: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("image id {0} already present")]
    DuplicateId(u32),
    #[error("image id {0} not found")]
    NotFound(u32),
    #[error("image id {0:#x} is reserved")]
    ReservedId(u32),
    #[error("layer has no edges")]
    NoEdges,
    #[error("corrupt graph: {0}")]
    Corrupt(String),
    #[error("could not repair neighbor slots after removing {0}")]
    RepairFailed(u32),
}

/// One node as stored on disk: id, four neighbor ids and both descriptors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub image_id: u32,
    /// Neighbor image ids, [`NULL_ID`] in unused slots.
    pub neighbors: [u32; DEGREE],
    pub semantic: SemanticFeature,
    pub visual: VisualFeature,
}

impl GraphNode {
    pub fn degree(&self) -> usize {
        self.neighbors.iter().filter(|&&n| n != NULL_ID).count()
    }
}

impl HasFeatures for GraphNode {
    fn image_id(&self) -> u32 {
        self.image_id
    }
    fn semantic(&self) -> &SemanticFeature {
        &self.semantic
    }
    fn visual(&self) -> &VisualFeature {
        &self.visual
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub edge_count: usize,
    /// Mean semantic similarity over all undirected edges.
    pub quality: Score,
}
