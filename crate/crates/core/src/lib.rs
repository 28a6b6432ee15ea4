//! Core engine for graph-based exploration of large image collections.
//!
//! - [`feature`]: quantized semantic / visual descriptors and similarity.
//! - [`graph`]: quartic similarity graphs, their improvement, dynamic
//!   updates and the layer hierarchy.
//! - [`sorter`]: arranging images on a dense grid so neighbors look alike.
//! - [`navigator`]: search, drag, zoom and recenter over the graph with a
//!   per-session position cache.

pub mod feature;
pub mod graph;
pub mod navigator;
pub mod seed;
pub mod sorter;

pub use feature::{
    combined_distance, generate_synthetic, similarity, CombinedWeights, FeatureError,
    FeatureLookup, FeatureRecord, HasFeatures, Score, SemanticFeature, VisualFeature, NULL_ID,
};
pub use graph::{
    build_hierarchy, build_random_graph, graph_quality, GraphError, GraphLayer, GraphNode,
    HierarchicalGraph, QualityReport,
};
