use super::layer::greedy_independent_set;
use super::{GraphError, GraphLayer, GraphNode};
use crate::seed::derive_seed;

/// Stacking stops once a layer holds at most this many nodes.
pub const MAX_TOP_LAYER: usize = 64;

/// Improve attempts per node when building an upper layer.
const UPPER_LAYER_BUDGET_PER_NODE: u64 = 20;

/// Layer 0 holds every image; each higher layer is a representative subset
/// of the one below with its own quartic graph.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchicalGraph {
    layers: Vec<GraphLayer>,
}

impl HierarchicalGraph {
    /// Wraps pre-built layers after checking every invariant.
    pub fn from_layers(layers: Vec<GraphLayer>) -> Result<Self, GraphError> {
        let g = Self { layers };
        g.check_invariants()?;
        Ok(g)
    }

    pub fn single(base: GraphLayer) -> Self {
        Self { layers: vec![base] }
    }

    pub fn layers(&self) -> &[GraphLayer] {
        &self.layers
    }

    pub fn layer(&self, level: usize) -> Option<&GraphLayer> {
        self.layers.get(level)
    }

    pub fn base(&self) -> &GraphLayer {
        &self.layers[0]
    }

    pub fn top_level(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn total_nodes(&self) -> usize {
        self.layers.iter().map(GraphLayer::len).sum()
    }

    /// Runs swap attempts on one layer. Node sets are untouched, so the
    /// subset relation between layers is preserved.
    pub fn improve_layer(&mut self, level: usize, budget: u64, seed: u64) -> Option<super::ImproveStats> {
        self.layers.get_mut(level).map(|l| l.improve(budget, seed))
    }

    pub fn check_invariants(&self) -> Result<(), GraphError> {
        if self.layers.is_empty() {
            return Err(GraphError::Corrupt("hierarchy has no layers".into()));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.level() != k {
                return Err(GraphError::Corrupt(format!(
                    "layer at position {k} reports level {}",
                    layer.level()
                )));
            }
            layer.check_invariants()?;
        }
        for pair in self.layers.windows(2) {
            let (lower, upper) = (&pair[0], &pair[1]);
            if upper.len() >= lower.len() {
                return Err(GraphError::Corrupt(format!(
                    "layer {} does not shrink ({} >= {})",
                    upper.level(),
                    upper.len(),
                    lower.len()
                )));
            }
            for &id in upper.ids() {
                let below = lower.node(id).ok_or_else(|| {
                    GraphError::Corrupt(format!(
                        "id {id} in layer {} is missing from layer {}",
                        upper.level(),
                        lower.level()
                    ))
                })?;
                if upper.semantic_of(id) != Some(&below.semantic)
                    || upper.visual_of(id) != Some(&below.visual)
                {
                    return Err(GraphError::Corrupt(format!(
                        "id {id} has different features in layer {}",
                        upper.level()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Stacks representative layers on `base` until one has at most
/// [`MAX_TOP_LAYER`] nodes.
///
/// Each new layer's node set is a greedy maximal independent set of the layer
/// below (no two representatives adjacent), wired with a fresh random quartic
/// graph and improved with 20 attempts per node.
pub fn build_hierarchy(base: GraphLayer, seed: u64) -> Result<HierarchicalGraph, GraphError> {
    if base.is_empty() {
        return Err(GraphError::Corrupt("empty base layer".into()));
    }
    let mut layers = vec![base];
    loop {
        let lower = layers.last().expect("non-empty");
        if lower.len() <= MAX_TOP_LAYER {
            break;
        }
        let level = lower.level() + 1;
        let mut chosen = greedy_independent_set(lower, derive_seed(seed, 3 * level as u64));
        if chosen.len() >= lower.len() {
            break;
        }
        chosen.sort_unstable();
        let nodes: Vec<GraphNode> = chosen
            .iter()
            .map(|&id| lower.node(id).expect("chosen from layer"))
            .collect();
        let mut upper =
            GraphLayer::build_random(&nodes, level, derive_seed(seed, 3 * level as u64 + 1))?;
        upper.improve(
            UPPER_LAYER_BUDGET_PER_NODE * upper.len() as u64,
            derive_seed(seed, 3 * level as u64 + 2),
        );
        layers.push(upper);
    }
    Ok(HierarchicalGraph { layers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature::generate_synthetic;
    use crate::graph::build_random_graph;

    #[test]
    fn small_base_is_a_single_layer() {
        let recs = generate_synthetic(2, 32, false, 1).unwrap();
        let h = build_hierarchy(build_random_graph(&recs, 1).unwrap(), 1).unwrap();
        assert_eq!(h.len(), 1);
        let k5 = build_random_graph(&recs[..5], 1).unwrap();
        assert_eq!(build_hierarchy(k5, 1).unwrap().len(), 1);
    }

    #[test]
    fn layers_shrink_and_nest() {
        let recs = generate_synthetic(8, 250, false, 5).unwrap();
        let mut base = build_random_graph(&recs, 5).unwrap();
        base.improve(20_000, 5);
        let h = build_hierarchy(base, 5).unwrap();
        assert!(h.len() >= 3);
        h.check_invariants().unwrap();
        assert!(h.layer(h.top_level()).unwrap().len() <= MAX_TOP_LAYER);
        // every node left out of an upper layer has a representative neighbor
        for pair in h.layers().windows(2) {
            for &id in pair[0].ids() {
                if !pair[1].contains(id) {
                    assert!(pair[0].neighbors(id).unwrap().any(|n| pair[1].contains(n)));
                }
            }
        }
    }

    #[test]
    fn corrupt_hierarchy_is_rejected() {
        let recs = generate_synthetic(1, 100, false, 2).unwrap();
        let a = build_random_graph(&recs[..80], 2).unwrap();
        let b = GraphLayer::build_random(&recs[70..], 1, 2).unwrap();
        assert!(HierarchicalGraph::from_layers(vec![a, b]).is_err());
    }
}
