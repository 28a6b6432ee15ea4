use std::collections::{HashSet, VecDeque};

use super::GraphLayer;

/// Breadth-first walk over a layer, yielding image ids.
///
/// The center comes first. Each subsequent frontier is sorted by descending
/// semantic similarity to the center, ties broken by ascending id, so the
/// sequence is fully deterministic.
pub struct Expansion<'a> {
    layer: &'a GraphLayer,
    center: u32,
    visited: HashSet<u32>,
    level: Vec<u32>,
    pending: VecDeque<u32>,
}

impl<'a> Expansion<'a> {
    pub(super) fn new(layer: &'a GraphLayer, center: u32) -> Self {
        Self {
            layer,
            center,
            visited: HashSet::from([center]),
            level: vec![center],
            pending: VecDeque::from([center]),
        }
    }

    fn advance_level(&mut self) {
        let mut next = Vec::new();
        for &u in &self.level {
            for &v in self.layer.slots(u) {
                if v != u32::MAX && self.visited.insert(v) {
                    next.push(v);
                }
            }
        }
        let layer = self.layer;
        let center = self.center;
        next.sort_by_key(|&v| (layer.dist(center, v), layer.id_at(v)));
        self.pending.extend(next.iter().copied());
        self.level = next;
    }
}

impl Iterator for Expansion<'_> {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        if self.pending.is_empty() {
            if self.level.is_empty() {
                return None;
            }
            self.advance_level();
        }
        self.pending.pop_front().map(|i| self.layer.id_at(i))
    }
}

#[cfg(test)]
mod tests {
    use crate::feature::{FeatureRecord, SemanticFeature, VisualFeature};
    use crate::graph::{build_random_graph, GraphError};

    fn line_records(n: u32) -> Vec<FeatureRecord> {
        (1..=n)
            .map(|id| {
                FeatureRecord::new(
                    id,
                    SemanticFeature::splat((id * 7 % 256) as u8),
                    VisualFeature::splat(0),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn count_one_is_the_center() {
        let layer = build_random_graph(&line_records(30), 2).unwrap();
        assert_eq!(layer.expand_neighborhood(17, 1).unwrap(), vec![17]);
    }

    #[test]
    fn exhaustion_returns_everything_center_first() {
        let layer = build_random_graph(&line_records(30), 2).unwrap();
        let out = layer.expand_neighborhood(5, 100).unwrap();
        assert_eq!(out.len(), 30);
        assert_eq!(out[0], 5);
        let mut sorted = out.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (1..=30).collect::<Vec<_>>());
    }

    #[test]
    fn first_frontier_is_the_neighbors_by_similarity() {
        let layer = build_random_graph(&line_records(30), 9).unwrap();
        let out = layer.expand_neighborhood(10, 5).unwrap();
        let center = layer.semantic_of(10).unwrap();
        let mut nbrs: Vec<u32> = layer.neighbors(10).unwrap().collect();
        nbrs.sort_by(|&a, &b| {
            let sa = center.similarity(layer.semantic_of(a).unwrap());
            let sb = center.similarity(layer.semantic_of(b).unwrap());
            sb.partial_cmp(&sa).unwrap().then(a.cmp(&b))
        });
        assert_eq!(&out[1..], &nbrs[..]);
    }

    #[test]
    fn unknown_center() {
        let layer = build_random_graph(&line_records(6), 9).unwrap();
        assert_eq!(
            layer.expand_neighborhood(99, 3).unwrap_err(),
            GraphError::NotFound(99)
        );
    }
}
