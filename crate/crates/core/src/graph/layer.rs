use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{GraphError, GraphNode, QualityReport, DEGREE};
use crate::feature::{
    sq_dist, FeatureLookup, HasFeatures, SemanticFeature, VisualFeature,
    NULL_ID, SEMANTIC_DIMS,
};
use crate::seed::{derive_seed, rng};

/// Dense-index sentinel for an empty slot.
const NONE: u32 = u32::MAX;

/// Improve attempts spent around the repaired region after a fallback removal.
const LOCAL_REPAIR_ATTEMPTS: u64 = 100;

/// Restarts of the configuration model before giving up.
const MAX_PAIRING_RESTARTS: usize = 10_000;

/// One level of the similarity graph.
///
/// Nodes live in dense arrays; `adj` stores dense indices, and the external
/// image id of each slot is looked up through `ids`. Slot order is part of
/// the observable state (it is persisted), so every mutation edits slots in
/// place rather than re-sorting them.
#[derive(Clone, Debug)]
pub struct GraphLayer {
    level: usize,
    ids: Vec<u32>,
    semantic: Vec<SemanticFeature>,
    visual: Vec<VisualFeature>,
    adj: Vec<[u32; DEGREE]>,
    index: HashMap<u32, u32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ImproveStats {
    pub attempts: u64,
    pub accepted: u64,
}

impl PartialEq for GraphLayer {
    /// Structural equality: same level and the same id → node mapping,
    /// including neighbor slot order. Internal dense order is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.level == other.level
            && self.len() == other.len()
            && self.ids.iter().all(|&id| self.node(id) == other.node(id))
    }
}

impl GraphLayer {
    pub fn new(level: usize) -> Self {
        Self {
            level,
            ids: Vec::new(),
            semantic: Vec::new(),
            visual: Vec::new(),
            adj: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: u32) -> bool {
        self.index.contains_key(&id)
    }

    /// Image ids in internal order.
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn sorted_ids(&self) -> Vec<u32> {
        let mut ids = self.ids.clone();
        ids.sort_unstable();
        ids
    }

    pub fn node(&self, id: u32) -> Option<GraphNode> {
        let i = self.idx(id)?;
        Some(self.node_at(i))
    }

    /// Nodes in ascending image id order.
    pub fn nodes_sorted(&self) -> impl Iterator<Item = GraphNode> + '_ {
        self.sorted_ids()
            .into_iter()
            .map(move |id| self.node(id).expect("id from layer"))
    }

    pub fn neighbors(&self, id: u32) -> Option<impl Iterator<Item = u32> + '_> {
        let i = self.idx(id)?;
        Some(
            self.adj[i as usize]
                .iter()
                .filter(|&&n| n != NONE)
                .map(move |&n| self.ids[n as usize]),
        )
    }

    pub fn semantic_of(&self, id: u32) -> Option<&SemanticFeature> {
        self.idx(id).map(|i| &self.semantic[i as usize])
    }

    pub fn visual_of(&self, id: u32) -> Option<&VisualFeature> {
        self.idx(id).map(|i| &self.visual[i as usize])
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        match (self.idx(a), self.idx(b)) {
            (Some(i), Some(j)) => self.adjacent(i, j),
            _ => false,
        }
    }

    /// Undirected edges as `(smaller id, larger id)`, sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.len() * DEGREE / 2);
        for (u, slots) in self.adj.iter().enumerate() {
            for &v in slots {
                if v != NONE && (u as u32) < v {
                    let (a, b) = (self.ids[u], self.ids[v as usize]);
                    out.push((a.min(b), a.max(b)));
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj
            .iter()
            .map(|s| s.iter().filter(|&&n| n != NONE).count())
            .sum::<usize>()
            / 2
    }

    /// Builds a layer from decoded nodes and validates every invariant.
    pub fn from_nodes(level: usize, nodes: Vec<GraphNode>) -> Result<Self, GraphError> {
        let mut layer = GraphLayer::new(level);
        for n in &nodes {
            layer.push_node(n.image_id, n.semantic, n.visual)?;
        }
        for (i, n) in nodes.iter().enumerate() {
            for (slot, &nb) in n.neighbors.iter().enumerate() {
                layer.adj[i][slot] = if nb == NULL_ID {
                    NONE
                } else {
                    layer.idx(nb).ok_or_else(|| {
                        GraphError::Corrupt(format!(
                            "node {} references unknown neighbor {nb}",
                            n.image_id
                        ))
                    })?
                };
            }
        }
        layer.check_invariants()?;
        Ok(layer)
    }

    /// Verifies regularity, symmetry and the absence of self-loops and
    /// multi-edges.
    pub fn check_invariants(&self) -> Result<(), GraphError> {
        let n = self.len();
        let want = if n > DEGREE { DEGREE } else { n.saturating_sub(1) };
        for (u, slots) in self.adj.iter().enumerate() {
            let id = self.ids[u];
            let mut seen = [NONE; DEGREE];
            let mut deg = 0;
            for &v in slots {
                if v == NONE {
                    continue;
                }
                if v as usize >= n {
                    return Err(GraphError::Corrupt(format!("node {id} has a dangling slot")));
                }
                if v as usize == u {
                    return Err(GraphError::Corrupt(format!("node {id} has a self-loop")));
                }
                if seen[..deg].contains(&v) {
                    return Err(GraphError::Corrupt(format!(
                        "node {id} has a multi-edge to {}",
                        self.ids[v as usize]
                    )));
                }
                if !self.adj[v as usize].contains(&(u as u32)) {
                    return Err(GraphError::Corrupt(format!(
                        "edge {id} -> {} is not symmetric",
                        self.ids[v as usize]
                    )));
                }
                seen[deg] = v;
                deg += 1;
            }
            if deg != want {
                return Err(GraphError::Corrupt(format!(
                    "node {id} has degree {deg}, expected {want}"
                )));
            }
        }
        Ok(())
    }

    pub fn quality(&self) -> Result<QualityReport, GraphError> {
        let mut total: u64 = 0;
        let mut edges = 0usize;
        for (u, slots) in self.adj.iter().enumerate() {
            for &v in slots {
                if v != NONE && (u as u32) < v {
                    total += u64::from(self.dist(u as u32, v));
                    edges += 1;
                }
            }
        }
        if edges == 0 {
            return Err(GraphError::NoEdges);
        }
        // Mean of per-edge scores, computed from the exact integer total.
        let mean = 1.0 - total as f64 / (65_025.0 * SEMANTIC_DIMS as f64 * edges as f64);
        Ok(QualityReport {
            edge_count: edges,
            quality: crate::feature::Score::new(mean),
        })
    }

    /// Random quartic graph over `items` (complete graph when fewer than six).
    pub fn build_random<T: HasFeatures>(
        items: &[T],
        level: usize,
        seed: u64,
    ) -> Result<Self, GraphError> {
        let mut layer = GraphLayer::new(level);
        for it in items {
            layer.push_node(it.image_id(), *it.semantic(), *it.visual())?;
        }
        let n = layer.len();
        if n <= DEGREE + 1 {
            for u in 0..n as u32 {
                for v in (u + 1)..n as u32 {
                    layer.link(u, v);
                }
            }
            return Ok(layer);
        }
        let mut rng = rng(seed);
        for _ in 0..MAX_PAIRING_RESTARTS {
            if let Some(adj) = random_pairing(n, &mut rng) {
                layer.adj = adj;
                debug_assert!(layer.check_invariants().is_ok());
                return Ok(layer);
            }
        }
        Err(GraphError::Corrupt(format!(
            "no simple 4-regular pairing found for {n} nodes"
        )))
    }

    /// Runs exactly `budget` random two-edge swap attempts, accepting only
    /// strictly improving legal rewirings. Quality never decreases.
    pub fn improve(&mut self, budget: u64, seed: u64) -> ImproveStats {
        let mut rng = rng(seed);
        let mut stats = ImproveStats::default();
        let n = self.len();
        if n <= DEGREE + 1 {
            stats.attempts = budget;
            return stats;
        }
        for _ in 0..budget {
            stats.attempts += 1;
            let u = rng.random_range(0..n) as u32;
            let v = self.adj[u as usize][rng.random_range(0..DEGREE)];
            if v != NONE && self.try_random_swap(u, v, &mut rng) {
                stats.accepted += 1;
            }
        }
        stats
    }

    /// Inserts a node, freeing two half-edge pairs by deleting the two
    /// disjoint edges whose endpoints are most similar to the newcomer.
    pub fn add_node<T: HasFeatures>(&mut self, item: &T) -> Result<(), GraphError> {
        let n_before = self.len();
        let w = self.push_node(item.image_id(), *item.semantic(), *item.visual())?;
        if n_before <= DEGREE {
            for u in 0..w {
                self.link(u, w);
            }
            return Ok(());
        }

        let affinity: Vec<u32> = (0..n_before as u32).map(|v| self.dist(w, v)).collect();
        let (a1, b1) = self
            .best_edge_for(&affinity, &[])
            .expect("4-regular layer has edges");
        self.unlink(a1, b1);
        let (a2, b2) = self
            .best_edge_for(&affinity, &[a1, b1])
            .expect("4-regular layer with >= 5 nodes has an edge disjoint from any edge");
        self.unlink(a2, b2);
        for x in [a1, b1, a2, b2] {
            self.link(w, x);
        }
        Ok(())
    }

    /// Deletes a node and re-pairs its four former neighbors.
    ///
    /// The best legal pairing (no existing edge) by similarity wins. When all
    /// three pairings are blocked, each blocked pair is connected through a
    /// random legal rewiring with another edge, followed by a short burst of
    /// local improvement. The random choices are seeded from the removed id.
    pub fn remove_node(&mut self, id: u32) -> Result<(), GraphError> {
        let w = self.idx(id).ok_or(GraphError::NotFound(id))?;
        let n_before = self.len();
        let mut freed: Vec<u32> = self.adj[w as usize]
            .iter()
            .copied()
            .filter(|&v| v != NONE)
            .collect();

        if n_before <= DEGREE + 1 {
            for &v in &freed {
                self.unlink(w, v);
            }
            self.swap_remove(w);
            return Ok(());
        }
        debug_assert_eq!(freed.len(), DEGREE);

        let [a, b, c, d] = [freed[0], freed[1], freed[2], freed[3]];
        let pairings = [[(a, b), (c, d)], [(a, c), (b, d)], [(a, d), (b, c)]];
        let best_legal = pairings
            .iter()
            .filter(|p| p.iter().all(|&(x, y)| !self.adjacent(x, y)))
            .min_by_key(|p| p.iter().map(|&(x, y)| self.dist(x, y)).sum::<u32>())
            .copied();

        if let Some(pairing) = best_legal {
            for &v in &freed {
                self.unlink(w, v);
            }
            for (x, y) in pairing {
                self.link(x, y);
            }
            self.swap_remove(w);
            return Ok(());
        }

        let mut work = self.clone();
        for &v in &freed {
            work.unlink(w, v);
        }
        let moved_from = work.swap_remove(w);
        for v in freed.iter_mut() {
            if Some(*v) == moved_from {
                *v = w;
            }
        }
        let [a, b, c, d] = [freed[0], freed[1], freed[2], freed[3]];
        let pairing = [[(a, b), (c, d)], [(a, c), (b, d)], [(a, d), (b, c)]]
            .into_iter()
            .min_by_key(|p| p.iter().map(|&(x, y)| work.dist(x, y)).sum::<u32>())
            .expect("three pairings");

        let mut rng = rng(derive_seed(u64::from(id), n_before as u64));
        for (p, q) in pairing {
            if !work.adjacent(p, q) {
                work.link(p, q);
            } else if !work.rewire_blocked_pair(p, q, &mut rng) {
                return Err(GraphError::RepairFailed(id));
            }
        }
        work.improve_around(&freed, LOCAL_REPAIR_ATTEMPTS, &mut rng);
        *self = work;
        Ok(())
    }

    /// Lazily enumerates ids in breadth-first order from `center`.
    pub fn expansion(&self, center: u32) -> Result<super::Expansion<'_>, GraphError> {
        let c = self.idx(center).ok_or(GraphError::NotFound(center))?;
        Ok(super::Expansion::new(self, c))
    }

    /// The first `count` ids of a breadth-first walk from `center`; each
    /// frontier is ordered by descending similarity to the center, ties by
    /// ascending id.
    pub fn expand_neighborhood(&self, center: u32, count: usize) -> Result<Vec<u32>, GraphError> {
        Ok(self.expansion(center)?.take(count).collect())
    }

    // ---- internal helpers, all on dense indices ----

    pub(super) fn idx(&self, id: u32) -> Option<u32> {
        self.index.get(&id).copied()
    }

    pub(super) fn id_at(&self, i: u32) -> u32 {
        self.ids[i as usize]
    }

    pub(super) fn slots(&self, i: u32) -> &[u32; DEGREE] {
        &self.adj[i as usize]
    }

    pub(super) fn dist(&self, u: u32, v: u32) -> u32 {
        sq_dist(
            self.semantic[u as usize].as_bytes(),
            self.semantic[v as usize].as_bytes(),
        )
    }

    pub(super) fn node_at(&self, i: u32) -> GraphNode {
        let mut neighbors = [NULL_ID; DEGREE];
        for (out, &v) in neighbors.iter_mut().zip(&self.adj[i as usize]) {
            if v != NONE {
                *out = self.ids[v as usize];
            }
        }
        GraphNode {
            image_id: self.ids[i as usize],
            neighbors,
            semantic: self.semantic[i as usize],
            visual: self.visual[i as usize],
        }
    }

    fn push_node(
        &mut self,
        id: u32,
        semantic: SemanticFeature,
        visual: VisualFeature,
    ) -> Result<u32, GraphError> {
        if id == NULL_ID {
            return Err(GraphError::ReservedId(id));
        }
        if self.index.contains_key(&id) {
            return Err(GraphError::DuplicateId(id));
        }
        let i = self.ids.len() as u32;
        self.ids.push(id);
        self.semantic.push(semantic);
        self.visual.push(visual);
        self.adj.push([NONE; DEGREE]);
        self.index.insert(id, i);
        Ok(i)
    }

    /// Removes an isolated node; returns the old index of the node moved
    /// into its place, if any.
    fn swap_remove(&mut self, i: u32) -> Option<u32> {
        debug_assert!(self.adj[i as usize].iter().all(|&v| v == NONE));
        let last = self.ids.len() as u32 - 1;
        self.index.remove(&self.ids[i as usize]);
        self.ids.swap_remove(i as usize);
        self.semantic.swap_remove(i as usize);
        self.visual.swap_remove(i as usize);
        self.adj.swap_remove(i as usize);
        if i == last {
            return None;
        }
        self.index.insert(self.ids[i as usize], i);
        for v in self.adj[i as usize] {
            if v != NONE {
                replace_slot(&mut self.adj[v as usize], last, i);
            }
        }
        Some(last)
    }

    fn adjacent(&self, u: u32, v: u32) -> bool {
        self.adj[u as usize].contains(&v)
    }

    fn link(&mut self, u: u32, v: u32) {
        replace_slot(&mut self.adj[u as usize], NONE, v);
        replace_slot(&mut self.adj[v as usize], NONE, u);
    }

    fn unlink(&mut self, u: u32, v: u32) {
        replace_slot(&mut self.adj[u as usize], v, NONE);
        replace_slot(&mut self.adj[v as usize], u, NONE);
    }

    /// Edge minimizing the summed distance of its endpoints to a newcomer,
    /// skipping edges that touch `exclude`. First in scan order wins ties.
    fn best_edge_for(&self, affinity: &[u32], exclude: &[u32]) -> Option<(u32, u32)> {
        let mut best: Option<(u32, (u32, u32))> = None;
        for u in 0..affinity.len() as u32 {
            if exclude.contains(&u) {
                continue;
            }
            for &v in &self.adj[u as usize] {
                if v == NONE || v < u || exclude.contains(&v) {
                    continue;
                }
                let cost = affinity[u as usize] + affinity[v as usize];
                if best.is_none_or(|(c, _)| cost < c) {
                    best = Some((cost, (u, v)));
                }
            }
        }
        best.map(|(_, e)| e)
    }

    /// Draws a second edge and tries both rewirings of `(u,v)` with it.
    fn try_random_swap<R: Rng>(&mut self, u: u32, v: u32, rng: &mut R) -> bool {
        let n = self.len();
        let x = rng.random_range(0..n) as u32;
        let y = self.adj[x as usize][rng.random_range(0..DEGREE)];
        if y == NONE || x == u || x == v || y == u || y == v {
            return false;
        }
        self.try_swap(u, v, x, y)
    }

    /// Replaces edges (u,v),(x,y) with the better of (u,x),(v,y) and
    /// (u,y),(v,x) if it is legal and strictly cheaper.
    fn try_swap(&mut self, u: u32, v: u32, x: u32, y: u32) -> bool {
        let current = self.dist(u, v) + self.dist(x, y);
        let mut best: Option<(u32, bool)> = None;
        if !self.adjacent(u, x) && !self.adjacent(v, y) {
            let c = self.dist(u, x) + self.dist(v, y);
            if c < current {
                best = Some((c, false));
            }
        }
        if !self.adjacent(u, y) && !self.adjacent(v, x) {
            let c = self.dist(u, y) + self.dist(v, x);
            if c < best.map_or(current, |(b, _)| b) {
                best = Some((c, true));
            }
        }
        let Some((_, crossed)) = best else {
            return false;
        };
        let (x, y) = if crossed { (y, x) } else { (x, y) };
        // (u,v),(x,y) -> (u,x),(v,y), editing slots in place.
        replace_slot(&mut self.adj[u as usize], v, x);
        replace_slot(&mut self.adj[v as usize], u, y);
        replace_slot(&mut self.adj[x as usize], y, u);
        replace_slot(&mut self.adj[y as usize], x, v);
        true
    }

    fn improve_around<R: Rng>(&mut self, around: &[u32], attempts: u64, rng: &mut R) {
        let around: Vec<u32> = around.iter().copied().filter(|&v| (v as usize) < self.len()).collect();
        if around.is_empty() || self.len() <= DEGREE + 1 {
            return;
        }
        for _ in 0..attempts {
            let u = around[rng.random_range(0..around.len())];
            let v = self.adj[u as usize][rng.random_range(0..DEGREE)];
            if v != NONE {
                self.try_random_swap(u, v, rng);
            }
        }
    }

    /// Connects adjacent nodes `p`, `q` (each one short of full degree) by
    /// splitting another edge (x,y) into (p,x),(q,y).
    fn rewire_blocked_pair<R: Rng>(&mut self, p: u32, q: u32, rng: &mut R) -> bool {
        let mut edges: Vec<(u32, u32)> = Vec::with_capacity(self.len() * 2);
        for (x, slots) in self.adj.iter().enumerate() {
            for &y in slots {
                if y != NONE && (x as u32) < y {
                    edges.push((x as u32, y));
                }
            }
        }
        edges.shuffle(rng);
        for (x0, y0) in edges {
            for (x, y) in [(x0, y0), (y0, x0)] {
                if x == p || x == q || y == p || y == q {
                    break;
                }
                if !self.adjacent(p, x) && !self.adjacent(q, y) {
                    self.unlink(x, y);
                    self.link(p, x);
                    self.link(q, y);
                    return true;
                }
            }
        }
        false
    }
}

/// Random 4-regular simple graph on `n >= 6` vertices: pairs 4n shuffled
/// half-edges, then repairs self-loops and multi-edges by random legal
/// rewirings with simple edges. Returns `None` when the repair stalls.
fn random_pairing<R: Rng>(n: usize, rng: &mut R) -> Option<Vec<[u32; DEGREE]>> {
    let mut stubs: Vec<u32> = (0..n as u32).flat_map(|i| [i; DEGREE]).collect();
    stubs.shuffle(rng);
    let mut edges: Vec<(u32, u32)> = stubs.chunks_exact(2).map(|p| (p[0], p[1])).collect();

    // Multiset adjacency; a self-loop appears twice in its node's slots.
    let mut adj = vec![[NONE; DEGREE]; n];
    for &(u, v) in &edges {
        replace_slot(&mut adj[u as usize], NONE, v);
        replace_slot(&mut adj[v as usize], NONE, u);
    }
    let mult = |adj: &[[u32; DEGREE]], u: u32, v: u32| {
        adj[u as usize].iter().filter(|&&w| w == v).count()
    };
    let is_bad = |adj: &[[u32; DEGREE]], (u, v): (u32, u32)| u == v || mult(adj, u, v) > 1;

    let bad: Vec<usize> = (0..edges.len()).filter(|&e| is_bad(&adj, edges[e])).collect();
    let m = edges.len();
    for e in bad {
        let mut tries = 0;
        while is_bad(&adj, edges[e]) {
            tries += 1;
            if tries > 64 * m {
                return None;
            }
            let f = rng.random_range(0..m);
            if f == e {
                continue;
            }
            let (u, v) = edges[e];
            let (mut x, mut y) = edges[f];
            if rng.random_bool(0.5) {
                std::mem::swap(&mut x, &mut y);
            }
            if x == y || x == u || x == v || y == u || y == v || mult(&adj, x, y) != 1 {
                continue;
            }
            if mult(&adj, u, x) != 0 || mult(&adj, v, y) != 0 {
                continue;
            }
            replace_slot(&mut adj[u as usize], v, x);
            replace_slot(&mut adj[v as usize], u, y);
            replace_slot(&mut adj[x as usize], y, u);
            replace_slot(&mut adj[y as usize], x, v);
            edges[e] = (u, x);
            edges[f] = (v, y);
        }
    }
    Some(adj)
}

fn replace_slot(slots: &mut [u32; DEGREE], old: u32, new: u32) {
    let pos = slots
        .iter()
        .position(|&s| s == old)
        .expect("slot to replace must exist");
    slots[pos] = new;
}

/// Random quartic graph at level 0.
pub fn build_random_graph<T: HasFeatures>(items: &[T], seed: u64) -> Result<GraphLayer, GraphError> {
    GraphLayer::build_random(items, 0, seed)
}

pub fn graph_quality(layer: &GraphLayer) -> Result<QualityReport, GraphError> {
    layer.quality()
}

impl FeatureLookup for GraphLayer {
    fn features(&self, id: u32) -> Option<(&SemanticFeature, &VisualFeature)> {
        let i = self.idx(id)? as usize;
        Some((&self.semantic[i], &self.visual[i]))
    }
}

/// Ids of a maximal independent set, chosen greedily in a seeded random order.
pub(super) fn greedy_independent_set(layer: &GraphLayer, seed: u64) -> Vec<u32> {
    let mut order: Vec<u32> = (0..layer.len() as u32).collect();
    order.shuffle(&mut rng(seed));
    let mut blocked = vec![false; layer.len()];
    let mut chosen = Vec::new();
    for u in order {
        if blocked[u as usize] {
            continue;
        }
        blocked[u as usize] = true;
        for &v in layer.slots(u) {
            if v != NONE {
                blocked[v as usize] = true;
            }
        }
        chosen.push(layer.id_at(u));
    }
    chosen
}
