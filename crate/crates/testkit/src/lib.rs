//! Reference implementations used only by tests.
//!
//! Everything here works on raw bytes and plain adjacency maps and does not
//! depend on the engine crates, so the checks stay independent of the code
//! paths they verify.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEMANTIC_DIMS: usize = 64;
pub const VISUAL_DIMS: usize = 50;

#[derive(Debug, Clone)]
pub struct RawRecord {
    pub id: u32,
    pub semantic: [u8; SEMANTIC_DIMS],
    pub visual: [u8; VISUAL_DIMS],
    pub label: usize,
}

/// `1 - mean squared difference` of bytes scaled to `[0, 1]`, in plain floats.
pub fn byte_similarity(a: &[u8], b: &[u8]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = f64::from(*x) / 255.0 - f64::from(*y) / 255.0;
        acc += d * d;
    }
    1.0 - acc / a.len() as f64
}

/// `w_s (1 - sim_semantic) + w_v (1 - sim_visual)` with the 0.7 / 0.3 weights.
pub fn combined_distance(a: &RawRecord, b: &RawRecord) -> f64 {
    0.7 * (1.0 - byte_similarity(&a.semantic, &b.semantic))
        + 0.3 * (1.0 - byte_similarity(&a.visual, &b.visual))
}

/// `clusters` groups of `per_cluster` records. Centers are uniform bytes and
/// members add uniform noise in `[-spread, spread]`. Ids start at 1.
pub fn clustered_fixture(clusters: usize, per_cluster: usize, spread: u8, seed: u64) -> Vec<RawRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut id = 1;
    for label in 0..clusters {
        let sc: Vec<u8> = (0..SEMANTIC_DIMS).map(|_| rng.random()).collect();
        let vc: Vec<u8> = (0..VISUAL_DIMS).map(|_| rng.random()).collect();
        for _ in 0..per_cluster {
            let mut semantic = [0u8; SEMANTIC_DIMS];
            let mut visual = [0u8; VISUAL_DIMS];
            for (o, &c) in semantic.iter_mut().zip(&sc) {
                *o = jitter(c, spread, &mut rng);
            }
            for (o, &c) in visual.iter_mut().zip(&vc) {
                *o = jitter(c, spread, &mut rng);
            }
            out.push(RawRecord {
                id,
                semantic,
                visual,
                label,
            });
            id += 1;
        }
    }
    out
}

fn jitter(c: u8, spread: u8, rng: &mut ChaCha8Rng) -> u8 {
    let s = i32::from(spread);
    (i32::from(c) + rng.random_range(-s..=s)).clamp(0, 255) as u8
}

/// Every labeled 4-regular simple graph on `n` vertices, as edge lists.
pub fn all_quartic_graphs(n: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(
        v: usize,
        n: usize,
        deg: &mut Vec<usize>,
        adj: &mut Vec<Vec<bool>>,
        edges: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if v == n {
            out.push(edges.clone());
            return;
        }
        let need = 4 - deg[v];
        let candidates: Vec<usize> = ((v + 1)..n).filter(|&w| deg[w] < 4).collect();
        choose(v, need, &candidates, 0, n, deg, adj, edges, out);
    }

    #[allow(clippy::too_many_arguments)]
    fn choose(
        v: usize,
        need: usize,
        cands: &[usize],
        start: usize,
        n: usize,
        deg: &mut Vec<usize>,
        adj: &mut Vec<Vec<bool>>,
        edges: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if need == 0 {
            rec(v + 1, n, deg, adj, edges, out);
            return;
        }
        for i in start..cands.len() {
            let w = cands[i];
            deg[v] += 1;
            deg[w] += 1;
            adj[v][w] = true;
            edges.push((v, w));
            choose(v, need - 1, cands, i + 1, n, deg, adj, edges, out);
            edges.pop();
            adj[v][w] = false;
            deg[v] -= 1;
            deg[w] -= 1;
        }
    }

    let mut out = Vec::new();
    rec(
        0,
        n,
        &mut vec![0; n],
        &mut vec![vec![false; n]; n],
        &mut Vec::new(),
        &mut out,
    );
    out
}

/// Highest achievable mean edge weight over all 4-regular graphs, given a
/// symmetric weight matrix.
pub fn optimal_quartic_quality(graphs: &[Vec<(usize, usize)>], weight: &[Vec<f64>]) -> f64 {
    graphs
        .iter()
        .map(|g| g.iter().map(|&(a, b)| weight[a][b]).sum::<f64>() / g.len() as f64)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Mean semantic similarity over an explicit edge list.
pub fn edge_sum_quality(edges: &[(u32, u32)], semantic: &HashMap<u32, Vec<u8>>) -> f64 {
    let total: f64 = edges
        .iter()
        .map(|(a, b)| byte_similarity(&semantic[a], &semantic[b]))
        .sum();
    total / edges.len() as f64
}

/// Breadth-first ordering by (hop distance, descending similarity to the
/// center, ascending id), computed by labeling every node with its hop
/// distance first and sorting once.
pub fn bfs_order(
    adj: &BTreeMap<u32, Vec<u32>>,
    semantic: &HashMap<u32, Vec<u8>>,
    center: u32,
    count: usize,
) -> Vec<u32> {
    let mut hops: BTreeMap<u32, usize> = BTreeMap::from([(center, 0)]);
    let mut queue = VecDeque::from([center]);
    while let Some(u) = queue.pop_front() {
        let h = hops[&u];
        for &v in &adj[&u] {
            if let std::collections::btree_map::Entry::Vacant(e) = hops.entry(v) {
                e.insert(h + 1);
                queue.push_back(v);
            }
        }
    }
    let mut all: Vec<(usize, f64, u32)> = hops
        .iter()
        .map(|(&id, &h)| {
            (
                h,
                byte_similarity(&semantic[&center], &semantic[&id]),
                id,
            )
        })
        .collect();
    all.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(b.1.partial_cmp(&a.1).unwrap())
            .then(a.2.cmp(&b.2))
    });
    all.into_iter().take(count).map(|(_, _, id)| id).collect()
}

/// Connected components of the subgraph induced by `members`, each sorted.
pub fn induced_components(adj: &BTreeMap<u32, Vec<u32>>, members: &BTreeSet<u32>) -> Vec<BTreeSet<u32>> {
    // union-find over the induced edges
    let ids: Vec<u32> = members.iter().copied().collect();
    let pos: HashMap<u32, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &u in &ids {
        for v in &adj[&u] {
            if let Some(&j) = pos.get(v) {
                let (a, b) = (find(&mut parent, pos[&u]), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<u32>> = BTreeMap::new();
    for (i, &id) in ids.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert(id);
    }
    groups.into_values().collect()
}

/// Every permutation of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, a, out);
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// Mean of `1 - d` over the 4-adjacent pairs of a full `rows × cols` grid
/// holding `order[i]` at cell `i` (row-major).
pub fn full_grid_quality(order: &[usize], rows: usize, cols: usize, records: &[RawRecord]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0;
    for r in 0..rows {
        for c in 0..cols {
            let a = &records[order[r * cols + c]];
            if c + 1 < cols {
                total += 1.0 - combined_distance(a, &records[order[r * cols + c + 1]]);
                pairs += 1;
            }
            if r + 1 < rows {
                total += 1.0 - combined_distance(a, &records[order[(r + 1) * cols + c]]);
                pairs += 1;
            }
        }
    }
    total / pairs as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_graph_count_on_eight_vertices() {
        // complements of the 19,355 labeled cubic graphs on 8 vertices
        assert_eq!(all_quartic_graphs(8).len(), 19_355);
        assert_eq!(all_quartic_graphs(5).len(), 1);
        assert_eq!(all_quartic_graphs(6).len(), 15);
    }

    #[test]
    fn heap_permutations() {
        let p = permutations(4);
        assert_eq!(p.len(), 24);
        let set: BTreeSet<Vec<usize>> = p.into_iter().collect();
        assert_eq!(set.len(), 24);
    }

    #[test]
    fn similarity_reference_points() {
        assert_eq!(byte_similarity(&[0; 64], &[255; 64]), 0.0);
        let mut half = [0u8; 64];
        half[..32].fill(255);
        assert_eq!(byte_similarity(&[0; 64], &half), 0.5);
    }
}
