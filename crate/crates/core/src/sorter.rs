//! Visual sorting of images onto a dense rectangular grid.
//!
//! The sorter mixes the two classic ingredients of grid-based image
//! arrangement. Like a self-organizing map it derives a smooth target field
//! by box-filtering the current arrangement over a shrinking neighborhood;
//! like a self-sorting map it splits the grid into blocks, groups blocks in
//! 2×2 quads, and for every quad of corresponding cells keeps the best of
//! all permutations against the targets. Block sizes halve from the largest
//! power of two below the grid size down to 1, and a final pass at block
//! size 1 evaluates permutations of each 2×2 cell quad directly on the
//! neighbor distances it affects.
//!
//! Distances are [`CombinedWeights`] distances. Each image is embedded as the
//! concatenation of its scaled semantic and visual bytes so that squared
//! Euclidean distance in the embedding equals the combined distance.
//!
//! Occupied cells of an input grid never move ("constrained" sorting): they
//! shape the targets and neighbor costs but are excluded from permutation.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::feature::{
    CombinedWeights, FeatureLookup, HasFeatures, Score, SemanticFeature, VisualFeature,
    SEMANTIC_DIMS, VISUAL_DIMS,
};
use crate::seed::rng;

const EMBED_DIMS: usize = SEMANTIC_DIMS + VISUAL_DIMS;

/// Upper bound on exact refinement rounds; each round is two sweeps.
const MAX_REFINE_ROUNDS: usize = 8;

const IMPROVE_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SortError {
    #[error("{items} items do not fit into {free} free cells")]
    CapacityExceeded { items: usize, free: usize },
    #[error("image id {0} is already placed")]
    DuplicateId(u32),
    #[error("no features for image id {0}")]
    MissingFeatures(u32),
    #[error("grid has no adjacent occupied cells")]
    Undefined,
    #[error("cell ({row}, {col}) is outside a {rows}x{cols} grid")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("cell ({0}, {1}) is empty and cannot be frozen")]
    FreezeEmpty(usize, usize),
}

/// Placement of image ids on a `rows × cols` grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridAssignment {
    rows: usize,
    cols: usize,
    cells: Vec<Option<u32>>,
    frozen: BTreeSet<(usize, usize)>,
}

impl GridAssignment {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![None; rows * cols],
            frozen: BTreeSet::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Option<u32> {
        if row < self.rows && col < self.cols {
            self.cells[row * self.cols + col]
        } else {
            None
        }
    }

    /// Puts `id` into an empty cell.
    pub fn place(&mut self, row: usize, col: usize, id: u32) -> Result<(), SortError> {
        self.check_bounds(row, col)?;
        if self.position_of(id).is_some() {
            return Err(SortError::DuplicateId(id));
        }
        let cell = &mut self.cells[row * self.cols + col];
        if let Some(existing) = *cell {
            return Err(SortError::DuplicateId(existing));
        }
        *cell = Some(id);
        Ok(())
    }

    pub fn freeze(&mut self, row: usize, col: usize) -> Result<(), SortError> {
        self.check_bounds(row, col)?;
        if self.get(row, col).is_none() {
            return Err(SortError::FreezeEmpty(row, col));
        }
        self.frozen.insert((row, col));
        Ok(())
    }

    pub fn is_frozen(&self, row: usize, col: usize) -> bool {
        self.frozen.contains(&(row, col))
    }

    pub fn frozen(&self) -> &BTreeSet<(usize, usize)> {
        &self.frozen
    }

    pub fn empty_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    /// `(row, col, id)` for every occupied cell, row-major.
    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|id| (i / self.cols, i % self.cols, id)))
    }

    pub fn ids(&self) -> Vec<u32> {
        self.cells.iter().flatten().copied().collect()
    }

    pub fn position_of(&self, id: u32) -> Option<(usize, usize)> {
        self.cells
            .iter()
            .position(|&c| c == Some(id))
            .map(|i| (i / self.cols, i % self.cols))
    }

    fn check_bounds(&self, row: usize, col: usize) -> Result<(), SortError> {
        if row < self.rows && col < self.cols {
            Ok(())
        } else {
            Err(SortError::OutOfBounds {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }
}

/// Mean over 4-adjacent occupied cell pairs of `1 - combined distance`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct GridQuality(pub Score);

impl GridQuality {
    pub fn value(self) -> f64 {
        self.0.value()
    }
}

/// Grid sorter with configurable descriptor weights and sweeps per block size.
#[derive(Debug, Clone, Copy)]
pub struct GridSorter {
    pub weights: CombinedWeights,
    pub sweeps_per_size: usize,
}

impl Default for GridSorter {
    fn default() -> Self {
        Self {
            weights: CombinedWeights::default(),
            sweeps_per_size: 2,
        }
    }
}

impl GridSorter {
    pub fn sort<T: HasFeatures>(
        &self,
        items: &[T],
        rows: usize,
        cols: usize,
        seed: u64,
    ) -> Result<GridAssignment, SortError> {
        let empty: [crate::feature::FeatureRecord; 0] = [];
        self.sort_constrained(items, &GridAssignment::new(rows, cols), &empty[..], seed)
    }

    /// Places `items` into the empty cells of `grid`; occupied cells stay put.
    /// `placed` resolves the features of images already on the grid.
    pub fn sort_constrained<T, L>(
        &self,
        items: &[T],
        grid: &GridAssignment,
        placed: &L,
        seed: u64,
    ) -> Result<GridAssignment, SortError>
    where
        T: HasFeatures,
        L: FeatureLookup + ?Sized,
    {
        let free = grid.empty_count();
        if items.len() > free {
            return Err(SortError::CapacityExceeded {
                items: items.len(),
                free,
            });
        }
        let mut seen: HashSet<u32> = grid.cells.iter().flatten().copied().collect();
        for it in items {
            if !seen.insert(it.image_id()) {
                return Err(SortError::DuplicateId(it.image_id()));
            }
        }
        if items.is_empty() {
            return Ok(grid.clone());
        }

        let mut work = Workspace::new(grid.rows, grid.cols, self.weights);
        for (i, cell) in grid.cells.iter().enumerate() {
            if let Some(id) = *cell {
                let (s, v) = placed.features(id).ok_or(SortError::MissingFeatures(id))?;
                work.cell_item[i] = Some(work.push(id, s, v));
                work.movable[i] = false;
            }
        }
        let first_new = work.ids.len();
        for it in items {
            work.push(it.image_id(), it.semantic(), it.visual());
        }

        let mut open: Vec<usize> = (0..work.cell_item.len())
            .filter(|&i| work.movable[i])
            .collect();
        open.shuffle(&mut rng(seed));
        for (k, &cell) in open.iter().take(items.len()).enumerate() {
            work.cell_item[cell] = Some(first_new + k);
        }

        let initial = work.cell_item.clone();
        let initial_quality = work.mean_pair_distance();

        work.run(self.sweeps_per_size);

        // Never hand back something worse than the random start.
        if let (Some(before), Some(after)) = (initial_quality, work.mean_pair_distance()) {
            if after > before {
                work.cell_item = initial;
            }
        }

        let mut out = grid.clone();
        for (i, cell) in work.cell_item.iter().enumerate() {
            if work.movable[i] {
                out.cells[i] = cell.map(|k| work.ids[k]);
            }
        }
        Ok(out)
    }

    pub fn quality<L: FeatureLookup + ?Sized>(
        &self,
        grid: &GridAssignment,
        lookup: &L,
    ) -> Result<GridQuality, SortError> {
        let feat = |id: u32| lookup.features(id).ok_or(SortError::MissingFeatures(id));
        let mut total = 0.0;
        let mut pairs = 0usize;
        for (r, c, id) in grid.occupied() {
            let a = feat(id)?;
            for (rr, cc) in [(r + 1, c), (r, c + 1)] {
                if let Some(other) = grid.get(rr, cc) {
                    let b = feat(other)?;
                    total += 1.0 - self.distance(a, b);
                    pairs += 1;
                }
            }
        }
        if pairs == 0 {
            return Err(SortError::Undefined);
        }
        Ok(GridQuality(Score::new(total / pairs as f64)))
    }

    fn distance(
        &self,
        a: (&SemanticFeature, &VisualFeature),
        b: (&SemanticFeature, &VisualFeature),
    ) -> f64 {
        self.weights.semantic * (1.0 - a.0.similarity(b.0).value())
            + self.weights.visual * (1.0 - a.1.similarity(b.1).value())
    }
}

pub fn sort_grid<T: HasFeatures>(
    items: &[T],
    rows: usize,
    cols: usize,
    seed: u64,
) -> Result<GridAssignment, SortError> {
    GridSorter::default().sort(items, rows, cols, seed)
}

pub fn sort_grid_constrained<T, L>(
    items: &[T],
    grid: &GridAssignment,
    placed: &L,
    seed: u64,
) -> Result<GridAssignment, SortError>
where
    T: HasFeatures,
    L: FeatureLookup + ?Sized,
{
    GridSorter::default().sort_constrained(items, grid, placed, seed)
}

pub fn grid_quality<L: FeatureLookup + ?Sized>(
    grid: &GridAssignment,
    lookup: &L,
) -> Result<GridQuality, SortError> {
    GridSorter::default().quality(grid, lookup)
}

/// Mutable sorting state: an item pool with embeddings and the cell → item map.
struct Workspace {
    rows: usize,
    cols: usize,
    sem_scale: f64,
    vis_scale: f64,
    ids: Vec<u32>,
    embed: Vec<f64>,
    cell_item: Vec<Option<usize>>,
    movable: Vec<bool>,
}

impl Workspace {
    fn new(rows: usize, cols: usize, weights: CombinedWeights) -> Self {
        Self {
            rows,
            cols,
            sem_scale: (weights.semantic / SEMANTIC_DIMS as f64).sqrt() / 255.0,
            vis_scale: (weights.visual / VISUAL_DIMS as f64).sqrt() / 255.0,
            ids: Vec::new(),
            embed: Vec::new(),
            cell_item: vec![None; rows * cols],
            movable: vec![true; rows * cols],
        }
    }

    fn push(&mut self, id: u32, s: &SemanticFeature, v: &VisualFeature) -> usize {
        self.ids.push(id);
        self.embed
            .extend(s.as_bytes().iter().map(|&b| f64::from(b) * self.sem_scale));
        self.embed
            .extend(v.as_bytes().iter().map(|&b| f64::from(b) * self.vis_scale));
        self.ids.len() - 1
    }

    fn vec(&self, item: usize) -> &[f64] {
        &self.embed[item * EMBED_DIMS..(item + 1) * EMBED_DIMS]
    }

    fn dist(&self, a: usize, b: usize) -> f64 {
        sq_euclid(self.vec(a), self.vec(b))
    }

    fn cell(&self, r: isize, c: isize) -> Option<usize> {
        (r >= 0 && c >= 0 && (r as usize) < self.rows && (c as usize) < self.cols)
            .then(|| r as usize * self.cols + c as usize)
    }

    fn neighbors(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = ((cell / self.cols) as isize, (cell % self.cols) as isize);
        [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
            .into_iter()
            .filter_map(move |(rr, cc)| self.cell(rr, cc))
    }

    fn mean_pair_distance(&self) -> Option<f64> {
        let mut total = 0.0;
        let mut pairs = 0usize;
        for cell in 0..self.cell_item.len() {
            let Some(a) = self.cell_item[cell] else { continue };
            let (r, c) = (cell / self.cols, cell % self.cols);
            for other in [self.cell(r as isize + 1, c as isize), self.cell(r as isize, c as isize + 1)]
                .into_iter()
                .flatten()
            {
                if let Some(b) = self.cell_item[other] {
                    total += self.dist(a, b);
                    pairs += 1;
                }
            }
        }
        (pairs > 0).then(|| total / pairs as f64)
    }

    fn run(&mut self, sweeps: usize) {
        let span = self.rows.max(self.cols);
        let mut block = 1usize;
        while block * 2 < span {
            block *= 2;
        }
        if span > 1 {
            loop {
                for _ in 0..sweeps {
                    for offset in [0, block] {
                        let targets = self.targets(block);
                        self.target_pass(block, offset, &targets);
                    }
                }
                if block == 1 {
                    break;
                }
                block /= 2;
            }
        }
        for _ in 0..MAX_REFINE_ROUNDS {
            let Some(lambda) = self.mean_pair_distance() else { break };
            let changed = self.exact_pass(0, lambda) | self.exact_pass(1, lambda);
            if !changed {
                break;
            }
        }
    }

    /// Mean embedding over occupied cells within `radius` of each cell, via a
    /// summed-area table. `None` where the window holds no item.
    fn targets(&self, radius: usize) -> Vec<Option<Vec<f64>>> {
        let (rows, cols) = (self.rows, self.cols);
        let w = cols + 1;
        let mut sums = vec![0.0; (rows + 1) * w * EMBED_DIMS];
        let mut counts = vec![0u32; (rows + 1) * w];
        for r in 0..rows {
            for c in 0..cols {
                let at = (r + 1) * w + (c + 1);
                let (up, left, diag) = (r * w + (c + 1), (r + 1) * w + c, r * w + c);
                let own = self.cell_item[r * cols + c];
                counts[at] = counts[up] + counts[left] - counts[diag] + u32::from(own.is_some());
                for d in 0..EMBED_DIMS {
                    let x = own.map_or(0.0, |k| self.embed[k * EMBED_DIMS + d]);
                    sums[at * EMBED_DIMS + d] = sums[up * EMBED_DIMS + d]
                        + sums[left * EMBED_DIMS + d]
                        - sums[diag * EMBED_DIMS + d]
                        + x;
                }
            }
        }
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let (r0, r1) = (r.saturating_sub(radius), (r + radius + 1).min(rows));
                let (c0, c1) = (c.saturating_sub(radius), (c + radius + 1).min(cols));
                let (a, b, cc, dd) = (r1 * w + c1, r0 * w + c1, r1 * w + c0, r0 * w + c0);
                let n = counts[a] + counts[dd] - counts[b] - counts[cc];
                if n == 0 {
                    out.push(None);
                    continue;
                }
                let inv = 1.0 / f64::from(n);
                out.push(Some(
                    (0..EMBED_DIMS)
                        .map(|d| {
                            (sums[a * EMBED_DIMS + d] + sums[dd * EMBED_DIMS + d]
                                - sums[b * EMBED_DIMS + d]
                                - sums[cc * EMBED_DIMS + d])
                                * inv
                        })
                        .collect(),
                ));
            }
        }
        out
    }

    /// Movable cells of every quad formed by corresponding cells of four
    /// blocks of side `block`, grouped on a lattice shifted by `offset`.
    fn quads(&self, block: usize, offset: usize) -> Vec<Vec<usize>> {
        let step = 2 * block as isize;
        let (b, off) = (block as isize, offset as isize);
        let mut out = Vec::new();
        let mut gr = -off;
        while gr < self.rows as isize {
            let mut gc = -off;
            while gc < self.cols as isize {
                for dr in 0..b {
                    for dc in 0..b {
                        let quad: Vec<usize> = [(0, 0), (0, b), (b, 0), (b, b)]
                            .iter()
                            .filter_map(|&(br, bc)| self.cell(gr + br + dr, gc + bc + dc))
                            .filter(|&cell| self.movable[cell])
                            .collect();
                        if quad.len() >= 2 && quad.iter().any(|&c| self.cell_item[c].is_some()) {
                            out.push(quad);
                        }
                    }
                }
                gc += step;
            }
            gr += step;
        }
        out
    }

    fn target_pass(&mut self, block: usize, offset: usize, targets: &[Option<Vec<f64>>]) -> bool {
        let mut changed = false;
        for quad in self.quads(block, offset) {
            let contents: Vec<Option<usize>> = quad.iter().map(|&c| self.cell_item[c]).collect();
            let cost = |slot: usize, content: Option<usize>| match (content, &targets[quad[slot]]) {
                (Some(k), Some(t)) => sq_euclid(self.vec(k), t),
                _ => 0.0,
            };
            let best = best_permutation(quad.len(), |perm| {
                perm.iter()
                    .enumerate()
                    .map(|(slot, &src)| cost(slot, contents[src]))
                    .sum()
            });
            if let Some(perm) = best {
                for (slot, &src) in perm.iter().enumerate() {
                    self.cell_item[quad[slot]] = contents[src];
                }
                changed = true;
            }
        }
        changed
    }

    /// Re-arranges each 2×2 cell quad to minimize the sum over affected
    /// adjacent occupied pairs of `distance - lambda`. With `lambda` the
    /// current mean pair distance this lowers the mean even when the number
    /// of occupied pairs changes; on full grids it is plain sum minimization.
    fn exact_pass(&mut self, offset: usize, lambda: f64) -> bool {
        let mut changed = false;
        for quad in self.quads(1, offset) {
            let k = quad.len();
            let contents: Vec<Option<usize>> = quad.iter().map(|&c| self.cell_item[c]).collect();
            // external[src][slot]: cost of content `src` against fixed neighbors of quad[slot]
            let mut external = vec![vec![0.0; k]; k];
            for (slot, &cell) in quad.iter().enumerate() {
                for nb in self.neighbors(cell) {
                    if quad.contains(&nb) {
                        continue;
                    }
                    let Some(other) = self.cell_item[nb] else { continue };
                    for (src, content) in contents.iter().enumerate() {
                        if let Some(item) = content {
                            external[src][slot] += self.dist(*item, other) - lambda;
                        }
                    }
                }
            }
            let mut adjacent_slots = Vec::new();
            for i in 0..k {
                for j in (i + 1)..k {
                    if self.neighbors(quad[i]).any(|n| n == quad[j]) {
                        adjacent_slots.push((i, j));
                    }
                }
            }
            let mut internal = vec![vec![0.0; k]; k];
            for a in 0..k {
                for b in 0..k {
                    if let (Some(x), Some(y)) = (contents[a], contents[b]) {
                        if a != b {
                            internal[a][b] = self.dist(x, y) - lambda;
                        }
                    }
                }
            }
            let best = best_permutation(k, |perm| {
                let ext: f64 = perm.iter().enumerate().map(|(slot, &src)| external[src][slot]).sum();
                let int: f64 = adjacent_slots
                    .iter()
                    .map(|&(i, j)| internal[perm[i]][perm[j]])
                    .sum();
                ext + int
            });
            if let Some(perm) = best {
                for (slot, &src) in perm.iter().enumerate() {
                    self.cell_item[quad[slot]] = contents[src];
                }
                changed = true;
            }
        }
        changed
    }
}

/// Best permutation of `k` slots under `cost`, or `None` when the identity is
/// already optimal (within a small tolerance).
fn best_permutation(k: usize, mut cost: impl FnMut(&[usize]) -> f64) -> Option<Vec<usize>> {
    let identity: Vec<usize> = (0..k).collect();
    let base = cost(&identity);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut perm = identity;
    while next_permutation(&mut perm) {
        let c = cost(&perm);
        if c < best.as_ref().map_or(base - IMPROVE_EPS, |(b, _)| *b) {
            best = Some((c, perm.clone()));
        }
    }
    best.map(|(_, p)| p)
}

/// Lexicographic successor; returns false after the last permutation.
fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn sq_euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
