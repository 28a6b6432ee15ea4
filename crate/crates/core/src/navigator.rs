//! Interactive map navigation: keyword search, drag-fill, zoom and recenter.
//!
//! A [`SessionState`] remembers, per layer, which image sits at which global
//! cell coordinate. Dragging only ever adds to that cache, so dragging back
//! to a visited area shows the same images at the same places. Search, zoom
//! and recenter discard the cache of the layer they lay out.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::feature::{sq_dist, FeatureRecord, SemanticFeature};
use crate::graph::{GraphError, GraphLayer, HierarchicalGraph};
use crate::seed::{derive_seed, rng};
use crate::sorter::{sort_grid_constrained, GridAssignment, SortError};

pub const DEFAULT_COLS: usize = 12;
pub const DEFAULT_ROWS: usize = 8;
/// Cap on the related-region list returned with a search.
pub const MAX_RELATED: usize = 8;
/// Components larger than this get their medoid from a seeded sample.
pub const MEDOID_SAMPLE: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NavError {
    #[error("no image carries keyword {0:?}")]
    KeywordNotFound(String),
    #[error("keyword is empty")]
    EmptyKeyword,
    #[error("image id {0} is not in the current layer")]
    NotFound(u32),
    #[error("session has no map yet")]
    NoMap,
    #[error("already at the top layer")]
    AtTopLayer,
    #[error("already at the bottom layer")]
    AtBottomLayer,
    #[error("viewport must be at least 2x2, got {cols}x{rows}")]
    InvalidViewport { cols: usize, rows: usize },
    #[error(transparent)]
    Sort(#[from] SortError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Visible window in global cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Viewport {
    cols: usize,
    rows: usize,
    pub origin_x: i64,
    pub origin_y: i64,
    pub layer: usize,
}

impl Viewport {
    pub fn new(cols: usize, rows: usize) -> Result<Self, NavError> {
        if cols < 2 || rows < 2 {
            return Err(NavError::InvalidViewport { cols, rows });
        }
        Ok(Self {
            cols,
            rows,
            origin_x: 0,
            origin_y: 0,
            layer: 0,
        })
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        (self.origin_x..self.origin_x + self.cols as i64).contains(&x)
            && (self.origin_y..self.origin_y + self.rows as i64).contains(&y)
    }

    /// Visible coordinates in row-major order.
    pub fn coords(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (0..self.rows as i64).flat_map(move |r| {
            (0..self.cols as i64).map(move |c| (self.origin_x + c, self.origin_y + r))
        })
    }

    /// Local (row, col) of the central cell.
    fn center_cell(&self) -> (usize, usize) {
        (self.rows / 2, self.cols / 2)
    }

    /// Puts the central cell at global (0, 0).
    fn center_on_origin(&mut self) {
        let (r, c) = self.center_cell();
        self.origin_x = -(c as i64);
        self.origin_y = -(r as i64);
    }

    fn local(&self, x: i64, y: i64) -> (usize, usize) {
        ((y - self.origin_y) as usize, (x - self.origin_x) as usize)
    }

    fn global(&self, row: usize, col: usize) -> (i64, i64) {
        (self.origin_x + col as i64, self.origin_y + row as i64)
    }
}

impl Default for Viewport {
    fn default() -> Self {
        Self::new(DEFAULT_COLS, DEFAULT_ROWS).expect("default viewport is valid")
    }
}

/// Coordinate ↔ image cache of one layer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerCache {
    by_pos: BTreeMap<(i64, i64), u32>,
    by_id: HashMap<u32, (i64, i64)>,
}

impl LayerCache {
    pub fn get(&self, x: i64, y: i64) -> Option<u32> {
        self.by_pos.get(&(x, y)).copied()
    }

    pub fn position_of(&self, id: u32) -> Option<(i64, i64)> {
        self.by_id.get(&id).copied()
    }

    pub fn contains_id(&self, id: u32) -> bool {
        self.by_id.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.by_pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_pos.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i64, i64), u32)> + '_ {
        self.by_pos.iter().map(|(&p, &id)| (p, id))
    }

    fn insert(&mut self, pos: (i64, i64), id: u32) {
        debug_assert!(!self.by_pos.contains_key(&pos));
        debug_assert!(!self.by_id.contains_key(&id));
        self.by_pos.insert(pos, id);
        self.by_id.insert(id, pos);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    id: String,
    viewport: Viewport,
    caches: BTreeMap<usize, LayerCache>,
    has_map: bool,
}

impl SessionState {
    pub fn new(id: impl Into<String>, viewport: Viewport) -> Self {
        Self {
            id: id.into(),
            viewport,
            caches: BTreeMap::new(),
            has_map: false,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn viewport(&self) -> &Viewport {
        &self.viewport
    }

    pub fn has_map(&self) -> bool {
        self.has_map
    }

    pub fn cache(&self, layer: usize) -> Option<&LayerCache> {
        self.caches.get(&layer)
    }

    /// Cached cells inside the viewport, row-major.
    pub fn visible(&self) -> Vec<Cell> {
        let Some(cache) = self.caches.get(&self.viewport.layer) else {
            return Vec::new();
        };
        self.viewport
            .coords()
            .filter_map(|(x, y)| cache.get(x, y).map(|id| Cell { id, x, y }))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub id: u32,
    pub x: i64,
    pub y: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Related {
    pub label: String,
    pub id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Transition {
    pub id: u32,
    pub from_x: i64,
    pub from_y: i64,
    pub to_x: i64,
    pub to_y: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MapResponse {
    pub layer: usize,
    pub cells: Vec<Cell>,
    pub related: Vec<Related>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordRegion {
    pub keyword: String,
    pub member_ids: BTreeSet<u32>,
    pub representative: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoomDirection {
    In,
    Out,
}

/// Keyword → image ids. Keywords are stored lowercase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeywordIndex {
    map: BTreeMap<String, BTreeSet<u32>>,
}

impl KeywordIndex {
    pub fn from_records<'a, I>(records: I) -> Self
    where
        I: IntoIterator<Item = &'a FeatureRecord>,
    {
        let mut index = Self::default();
        for r in records {
            for kw in &r.keywords {
                index.insert(r.image_id, kw);
            }
        }
        index
    }

    pub fn insert(&mut self, id: u32, keyword: &str) {
        self.map.entry(keyword.to_lowercase()).or_default().insert(id);
    }

    pub fn get(&self, keyword: &str) -> Option<&BTreeSet<u32>> {
        self.map.get(&keyword.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<u32>)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NavConfig {
    /// Layer a search lands on, clamped to the top layer.
    pub working_layer: usize,
    pub seed: u64,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            working_layer: 1,
            seed: 0,
        }
    }
}

/// Navigation over one immutable graph snapshot.
#[derive(Debug, Clone, Copy)]
pub struct Navigator<'a> {
    graph: &'a HierarchicalGraph,
    keywords: &'a KeywordIndex,
    config: NavConfig,
}

impl<'a> Navigator<'a> {
    pub fn new(graph: &'a HierarchicalGraph, keywords: &'a KeywordIndex, config: NavConfig) -> Self {
        Self {
            graph,
            keywords,
            config,
        }
    }

    pub fn working_layer(&self) -> usize {
        self.config.working_layer.min(self.graph.top_level())
    }

    pub fn find_keyword_regions(&self, keyword: &str) -> Result<Vec<KeywordRegion>, NavError> {
        let keyword = keyword.trim().to_lowercase();
        if keyword.is_empty() {
            return Err(NavError::EmptyKeyword);
        }
        let base = self.graph.base();
        let members: BTreeSet<u32> = self
            .keywords
            .get(&keyword)
            .map(|s| s.iter().copied().filter(|&id| base.contains(id)).collect())
            .unwrap_or_default();
        if members.is_empty() {
            return Err(NavError::KeywordNotFound(keyword));
        }

        let mut seen = HashSet::new();
        let mut components = Vec::new();
        for &start in &members {
            if !seen.insert(start) {
                continue;
            }
            let mut comp = BTreeSet::from([start]);
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for v in base.neighbors(u).into_iter().flatten() {
                    if members.contains(&v) && seen.insert(v) {
                        comp.insert(v);
                        stack.push(v);
                    }
                }
            }
            components.push(comp);
        }
        components.sort_by(|a, b| b.len().cmp(&a.len()).then(a.first().cmp(&b.first())));

        Ok(components
            .into_iter()
            .map(|member_ids| {
                let representative = self.medoid(base, &member_ids);
                KeywordRegion {
                    keyword: keyword.clone(),
                    member_ids,
                    representative,
                }
            })
            .collect())
    }

    /// Member maximizing total semantic similarity to the others, ties to the
    /// smallest id.
    fn medoid(&self, layer: &GraphLayer, members: &BTreeSet<u32>) -> u32 {
        let mut ids: Vec<u32> = members.iter().copied().collect();
        if ids.len() > MEDOID_SAMPLE {
            let mut r = rng(derive_seed(self.config.seed, u64::from(ids[0])));
            let mut picked = rand::seq::index::sample(&mut r, ids.len(), MEDOID_SAMPLE).into_vec();
            picked.sort_unstable();
            ids = picked.into_iter().map(|i| ids[i]).collect();
        }
        let sem: Vec<&SemanticFeature> = ids.iter().map(|&id| layer.semantic_of(id).unwrap()).collect();
        let mut best = (u64::MAX, u32::MAX);
        for (i, a) in sem.iter().enumerate() {
            let total: u64 = sem
                .iter()
                .map(|b| u64::from(sq_dist(a.as_bytes(), b.as_bytes())))
                .sum();
            best = best.min((total, ids[i]));
        }
        best.1
    }

    pub fn search(&self, session: &mut SessionState, keyword: &str) -> Result<MapResponse, NavError> {
        let regions = self.find_keyword_regions(keyword)?;
        let level = self.working_layer();
        let layer = self.layer(level)?;
        let rep = regions[0].representative;
        let center = if layer.contains(rep) {
            rep
        } else {
            nearest_in(layer, self.graph.base().semantic_of(rep).unwrap())
        };
        let cells = self.layout(session, level, center)?;
        let related = regions[1..]
            .iter()
            .take(MAX_RELATED)
            .map(|r| Related {
                label: r.keyword.clone(),
                id: r.representative,
            })
            .collect();
        Ok(MapResponse {
            layer: level,
            cells,
            related,
            transitions: Vec::new(),
        })
    }

    pub fn drag(&self, session: &mut SessionState, dx: i64, dy: i64) -> Result<MapResponse, NavError> {
        if !session.has_map {
            return Err(NavError::NoMap);
        }
        session.viewport.origin_x -= dx;
        session.viewport.origin_y -= dy;
        let vp = session.viewport;
        let layer = self.layer(vp.layer)?;
        let cache = session.caches.entry(vp.layer).or_default();

        let empty: Vec<(i64, i64)> = vp.coords().filter(|&(x, y)| cache.get(x, y).is_none()).collect();
        if !empty.is_empty() && !cache.is_empty() {
            let fresh = fill_candidates(layer, cache, &vp, &empty);
            if !fresh.is_empty() {
                let mut grid = GridAssignment::new(vp.rows, vp.cols);
                for (x, y) in vp.coords() {
                    if let Some(id) = cache.get(x, y) {
                        let (r, c) = vp.local(x, y);
                        grid.place(r, c, id)?;
                        grid.freeze(r, c)?;
                    }
                }
                let items: Vec<_> = fresh.iter().map(|&id| layer.node(id).unwrap()).collect();
                let seed = derive_seed(
                    self.config.seed,
                    (vp.origin_x as u64).rotate_left(32) ^ vp.origin_y as u64,
                );
                let sorted = sort_grid_constrained(&items, &grid, layer, seed)?;
                for (r, c, id) in sorted.occupied() {
                    if grid.get(r, c).is_none() {
                        cache.insert(vp.global(r, c), id);
                    }
                }
            }
        }
        Ok(MapResponse {
            layer: vp.layer,
            cells: session.visible(),
            related: Vec::new(),
            transitions: Vec::new(),
        })
    }

    pub fn zoom(
        &self,
        session: &mut SessionState,
        direction: ZoomDirection,
        focus_x: i64,
        focus_y: i64,
    ) -> Result<MapResponse, NavError> {
        if !session.has_map {
            return Err(NavError::NoMap);
        }
        let from = session.viewport.layer;
        let to = match direction {
            ZoomDirection::In => from.checked_sub(1).ok_or(NavError::AtBottomLayer)?,
            ZoomDirection::Out if from >= self.graph.top_level() => return Err(NavError::AtTopLayer),
            ZoomDirection::Out => from + 1,
        };
        let old = session.visible();
        let focus = focus_image(&old, focus_x, focus_y).ok_or(NavError::NoMap)?;
        let target = self.layer(to)?;
        let center = if target.contains(focus) {
            focus
        } else {
            let current = self.layer(from)?;
            nearest_in(target, current.semantic_of(focus).unwrap())
        };
        let cells = self.layout(session, to, center)?;
        Ok(MapResponse {
            layer: to,
            transitions: transitions(&old, &cells),
            cells,
            related: Vec::new(),
        })
    }

    pub fn recenter(&self, session: &mut SessionState, id: u32) -> Result<MapResponse, NavError> {
        let level = if session.has_map {
            session.viewport.layer
        } else {
            self.working_layer()
        };
        if !self.layer(level)?.contains(id) {
            return Err(NavError::NotFound(id));
        }
        let old = session.visible();
        let cells = self.layout(session, level, id)?;
        Ok(MapResponse {
            layer: level,
            transitions: transitions(&old, &cells),
            cells,
            related: Vec::new(),
        })
    }

    fn layer(&self, level: usize) -> Result<&'a GraphLayer, NavError> {
        self.graph
            .layer(level)
            .ok_or(NavError::Graph(GraphError::Corrupt(format!("missing layer {level}"))))
    }

    /// Fresh map on `level` around `center`, replacing that layer's cache.
    fn layout(&self, session: &mut SessionState, level: usize, center: u32) -> Result<Vec<Cell>, NavError> {
        let layer = self.layer(level)?;
        let vp = &mut session.viewport;
        vp.layer = level;
        vp.center_on_origin();
        let ids = layer.expand_neighborhood(center, vp.cols * vp.rows)?;
        let items: Vec<_> = ids[1..].iter().map(|&id| layer.node(id).unwrap()).collect();
        let (r, c) = vp.center_cell();
        let mut grid = GridAssignment::new(vp.rows, vp.cols);
        grid.place(r, c, center)?;
        grid.freeze(r, c)?;
        let sorted = sort_grid_constrained(&items, &grid, layer, derive_seed(self.config.seed, u64::from(center)))?;

        let mut cache = LayerCache::default();
        for (r, c, id) in sorted.occupied() {
            cache.insert(vp.global(r, c), id);
        }
        session.caches.insert(level, cache);
        session.has_map = true;
        Ok(session.visible())
    }
}

/// Ids to fill the `empty` coordinates with: round-robin over expansions
/// from the cached border images, skipping anything already cached.
fn fill_candidates(layer: &GraphLayer, cache: &LayerCache, vp: &Viewport, empty: &[(i64, i64)]) -> Vec<u32> {
    let empty_set: HashSet<(i64, i64)> = empty.iter().copied().collect();
    let mut seeds: Vec<u32> = vp
        .coords()
        .filter(|&(x, y)| {
            [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|(dx, dy)| empty_set.contains(&(x + dx, y + dy)))
        })
        .filter_map(|(x, y)| cache.get(x, y))
        .collect();
    if seeds.is_empty() {
        // nothing cached in view: start from the cached image closest to it
        let gap = |(x, y): (i64, i64)| {
            let ox = (vp.origin_x - x).max(x - (vp.origin_x + vp.cols as i64 - 1)).max(0);
            let oy = (vp.origin_y - y).max(y - (vp.origin_y + vp.rows as i64 - 1)).max(0);
            ox + oy
        };
        if let Some((_, id)) = cache.iter().min_by_key(|&((x, y), _)| (gap((x, y)), y, x)) {
            seeds.push(id);
        }
    }

    let mut walks: Vec<_> = seeds.iter().filter_map(|&s| layer.expansion(s).ok()).collect();
    let mut alive = vec![true; walks.len()];
    let mut chosen = HashSet::new();
    let mut out = Vec::new();
    while out.len() < empty.len() && alive.iter().any(|&a| a) {
        for (k, walk) in walks.iter_mut().enumerate() {
            if !alive[k] || out.len() == empty.len() {
                continue;
            }
            loop {
                match walk.next() {
                    None => {
                        alive[k] = false;
                        break;
                    }
                    Some(id) if cache.contains_id(id) || chosen.contains(&id) => continue,
                    Some(id) => {
                        chosen.insert(id);
                        out.push(id);
                        break;
                    }
                }
            }
        }
    }
    out
}

/// The image at the focus coordinate, or the visible image closest to it.
fn focus_image(visible: &[Cell], x: i64, y: i64) -> Option<u32> {
    visible
        .iter()
        .min_by_key(|c| ((c.x - x).abs() + (c.y - y).abs(), c.y, c.x))
        .map(|c| c.id)
}

/// Node of `layer` semantically closest to `target`, ties to the smallest id.
fn nearest_in(layer: &GraphLayer, target: &SemanticFeature) -> u32 {
    layer
        .ids()
        .iter()
        .map(|&id| (sq_dist(layer.semantic_of(id).unwrap().as_bytes(), target.as_bytes()), id))
        .min()
        .map(|(_, id)| id)
        .expect("layers are never empty")
}

fn transitions(old: &[Cell], new: &[Cell]) -> Vec<Transition> {
    let before: HashMap<u32, (i64, i64)> = old.iter().map(|c| (c.id, (c.x, c.y))).collect();
    new.iter()
        .filter_map(|c| {
            before.get(&c.id).map(|&(fx, fy)| Transition {
                id: c.id,
                from_x: fx,
                from_y: fy,
                to_x: c.x,
                to_y: c.y,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature::generate_synthetic;
    use crate::graph::{build_hierarchy, build_random_graph};

    struct World {
        graph: HierarchicalGraph,
        keywords: KeywordIndex,
    }

    fn world(clusters: usize, per: usize, seed: u64) -> World {
        let recs = generate_synthetic(clusters, per, true, seed).unwrap();
        let mut base = build_random_graph(&recs, seed).unwrap();
        base.improve(50 * recs.len() as u64, seed);
        World {
            graph: build_hierarchy(base, seed).unwrap(),
            keywords: KeywordIndex::from_records(&recs),
        }
    }

    fn nav(w: &World) -> Navigator<'_> {
        Navigator::new(&w.graph, &w.keywords, NavConfig::default())
    }

    fn session() -> SessionState {
        SessionState::new("s", Viewport::new(6, 4).unwrap())
    }

    #[test]
    fn viewport_rejects_degenerate_sizes() {
        assert!(matches!(Viewport::new(1, 8), Err(NavError::InvalidViewport { .. })));
        assert_eq!(Viewport::default().cols(), 12);
        assert_eq!(Viewport::default().rows(), 8);
    }

    #[test]
    fn single_keyword_holder_is_its_own_region() {
        let recs = generate_synthetic(2, 10, false, 1).unwrap();
        let mut index = KeywordIndex::default();
        index.insert(7, "Lonely");
        let graph = build_hierarchy(build_random_graph(&recs, 1).unwrap(), 1).unwrap();
        let nav = Navigator::new(&graph, &index, NavConfig::default());
        let regions = nav.find_keyword_regions("LONELY").unwrap();
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].member_ids, BTreeSet::from([7]));
        assert_eq!(regions[0].representative, 7);
        assert_eq!(nav.find_keyword_regions("nope"), Err(NavError::KeywordNotFound("nope".into())));
        assert_eq!(nav.find_keyword_regions("  "), Err(NavError::EmptyKeyword));
    }

    #[test]
    fn search_centers_representative_and_is_repeatable() {
        let w = world(2, 120, 3);
        let nav = nav(&w);
        let mut s = session();
        let a = nav.search(&mut s, "kw1").unwrap();
        assert_eq!(a.layer, 1.min(w.graph.top_level()));
        assert_eq!(a.cells.len(), 24);
        let center = a.cells.iter().find(|c| (c.x, c.y) == (0, 0)).unwrap();
        assert!(w.graph.layer(a.layer).unwrap().contains(center.id));
        assert_eq!(nav.search(&mut s, "kw1").unwrap(), a);
        let mut other = session();
        assert_eq!(nav.search(&mut other, "kw1").unwrap(), a);
    }

    #[test]
    fn tiny_collection_gives_one_cell() {
        let recs = generate_synthetic(1, 1, true, 0).unwrap();
        let graph = build_hierarchy(build_random_graph(&recs, 0).unwrap(), 0).unwrap();
        let index = KeywordIndex::from_records(&recs);
        let nav = Navigator::new(&graph, &index, NavConfig::default());
        let map = nav.search(&mut session(), "kw0").unwrap();
        assert_eq!(map.layer, 0);
        assert_eq!(map.cells, vec![Cell { id: 1, x: 0, y: 0 }]);
    }

    #[test]
    fn drag_requires_a_map_and_zero_drag_is_identity() {
        let w = world(2, 60, 5);
        let nav = nav(&w);
        let mut s = session();
        assert_eq!(nav.drag(&mut s, 1, 0), Err(NavError::NoMap));
        let map = nav.search(&mut s, "kw0").unwrap();
        let same = nav.drag(&mut s, 0, 0).unwrap();
        assert_eq!(same.cells, map.cells);
    }

    #[test]
    fn drag_keeps_survivors_and_round_trips() {
        let w = world(3, 80, 6);
        let nav = nav(&w);
        let mut s = session();
        let start = nav.search(&mut s, "kw2").unwrap();
        let moved = nav.drag(&mut s, 1, 0).unwrap();
        assert_eq!(s.viewport().origin_x, -3 - 1);
        let old: HashMap<(i64, i64), u32> = start.cells.iter().map(|c| ((c.x, c.y), c.id)).collect();
        for c in &moved.cells {
            if let Some(&id) = old.get(&(c.x, c.y)) {
                assert_eq!(id, c.id);
            }
        }
        // the revealed column on the left is filled
        assert!(moved.cells.iter().any(|c| c.x == -4));
        let back = nav.drag(&mut s, -1, 0).unwrap();
        assert_eq!(back.cells, start.cells);
        let ids: HashSet<u32> = s.cache(start.layer).unwrap().iter().map(|(_, id)| id).collect();
        assert_eq!(ids.len(), s.cache(start.layer).unwrap().len());
    }

    #[test]
    fn far_drag_starts_from_nearest_cached_image() {
        let w = world(2, 100, 9);
        let nav = nav(&w);
        let mut s = session();
        nav.search(&mut s, "kw0").unwrap();
        let far = nav.drag(&mut s, -40, 0).unwrap();
        assert!(!far.cells.is_empty());
        assert!(far.cells.iter().all(|c| s.viewport().contains(c.x, c.y)));
    }

    #[test]
    fn zoom_bounds_and_focus_survives() {
        let w = world(2, 150, 11);
        assert!(w.graph.top_level() >= 2);
        let nav = nav(&w);
        let mut s = session();
        assert_eq!(nav.zoom(&mut s, ZoomDirection::In, 0, 0), Err(NavError::NoMap));
        nav.search(&mut s, "kw0").unwrap();
        let down = nav.zoom(&mut s, ZoomDirection::In, 1, 0).unwrap();
        assert_eq!(down.layer, 0);
        assert_eq!(nav.zoom(&mut s, ZoomDirection::In, 0, 0), Err(NavError::AtBottomLayer));
        let focus = down.cells.iter().find(|c| (c.x, c.y) == (0, 0)).unwrap().id;
        let up = nav.zoom(&mut s, ZoomDirection::Out, 0, 0).unwrap();
        assert_eq!(up.layer, 1);
        if w.graph.layer(1).unwrap().contains(focus) {
            assert!(up.cells.iter().any(|c| c.id == focus));
            assert!(up.transitions.iter().any(|t| t.id == focus));
        }
        let mut top = nav.zoom(&mut s, ZoomDirection::Out, 0, 0);
        while let Ok(m) = top {
            assert!(m.layer <= w.graph.top_level());
            top = nav.zoom(&mut s, ZoomDirection::Out, 0, 0);
        }
        assert_eq!(top, Err(NavError::AtTopLayer));
    }

    #[test]
    fn recenter_checks_membership() {
        let w = world(2, 60, 12);
        let nav = nav(&w);
        let mut s = session();
        let map = nav.search(&mut s, "kw0").unwrap();
        let center = map.cells.iter().find(|c| (c.x, c.y) == (0, 0)).unwrap().id;
        let again = nav.recenter(&mut s, center).unwrap();
        assert_eq!(again.cells.iter().find(|c| (c.x, c.y) == (0, 0)).unwrap().id, center);
        assert_eq!(again.transitions.len(), again.cells.len());
        assert_eq!(nav.recenter(&mut s, 999_999), Err(NavError::NotFound(999_999)));
    }

    #[test]
    fn map_response_json_shape() {
        let m = MapResponse {
            layer: 1,
            cells: vec![Cell { id: 5, x: -1, y: 2 }],
            related: vec![Related { label: "kw".into(), id: 9 }],
            transitions: vec![Transition {
                id: 5,
                from_x: 0,
                from_y: 0,
                to_x: -1,
                to_y: 2,
            }],
        };
        assert_eq!(
            serde_json::to_string(&m).unwrap(),
            r#"{"layer":1,"cells":[{"id":5,"x":-1,"y":2}],"related":[{"label":"kw","id":9}],"transitions":[{"id":5,"fromX":0,"fromY":0,"toX":-1,"toY":2}]}"#
        );
    }
}
