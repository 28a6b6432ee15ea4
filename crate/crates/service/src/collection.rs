//! Image collections: feature/metadata files and graph construction.
//!
//! Feature files are a plain concatenation of 118-byte records: image id
//! (u32, little-endian), 64 semantic bytes, 50 visual bytes. Metadata is
//! UTF-8 text with one `id<TAB>kw1,kw2,...` line per image.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use imgraph_core::feature::{SEMANTIC_DIMS, VISUAL_DIMS};
use imgraph_core::navigator::KeywordIndex;
use imgraph_core::{
    build_hierarchy, build_random_graph, FeatureRecord, HierarchicalGraph, SemanticFeature,
    VisualFeature,
};

use crate::error::{Result, ServiceError};

pub const FEATURE_RECORD_BYTES: usize = 4 + SEMANTIC_DIMS + VISUAL_DIMS;
/// Improve attempts per image when building layer 0 at ingestion.
pub const INGEST_BUDGET_PER_NODE: u64 = 50;
pub const DEFAULT_URL_TEMPLATE: &str = "/images/{id}.jpg";

#[derive(Debug, Clone)]
pub struct Collection {
    records: BTreeMap<u32, FeatureRecord>,
    graph: HierarchicalGraph,
    keywords: KeywordIndex,
    url_template: String,
}

impl Collection {
    /// Builds the graph from scratch: random quartic graph, improvement with
    /// a budget of 50 attempts per image, then the layer hierarchy.
    pub fn build(records: Vec<FeatureRecord>, seed: u64) -> Result<Self> {
        if records.is_empty() {
            return Err(ServiceError::EmptyCollection);
        }
        let mut base = build_random_graph(&records, seed)?;
        base.improve(INGEST_BUDGET_PER_NODE * records.len() as u64, seed);
        let graph = build_hierarchy(base, seed)?;
        Self::from_parts(records, graph)
    }

    /// Pairs records with an existing graph. Every graph node needs a record.
    pub fn from_parts(records: Vec<FeatureRecord>, graph: HierarchicalGraph) -> Result<Self> {
        let mut map = BTreeMap::new();
        for r in records {
            let id = r.image_id;
            if map.insert(id, r).is_some() {
                return Err(ServiceError::DuplicateId(id));
            }
        }
        for layer in graph.layers() {
            if let Some(&id) = layer.ids().iter().find(|id| !map.contains_key(id)) {
                return Err(ServiceError::CorruptGraph(format!(
                    "layer {} holds image {id} without a record",
                    layer.level()
                )));
            }
        }
        let keywords = KeywordIndex::from_records(map.values());
        Ok(Self {
            records: map,
            graph,
            keywords,
            url_template: DEFAULT_URL_TEMPLATE.to_string(),
        })
    }

    pub fn with_url_template(mut self, template: impl Into<String>) -> Result<Self> {
        let template = template.into();
        if !template.contains("{id}") {
            return Err(ServiceError::Config(format!(
                "url template {template:?} lacks the {{id}} token"
            )));
        }
        self.url_template = template;
        Ok(self)
    }

    pub fn records(&self) -> &BTreeMap<u32, FeatureRecord> {
        &self.records
    }

    pub fn graph(&self) -> &HierarchicalGraph {
        &self.graph
    }

    pub fn keywords(&self) -> &KeywordIndex {
        &self.keywords
    }

    pub fn url_template(&self) -> &str {
        &self.url_template
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_parts(self) -> (BTreeMap<u32, FeatureRecord>, HierarchicalGraph, KeywordIndex, String) {
        (self.records, self.graph, self.keywords, self.url_template)
    }
}

/// Reads a feature file and its metadata sidecar and builds the collection.
pub fn ingest(features: &Path, metadata: &Path, seed: u64) -> Result<Collection> {
    let bytes = std::fs::read(features)?;
    let text = std::fs::read_to_string(metadata)?;
    let records = attach_metadata(parse_features(&bytes)?, &parse_metadata(&text)?)?;
    Collection::build(records, seed)
}

pub fn parse_features(bytes: &[u8]) -> Result<Vec<FeatureRecord>> {
    if !bytes.len().is_multiple_of(FEATURE_RECORD_BYTES) {
        return Err(ServiceError::Format(format!(
            "feature file length {} is not a multiple of {FEATURE_RECORD_BYTES}",
            bytes.len()
        )));
    }
    let mut seen = BTreeSet::new();
    bytes
        .chunks_exact(FEATURE_RECORD_BYTES)
        .map(|chunk| {
            let id = u32::from_le_bytes(chunk[..4].try_into().unwrap());
            if !seen.insert(id) {
                return Err(ServiceError::DuplicateId(id));
            }
            let semantic = SemanticFeature::from_slice(&chunk[4..4 + SEMANTIC_DIMS])?;
            let visual = VisualFeature::from_slice(&chunk[4 + SEMANTIC_DIMS..])?;
            Ok(FeatureRecord::new(id, semantic, visual)?)
        })
        .collect()
}

pub fn encode_features(records: &[FeatureRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(records.len() * FEATURE_RECORD_BYTES);
    for r in records {
        out.extend_from_slice(&r.image_id.to_le_bytes());
        out.extend_from_slice(r.semantic.as_bytes());
        out.extend_from_slice(r.visual.as_bytes());
    }
    out
}

/// Parses `id<TAB>kw1,kw2` lines. Blank lines are skipped; keywords are
/// trimmed and lowercased.
pub fn parse_metadata(text: &str) -> Result<BTreeMap<u32, BTreeSet<String>>> {
    let mut out: BTreeMap<u32, BTreeSet<String>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, kws) = line.split_once('\t').unwrap_or((line, ""));
        let id: u32 = id
            .trim()
            .parse()
            .map_err(|_| ServiceError::Format(format!("metadata line {}: bad image id {id:?}", n + 1)))?;
        let entry = out.entry(id).or_default();
        entry.extend(
            kws.split(',')
                .map(|k| k.trim().to_lowercase())
                .filter(|k| !k.is_empty()),
        );
    }
    Ok(out)
}

pub fn encode_metadata(records: &[FeatureRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let kws: Vec<&str> = r.keywords.iter().map(String::as_str).collect();
        let _ = writeln!(out, "{}\t{}", r.image_id, kws.join(","));
    }
    out
}

/// Merges parsed metadata into the records. Ids without a record are an error.
pub fn attach_metadata(
    mut records: Vec<FeatureRecord>,
    metadata: &BTreeMap<u32, BTreeSet<String>>,
) -> Result<Vec<FeatureRecord>> {
    let pos: BTreeMap<u32, usize> = records.iter().enumerate().map(|(i, r)| (r.image_id, i)).collect();
    for (id, kws) in metadata {
        let &i = pos.get(id).ok_or(ServiceError::DanglingMetadata(*id))?;
        records[i].keywords.extend(kws.iter().cloned());
    }
    Ok(records)
}
