//! Binary graph files.
//!
//! Layout: `"HIGR"`, version byte (1), layer count byte, one little-endian
//! u32 node count per layer, then for each layer in order its nodes in
//! ascending id as 134-byte records: id, four neighbor ids (`NULL_ID` in
//! empty slots), 64 semantic bytes, 50 visual bytes. All integers are
//! little-endian. Neighbor slot order is stored as is.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use imgraph_core::feature::{SEMANTIC_DIMS, VISUAL_DIMS};
use imgraph_core::graph::DEGREE;
use imgraph_core::{FeatureRecord, GraphLayer, GraphNode, HierarchicalGraph, SemanticFeature, VisualFeature};

use crate::collection::{attach_metadata, parse_metadata, Collection};
use crate::error::{Result, ServiceError};

pub const MAGIC: &[u8; 4] = b"HIGR";
pub const VERSION: u8 = 1;
pub const NODE_RECORD_BYTES: usize = 4 + 4 * DEGREE + SEMANTIC_DIMS + VISUAL_DIMS;

/// Exact file size for the given per-layer node counts.
pub fn file_size(node_counts: &[usize]) -> u64 {
    6 + 4 * node_counts.len() as u64 + NODE_RECORD_BYTES as u64 * node_counts.iter().sum::<usize>() as u64
}

pub fn write_graph<W: Write>(graph: &HierarchicalGraph, mut w: W) -> Result<()> {
    let layer_count = u8::try_from(graph.len())
        .map_err(|_| ServiceError::Format(format!("{} layers exceed the 255 limit", graph.len())))?;
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, layer_count])?;
    for layer in graph.layers() {
        w.write_all(&(layer.len() as u32).to_le_bytes())?;
    }
    let mut buf = [0u8; NODE_RECORD_BYTES];
    for layer in graph.layers() {
        for node in layer.nodes_sorted() {
            encode_node(&node, &mut buf);
            w.write_all(&buf)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn encode_graph(graph: &HierarchicalGraph) -> Result<Vec<u8>> {
    let counts: Vec<usize> = graph.layers().iter().map(GraphLayer::len).collect();
    let mut out = Vec::with_capacity(file_size(&counts) as usize);
    write_graph(graph, &mut out)?;
    Ok(out)
}

fn encode_node(node: &GraphNode, buf: &mut [u8; NODE_RECORD_BYTES]) {
    buf[..4].copy_from_slice(&node.image_id.to_le_bytes());
    for (k, nb) in node.neighbors.iter().enumerate() {
        buf[4 + 4 * k..8 + 4 * k].copy_from_slice(&nb.to_le_bytes());
    }
    let s = 4 + 4 * DEGREE;
    buf[s..s + SEMANTIC_DIMS].copy_from_slice(node.semantic.as_bytes());
    buf[s + SEMANTIC_DIMS..].copy_from_slice(node.visual.as_bytes());
}

fn decode_node(rec: &[u8]) -> GraphNode {
    let u32_at = |o: usize| u32::from_le_bytes(rec[o..o + 4].try_into().unwrap());
    let s = 4 + 4 * DEGREE;
    GraphNode {
        image_id: u32_at(0),
        neighbors: std::array::from_fn(|k| u32_at(4 + 4 * k)),
        semantic: SemanticFeature::from_slice(&rec[s..s + SEMANTIC_DIMS]).unwrap(),
        visual: VisualFeature::from_slice(&rec[s + SEMANTIC_DIMS..]).unwrap(),
    }
}

/// Parses a whole graph file. Structural problems in the header or length
/// are `Format` errors; graphs that parse but break invariants are
/// `CorruptGraph`.
pub fn decode_graph(bytes: &[u8]) -> Result<HierarchicalGraph> {
    if bytes.len() < 6 {
        return Err(ServiceError::Format("file shorter than the header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(ServiceError::Format(format!("bad magic {:?}", &bytes[..4])));
    }
    if bytes[4] != VERSION {
        return Err(ServiceError::Format(format!("unsupported version {}", bytes[4])));
    }
    let layer_count = usize::from(bytes[5]);
    if layer_count == 0 {
        return Err(ServiceError::Format("no layers".into()));
    }
    let header = 6 + 4 * layer_count;
    if bytes.len() < header {
        return Err(ServiceError::Format("truncated layer table".into()));
    }
    let counts: Vec<usize> = bytes[6..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let expected = file_size(&counts);
    if (bytes.len() as u64) < expected {
        return Err(ServiceError::Format(format!(
            "truncated: {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    if bytes.len() as u64 > expected {
        return Err(ServiceError::Format(format!(
            "{} trailing bytes",
            bytes.len() as u64 - expected
        )));
    }

    let mut layers = Vec::with_capacity(layer_count);
    let mut offset = header;
    for (level, &count) in counts.iter().enumerate() {
        let end = offset + count * NODE_RECORD_BYTES;
        let nodes: Vec<GraphNode> = bytes[offset..end].chunks_exact(NODE_RECORD_BYTES).map(decode_node).collect();
        if nodes.windows(2).any(|w| w[0].image_id >= w[1].image_id) {
            return Err(ServiceError::CorruptGraph(format!("layer {level} ids are not strictly ascending")));
        }
        layers.push(GraphLayer::from_nodes(level, nodes).map_err(|e| corrupt(level, e))?);
        offset = end;
    }
    HierarchicalGraph::from_layers(layers).map_err(|e| ServiceError::CorruptGraph(e.to_string()))
}

fn corrupt(level: usize, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::CorruptGraph(format!("layer {level}: {e}"))
}

pub fn save_graph(graph: &HierarchicalGraph, path: &Path) -> Result<()> {
    // write next to the target and rename, so a crash never leaves half a file
    let tmp = path.with_extension("tmp");
    write_graph(graph, BufWriter::new(File::create(&tmp)?))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_graph(path: &Path) -> Result<HierarchicalGraph> {
    decode_graph(&std::fs::read(path)?)
}

/// Loads a graph file plus the metadata sidecar into a collection. Records
/// come from the layer-0 nodes.
pub fn load_graph(path: &Path, metadata: &Path) -> Result<Collection> {
    let graph = read_graph(path)?;
    let meta = parse_metadata(&std::fs::read_to_string(metadata)?)?;
    let records = graph
        .base()
        .nodes_sorted()
        .map(|n| FeatureRecord::new(n.image_id, n.semantic, n.visual))
        .collect::<Result<Vec<_>, _>>()?;
    Collection::from_parts(attach_metadata(records, &meta)?, graph)
}
