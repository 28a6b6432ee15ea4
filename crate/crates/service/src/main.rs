use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use imgraph_core::generate_synthetic;
use imgraph_service::collection::{encode_features, encode_metadata, ingest};
use imgraph_service::config::ServeOptions;
use imgraph_service::persist::{file_size, read_graph, save_graph};
use imgraph_service::{Result, ServiceError};

#[derive(Parser)]
#[command(name = "imgraph", version, about = "Graph-based image collection explorer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph file from a feature file and metadata sidecar
    Ingest {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run improve attempts on layer 0 of a graph file, in place
    Improve {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve the HTTP API
    Serve {
        /// key=value file; flags override its values
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        options: ServeOptions,
    },
    /// Print layer sizes, quality and file size
    Stats {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Write a synthetic clustered feature file plus metadata (<out>.tsv
    /// unless --meta is given)
    Gen {
        #[arg(long)]
        clusters: usize,
        #[arg(long)]
        per_cluster: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        meta: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            features,
            meta,
            out,
            seed,
        } => {
            let c = ingest(&features, &meta, seed)?;
            save_graph(c.graph(), &out)?;
            println!(
                "{} images, {} keywords, {} layers -> {}",
                c.len(),
                c.keywords().len(),
                c.graph().len(),
                out.display()
            );
        }
        Command::Improve { graph, budget, seed } => {
            let mut g = read_graph(&graph)?;
            let before = quality(g.base());
            let stats = g.improve_layer(0, budget, seed).unwrap_or_default();
            save_graph(&g, &graph)?;
            println!(
                "{} of {} swaps accepted, quality {before} -> {}",
                stats.accepted,
                stats.attempts,
                quality(g.base())
            );
        }
        Command::Serve { config, options } => {
            let file = match config {
                Some(p) => ServeOptions::from_config_text(&std::fs::read_to_string(p)?)?,
                None => ServeOptions::default(),
            };
            let cfg = options.or(file).resolve()?;
            tokio::runtime::Runtime::new()?.block_on(imgraph_service::serve(cfg))?;
        }
        Command::Stats { graph } => stats(&graph)?,
        Command::Gen {
            clusters,
            per_cluster,
            seed,
            out,
            meta,
        } => {
            if clusters == 0 || per_cluster == 0 {
                return Err(ServiceError::Config("clusters and per-cluster must be positive".into()));
            }
            let recs = generate_synthetic(clusters, per_cluster, true, seed)?;
            let meta = meta.unwrap_or_else(|| out.with_extension("tsv"));
            std::fs::write(&out, encode_features(&recs))?;
            std::fs::write(&meta, encode_metadata(&recs))?;
            println!("{} records -> {}, {}", recs.len(), out.display(), meta.display());
        }
    }
    Ok(())
}

fn quality(layer: &imgraph_core::GraphLayer) -> String {
    layer
        .quality()
        .map(|q| format!("{:.6}", q.quality.value()))
        .unwrap_or_else(|_| "undefined".into())
}

fn stats(path: &Path) -> Result<()> {
    let g = read_graph(path)?;
    let on_disk = std::fs::metadata(path)?.len();
    for layer in g.layers() {
        println!(
            "layer {}: {} nodes, {} edges, quality {}",
            layer.level(),
            layer.len(),
            layer.edge_count(),
            quality(layer)
        );
    }
    let counts: Vec<usize> = g.layers().iter().map(|l| l.len()).collect();
    println!("total nodes: {}", g.total_nodes());
    println!("file size: {on_disk} bytes (expected {})", file_size(&counts));
    Ok(())
}
