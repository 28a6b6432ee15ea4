//! Settings for `serve`, from flags and an optional `key=value` file.
//!
//! File keys match the long flag names (`graph`, `meta`, `port`,
//! `url-template`, ...). Blank lines and lines starting with `#` are
//! ignored. Flags win over file values.

use std::path::PathBuf;

use clap::Args;

use crate::collection::DEFAULT_URL_TEMPLATE;
use crate::error::{Result, ServiceError};
use crate::improver::DEFAULT_BATCH_SIZE;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_BIND: &str = "127.0.0.1";

#[derive(Debug, Clone, Default, PartialEq, Eq, Args)]
pub struct ServeOptions {
    /// Graph file written by `ingest`
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Metadata sidecar (id<TAB>keywords)
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub bind: Option<String>,
    /// Image URL pattern containing {id}
    #[arg(long)]
    pub url_template: Option<String>,
    /// Improve attempts per background batch (0 disables improvement)
    #[arg(long)]
    pub batch_size: Option<u64>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub working_layer: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServeConfig {
    pub graph: PathBuf,
    pub meta: PathBuf,
    pub port: u16,
    pub bind: String,
    pub url_template: String,
    pub batch_size: u64,
    pub cols: usize,
    pub rows: usize,
    pub working_layer: usize,
    pub seed: u64,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| ServiceError::Config(format!("bad value {value:?} for {key}")))
}

impl ServeOptions {
    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut o = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ServiceError::Config(format!("line {}: expected key=value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key.replace('_', "-").as_str() {
                "graph" => o.graph = Some(value.into()),
                "meta" => o.meta = Some(value.into()),
                "port" => o.port = Some(parse(key, value)?),
                "bind" => o.bind = Some(value.to_string()),
                "url-template" => o.url_template = Some(value.to_string()),
                "batch-size" => o.batch_size = Some(parse(key, value)?),
                "cols" => o.cols = Some(parse(key, value)?),
                "rows" => o.rows = Some(parse(key, value)?),
                "working-layer" => o.working_layer = Some(parse(key, value)?),
                "seed" => o.seed = Some(parse(key, value)?),
                _ => return Err(ServiceError::Config(format!("line {}: unknown key {key:?}", n + 1))),
            }
        }
        Ok(o)
    }

    /// Values set in `self` win; the rest come from `fallback`.
    pub fn or(self, fallback: Self) -> Self {
        Self {
            graph: self.graph.or(fallback.graph),
            meta: self.meta.or(fallback.meta),
            port: self.port.or(fallback.port),
            bind: self.bind.or(fallback.bind),
            url_template: self.url_template.or(fallback.url_template),
            batch_size: self.batch_size.or(fallback.batch_size),
            cols: self.cols.or(fallback.cols),
            rows: self.rows.or(fallback.rows),
            working_layer: self.working_layer.or(fallback.working_layer),
            seed: self.seed.or(fallback.seed),
        }
    }

    pub fn resolve(self) -> Result<ServeConfig> {
        let url_template = self.url_template.unwrap_or_else(|| DEFAULT_URL_TEMPLATE.to_string());
        if !url_template.contains("{id}") {
            return Err(ServiceError::Config(format!("url template {url_template:?} lacks {{id}}")));
        }
        Ok(ServeConfig {
            graph: self.graph.ok_or_else(|| ServiceError::Config("missing graph".into()))?,
            meta: self.meta.ok_or_else(|| ServiceError::Config("missing meta".into()))?,
            port: self.port.unwrap_or(DEFAULT_PORT),
            bind: self.bind.unwrap_or_else(|| DEFAULT_BIND.to_string()),
            url_template,
            batch_size: self.batch_size.unwrap_or(DEFAULT_BATCH_SIZE),
            cols: self.cols.unwrap_or(imgraph_core::navigator::DEFAULT_COLS),
            rows: self.rows.unwrap_or(imgraph_core::navigator::DEFAULT_ROWS),
            working_layer: self.working_layer.unwrap_or(1),
            seed: self.seed.unwrap_or(0),
        })
    }
}
