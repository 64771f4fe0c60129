//! TOML configuration and flag resolution. Precedence is flag, then file,
//! then built-in default.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use lobmrr::book::MarketConfig;

use crate::{Cli, MarketArgs};

/// Environment variable naming a directory that relative input paths are
/// resolved against when they do not exist relative to the working directory.
pub const DATA_ROOT_ENV: &str = "LOBMRR_DATA_ROOT";

pub const DEFAULT_LAGS: usize = 20;
pub const DEFAULT_BINS: usize = 10;
pub const DEFAULT_HORIZON: usize = 50;
pub const DEFAULT_LEVELS: usize = 10;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub data_root: Option<PathBuf>,
    #[serde(default)]
    pub market: MarketSection,
    #[serde(default)]
    pub session: SessionSection,
    #[serde(default)]
    pub stats: StatsSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub synth: SynthSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub tick: Option<f64>,
    pub rebate: Option<f64>,
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSection {
    pub start: Option<f64>,
    pub end: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsSection {
    pub lags: Option<usize>,
    pub bins: Option<usize>,
    pub horizon: Option<usize>,
    pub variant: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub mode: Option<String>,
    pub rho: Option<f64>,
    pub g: Option<f64>,
    pub wsigma: Option<f64>,
    pub coupling: Option<f64>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub p0: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub ticker: Option<String>,
    pub date: Option<String>,
    pub events: Option<usize>,
    pub levels: Option<usize>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Common {
    pub out: PathBuf,
    pub format: Format,
    pub data_root: Option<PathBuf>,
}

impl Common {
    pub fn resolve(cli: &Cli, file: &FileConfig) -> anyhow::Result<Self> {
        let format = match cli.format.as_deref().or(file.format.as_deref()).unwrap_or("csv") {
            "csv" => Format::Csv,
            "json" => Format::Json,
            other => anyhow::bail!("unknown format {other:?}; expected csv or json"),
        };
        let data_root = std::env::var_os(DATA_ROOT_ENV)
            .map(PathBuf::from)
            .or_else(|| file.data_root.clone());
        Ok(Self {
            out: cli.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from(".")),
            format,
            data_root,
        })
    }

    /// Resolve an input path, falling back to the data root.
    pub fn input(&self, p: &Path) -> PathBuf {
        if p.is_relative() && !p.exists() {
            if let Some(root) = &self.data_root {
                let candidate = root.join(p);
                if candidate.exists() {
                    return candidate;
                }
            }
        }
        p.to_path_buf()
    }
}

pub fn market(args: &MarketArgs, file: &FileConfig, levels: Option<usize>) -> anyhow::Result<MarketConfig> {
    let d = MarketConfig::default();
    let m = MarketConfig {
        tick_size: args.tick.or(file.market.tick).unwrap_or(d.tick_size),
        rebate: args.rebate.or(file.market.rebate).unwrap_or(d.rebate),
        levels_tracked: levels.or(file.market.levels).unwrap_or(d.levels_tracked),
    };
    m.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(m)
}
