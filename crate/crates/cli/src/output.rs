//! Output files with a provenance header: resolved configuration and
//! content hashes of every input. No timestamps, so reruns are byte-identical.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Format;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
}

impl Provenance {
    pub fn new<C: Serialize>(command: &str, config: &C) -> anyhow::Result<Self> {
        Ok(Self {
            tool: "lobmrr".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
        })
    }

    /// Record an input under the name it was given on the command line.
    pub fn add_input(&mut self, label: &Path, bytes: &[u8]) {
        self.inputs.push(InputDigest {
            path: label.display().to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn header_lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("# {} {} {}", self.tool, self.version, self.command),
            format!("# config={}", self.config),
        ];
        for i in &self.inputs {
            out.push(format!("# input {} sha256={}", i.path, i.sha256));
        }
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_input(path: &Path) -> anyhow::Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

/// A long-format row: `scope,table,key,lag,value,se,n`.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub scope: String,
    pub table: String,
    pub key: String,
    pub lag: Option<usize>,
    pub value: Option<f64>,
    pub se: Option<f64>,
    pub n: Option<u64>,
}

impl Row {
    pub fn new(scope: &str, table: &str) -> Self {
        Self {
            scope: scope.into(),
            table: table.into(),
            key: String::new(),
            lag: None,
            value: None,
            se: None,
            n: None,
        }
    }

    pub fn key(mut self, k: impl Into<String>) -> Self {
        self.key = k.into();
        self
    }

    pub fn lag(mut self, l: usize) -> Self {
        self.lag = Some(l);
        self
    }

    pub fn value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    pub fn se(mut self, s: f64) -> Self {
        self.se = Some(s);
        self
    }

    pub fn n(mut self, n: u64) -> Self {
        self.n = Some(n);
        self
    }
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

/// Fields never contain commas except free-form keys, which are quoted.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_csv_table(
    path: &Path,
    prov: &Provenance,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    for l in prov.header_lines() {
        writeln!(buf, "{l}")?;
    }
    writeln!(buf, "{}", header.join(","))?;
    for r in rows {
        let fields: Vec<String> = r.iter().map(|f| csv_field(f)).collect();
        writeln!(buf, "{}", fields.join(","))?;
    }
    write_file(path, &buf)
}

pub fn rows_to_csv(rows: &[Row]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.scope.clone(),
                r.table.clone(),
                r.key.clone(),
                opt(&r.lag),
                opt(&r.value),
                opt(&r.se),
                opt(&r.n),
            ]
        })
        .collect()
}

pub const ROW_HEADER: [&str; 7] = ["scope", "table", "key", "lag", "value", "se", "n"];

#[derive(Serialize)]
struct JsonDoc<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, prov: &Provenance, body: &T) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(&JsonDoc { provenance: prov, body })?;
    s.push('\n');
    write_file(path, s.as_bytes())
}

/// Write long-format rows in the requested format; returns the path.
pub fn write_rows(dir: &Path, stem: &str, format: Format, prov: &Provenance, rows: &[Row]) -> anyhow::Result<PathBuf> {
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        Format::Csv => write_csv_table(&path, prov, &ROW_HEADER, rows_to_csv(rows))?,
        Format::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                rows: &'a [Row],
            }
            write_json(&path, prov, &Body { rows })?
        }
    }
    Ok(path)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}
