use std::fs;
use std::io::{self, Write};
use std::path::Path;

use meshcast_core::netsim::fmt_f64;
use serde::Serialize;

use crate::Failure;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Row key: a state index, or a quantity name for `bounds`.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Index {
    State(usize),
    Name(String),
}

impl std::fmt::Display for Index {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Index::State(k) => write!(f, "{k}"),
            Index::Name(n) => f.write_str(n),
        }
    }
}

impl From<usize> for Index {
    fn from(k: usize) -> Self {
        Index::State(k)
    }
}

impl From<&str> for Index {
    fn from(n: &str) -> Self {
        Index::Name(n.into())
    }
}

impl From<String> for Index {
    fn from(n: String) -> Self {
        Index::Name(n)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub index: Index,
    pub value: f64,
}

impl Row {
    pub fn new(index: impl Into<Index>, value: f64) -> Self {
        Row {
            index: index.into(),
            value,
        }
    }
}

#[derive(Serialize)]
struct Table<'a, P: Serialize> {
    schema_version: u32,
    command: &'a str,
    params: P,
    rows: &'a [Row],
}

pub fn render_table<P: Serialize>(format: Format, command: &str, params: P, rows: &[Row]) -> String {
    match format {
        Format::Csv => {
            let mut s = String::from("index,value\n");
            for r in rows {
                s.push_str(&format!("{},{}\n", r.index, fmt_f64(r.value)));
            }
            s
        }
        Format::Json => {
            let t = Table {
                schema_version: SCHEMA_VERSION,
                command,
                params,
                rows,
            };
            let mut s = serde_json::to_string_pretty(&t).expect("table serializes");
            s.push('\n');
            s
        }
    }
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), Failure> {
    match path {
        Some(p) => write_file(p, text.as_bytes()),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Exec(format!("stdout: {e}"))),
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Exec(format!("{}: {e}", path.display())))
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("value serializes");
    v.push(b'\n');
    v
}

/// Reads and parses a JSON file, reporting the path and line on failure.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(T, serde_json::Value), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Exec(format!("{}: {e}", path.display())))?;
    let ctx = |e: serde_json::Error| {
        let mut msg = e.to_string();
        if let Some(cut) = msg.rfind(" at line ") {
            msg.truncate(cut);
        }
        Failure::Exec(format!("{}:{}:{}: {msg}", path.display(), e.line(), e.column()))
    };
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(ctx)?;
    let parsed = serde_json::from_str(&text).map_err(ctx)?;
    Ok((parsed, raw))
}

/// Seed from the flag, else from the config, else fresh entropy (announced
/// on stderr so the run can be replayed).
pub fn resolve_seed(flag: Option<u64>, from_config: Option<u64>) -> u64 {
    flag.or(from_config).unwrap_or_else(|| {
        let seed = rand::random::<u64>();
        eprintln!("seed: {seed}");
        seed
    })
}
