//! CSV and JSON writers. Every file gets a `<name>.meta.json` sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, Tolerances};
use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A table with a header row. Numbers use the shortest round-trip form.
pub struct Table {
    header: Vec<String>,
    body: String,
    rows: usize,
}

pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    B(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}
impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::F)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}
impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            body: String::new(),
            rows: 0,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        for (k, c) in row.into_iter().enumerate() {
            if k > 0 {
                self.body.push(',');
            }
            match c {
                Cell::F(v) => write!(self.body, "{v:e}").unwrap(),
                Cell::I(v) => write!(self.body, "{v}").unwrap(),
                Cell::B(v) => write!(self.body, "{v}").unwrap(),
                Cell::S(s) if s.contains([',', '"', '\n']) => write!(self.body, "\"{}\"", s.replace('"', "\"\"")).unwrap(),
                Cell::S(s) => self.body.push_str(&s),
                Cell::Empty => {}
            }
        }
        self.body.push('\n');
        self.rows += 1;
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        s.push_str(&self.body);
        s
    }
}

/// Writes files into the output directory and records sidecars.
pub struct Emitter {
    dir: PathBuf,
    command: String,
    config_hash: String,
    tolerances: Tolerances,
    seed: u64,
    written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(dir: &Path, command: &str, config: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let canon = serde_json::to_string(config).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config_hash: sha256_hex(canon.as_bytes()),
            tolerances: config.tolerances,
            seed: config.seed,
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn write(&mut self, name: &str, content: &str, extra: Value) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let meta = json!({
            "file": name,
            "sha256": sha256_hex(content.as_bytes()),
            "command": self.command,
            "config_sha256": self.config_hash,
            "seed": self.seed,
            "tolerances": self.tolerances,
            "versions": {
                "crnsynth": crnsynth::VERSION,
                "crnsynth-cli": env!("CARGO_PKG_VERSION"),
            },
            "details": extra,
        });
        let meta_path = self.dir.join(format!("{name}.meta.json"));
        let text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Io(e.to_string()))? + "\n";
        fs::write(&meta_path, text).map_err(|e| CliError::Io(format!("{}: {e}", meta_path.display())))?;
        log::info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        self.write(name, &table.render(), json!({ "rows": table.len(), "columns": table.header }))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))? + "\n";
        self.write(name, &text, Value::Null)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting_and_numbers() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(vec![0.1.into(), "x,y".into(), Cell::Empty]);
        assert_eq!(t.render(), "a,b,c\n1e-1,\"x,y\",\n");
    }

    #[test]
    fn float_round_trip() {
        let mut t = Table::new(&["v"]);
        let v = 1.0 / 3.0;
        t.push(vec![v.into()]);
        let s = t.render();
        let back: f64 = s.lines().nth(1).unwrap().parse().unwrap();
        assert_eq!(back, v);
    }
}
