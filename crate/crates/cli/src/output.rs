//! Versioned tables rendered as CSV or JSONL, and the run manifest.
//!
//! Every row starts with a `schema` column such as `cost.v1`. Floats are
//! written with 17 significant digits so values round-trip exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::args::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(u64),
    Str(String),
    Bool(bool),
    Null,
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Self::Num(v)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Self::Int(v)
    }
}

impl From<u32> for Value {
    fn from(v: u32) -> Self {
        Self::Int(u64::from(v))
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Self::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Self::Str(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Self::Str(v)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Self::Null, Into::into)
    }
}

pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Four significant digits, for human-facing summaries.
pub fn fmt_short(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e6 || v.abs() < 1e-3) {
        format!("{v:.3e}")
    } else {
        let digits = if v == 0.0 { 0 } else { v.abs().log10().floor() as i32 };
        format!("{v:.*}", (3 - digits).max(0) as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(schema: &'static str, columns: &[&'static str]) -> Self {
        Self {
            schema,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the {} header", self.schema);
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Jsonl => self.to_jsonl(),
        }
    }

    fn to_csv(&self) -> String {
        let mut out = String::from("schema");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(self.schema);
            for v in row {
                out.push(',');
                out.push_str(&csv_field(v));
            }
            out.push('\n');
        }
        out
    }

    fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let _ = write!(out, "{{\"schema\":{}", json_str(self.schema));
            for (c, v) in self.columns.iter().zip(row) {
                let _ = write!(out, ",{}:{}", json_str(c), json_value(v));
            }
            out.push_str("}\n");
        }
        out
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialise")
}

fn json_value(v: &Value) -> String {
    match v {
        Value::Num(x) if x.is_finite() => fmt_float(*x),
        Value::Num(_) | Value::Null => "null".into(),
        Value::Int(i) => i.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Str(s) => json_str(s),
    }
}

fn csv_field(v: &Value) -> String {
    match v {
        Value::Num(x) => fmt_float(*x),
        Value::Int(i) => i.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Null => String::new(),
        Value::Str(s) if s.contains([',', '"', '\n', '\r']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::Str(s) => s.clone(),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Digest256 {
    pub path: PathBuf,
    pub sha256: String,
}

impl Digest256 {
    pub fn of_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            sha256: sha256_hex(&std::fs::read(path)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub command: Vec<String>,
    pub inputs: Vec<Digest256>,
    pub outputs: Vec<Digest256>,
    pub preset_version: &'static str,
    pub threads: Option<u16>,
    pub timestamp_unix: u64,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let digests = |ds: &[Digest256]| {
            ds.iter()
                .map(|d| serde_json::json!({"path": d.path.display().to_string(), "sha256": d.sha256}))
                .collect::<Vec<_>>()
        };
        let value = serde_json::json!({
            "schema": "manifest.v1",
            "command": self.command,
            "inputs": digests(&self.inputs),
            "outputs": digests(&self.outputs),
            "preset_version": self.preset_version,
            "threads": self.threads,
            "timestamp_unix": self.timestamp_unix,
        });
        let mut text = serde_json::to_string_pretty(&value).expect("manifest serialises");
        text.push('\n');
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Table {
        let mut t = Table::new("demo.v1", &["name", "x", "n", "ok", "opt"]);
        t.push(vec!["a,b".into(), 0.1.into(), 3u64.into(), true.into(), Value::Null]);
        t
    }

    #[test]
    fn csv_layout() {
        assert_eq!(
            table().render(Format::Csv),
            "schema,name,x,n,ok,opt\ndemo.v1,\"a,b\",1.0000000000000001e-1,3,true,\n"
        );
    }

    #[test]
    fn jsonl_mirrors_columns() {
        let line = table().render(Format::Jsonl);
        assert_eq!(
            line,
            "{\"schema\":\"demo.v1\",\"name\":\"a,b\",\"x\":1.0000000000000001e-1,\"n\":3,\"ok\":true,\"opt\":null}\n"
        );
        let parsed: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(parsed["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 272_000.0, 6.02e23, 5e-324] {
            assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn short_format() {
        assert_eq!(fmt_short(0.8333333), "0.8333");
        assert_eq!(fmt_short(32.6789), "32.68");
        assert_eq!(fmt_short(272_000.0), "272000");
        assert_eq!(fmt_short(2.25e15), "2.250e15");
        assert_eq!(fmt_short(0.0), "0.000");
    }
}
