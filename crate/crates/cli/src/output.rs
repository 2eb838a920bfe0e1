//! JSON/CSV emission and the run manifest that accompanies every output.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use robust_bandit::ModelParams;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
}

/// Everything needed to rerun a subcommand and get the same output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ModelParams>,
    /// Subcommand settings after defaults are applied.
    pub options: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    /// Named pass/fail checks; the process exits nonzero if any is false.
    pub checks: BTreeMap<String, bool>,
}

impl RunManifest {
    pub fn new(
        subcommand: &'static str,
        params: Option<ModelParams>,
        options: impl Serialize,
    ) -> Self {
        Self {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            params,
            options: serde_json::to_value(options).expect("options serialize"),
            seed: None,
            outputs: Vec::new(),
            checks: BTreeMap::new(),
        }
    }

    pub fn check(&mut self, name: &str, passed: bool) {
        self.checks.insert(name.to_owned(), passed);
    }

    pub fn passed(&self) -> bool {
        self.checks.values().all(|&ok| ok)
    }
}

/// Writes every finite float with at least 15 significant digits and no
/// loss: the shortest round-trip digits, zero-padded when shorter.
struct PreciseFormatter;

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn format_f64(value: f64) -> String {
    if !value.is_finite() {
        return "null".into();
    }
    let shortest = format!("{value:e}");
    let digits = shortest
        .split('e')
        .next()
        .unwrap()
        .chars()
        .filter(char::is_ascii_digit)
        .count();
    if digits >= 15 {
        shortest
    } else {
        format!("{value:.14e}")
    }
}

pub fn to_json_string(value: &impl Serialize) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf)?)
}

/// A finished subcommand: a JSON body plus, for tabular commands, CSV rows.
pub struct Report {
    pub manifest: RunManifest,
    pub body: Value,
    /// Header and rows for CSV output; `None` flattens `body` to `key,value` rows.
    pub table: Option<(Vec<String>, Vec<Vec<String>>)>,
}

impl Report {
    pub fn emit(mut self, out: &OutputArgs, default: Format) -> anyhow::Result<bool> {
        let format = out.format.unwrap_or(default);
        let passed = self.manifest.passed();
        match format {
            Format::Json => {
                if let Some(path) = &out.out {
                    self.manifest.outputs.push(path.display().to_string());
                }
                let mut doc = serde_json::Map::new();
                doc.insert("manifest".into(), serde_json::to_value(&self.manifest)?);
                match self.body {
                    Value::Object(fields) => doc.extend(fields),
                    other => {
                        doc.insert("result".into(), other);
                    }
                }
                write_text(out.out.as_deref(), &(to_json_string(&doc)? + "\n"))?;
            }
            Format::Csv => {
                let (header, rows) = match self.table.take() {
                    Some(t) => t,
                    None => key_value_rows(&self.body),
                };
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&header)?;
                for row in &rows {
                    w.write_record(row)?;
                }
                let text = String::from_utf8(w.into_inner()?)?;
                match &out.out {
                    Some(path) => {
                        let sidecar = manifest_path(path);
                        self.manifest.outputs.push(path.display().to_string());
                        self.manifest.outputs.push(sidecar.display().to_string());
                        write_text(Some(path), &text)?;
                        write_text(Some(&sidecar), &(to_json_string(&self.manifest)? + "\n"))?;
                    }
                    None => {
                        write_text(None, &text)?;
                        eprintln!("{}", to_json_string(&self.manifest)?);
                    }
                }
            }
        }
        Ok(passed)
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn write_text(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// Flattens nested objects to dotted keys; arrays are kept as JSON text.
fn key_value_rows(body: &Value) -> (Vec<String>, Vec<Vec<String>>) {
    fn walk(prefix: &str, v: &Value, rows: &mut Vec<Vec<String>>) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, child, rows);
                }
            }
            _ => rows.push(vec![prefix.to_owned(), cell(v)]),
        }
    }
    let mut rows = Vec::new();
    walk("", body, &mut rows);
    (vec!["key".into(), "value".into()], rows)
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => float_cell(x),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

/// CSV float cell: shortest round-trip digits, in exponent form for very
/// small or large magnitudes; empty when not finite.
pub fn float_cell(x: f64) -> String {
    if !x.is_finite() {
        String::new()
    } else if x != 0.0 && !(1e-4..1e16).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_fifteen_digits() {
        assert_eq!(format_f64(0.2), "2.00000000000000e-1");
        assert_eq!(format_f64(0.32121564663416974), "3.2121564663416974e-1");
        assert_eq!(format_f64(f64::NAN), "null");
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e10, 0.0] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_output_is_valid() {
        let s = to_json_string(&serde_json::json!({"a": 0.5, "b": [1, 2.0]})).unwrap();
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"], 0.5);
        assert_eq!(back["b"][0], 1);
    }

    #[test]
    fn flattening() {
        let (_, rows) = key_value_rows(&serde_json::json!({"x": {"y": 0.25, "z": null}, "n": 3}));
        assert_eq!(
            rows,
            vec![vec!["n", "3"], vec!["x.y", "0.25"], vec!["x.z", ""]]
        );
    }

    #[test]
    fn csv_cells() {
        assert_eq!(float_cell(0.25), "0.25");
        assert_eq!(float_cell(3.7e-13), "3.7e-13");
        assert_eq!(float_cell(1.0), "1");
        assert_eq!(float_cell(f64::INFINITY), "");
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            manifest_path(Path::new("out/v.csv")),
            PathBuf::from("out/v.csv.manifest.json")
        );
    }
}
