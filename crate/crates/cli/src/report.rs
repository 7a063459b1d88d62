//! Number formatting and report output.

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "1.0.0";
pub const SCHEMA: &str = include_str!("../schema/report.schema.json");

/// Rounds to six significant digits unless full precision was requested.
#[derive(Debug, Clone, Copy)]
pub struct Numbers {
    pub full: bool,
}

impl Numbers {
    pub fn round(&self, x: f64) -> f64 {
        if self.full || x == 0.0 || !x.is_finite() {
            return x;
        }
        format!("{x:.5e}").parse().expect("formatted float parses")
    }

    /// JSON has no infinities or NaN: infinities become strings, NaN null.
    pub fn json(&self, x: f64) -> Value {
        if x.is_nan() {
            Value::Null
        } else if x.is_infinite() {
            Value::String(if x > 0.0 { "inf" } else { "-inf" }.into())
        } else {
            json!(self.round(x))
        }
    }

    pub fn json_opt(&self, x: Option<f64>) -> Value {
        x.map_or(Value::Null, |v| self.json(v))
    }

    pub fn json_vec(&self, xs: &[f64]) -> Value {
        Value::Array(xs.iter().map(|&x| self.json(x)).collect())
    }

    pub fn json_grid(&self, rows: impl Iterator<Item = Vec<f64>>) -> Value {
        Value::Array(rows.map(|r| self.json_vec(&r)).collect())
    }

    pub fn text(&self, x: f64) -> String {
        if x.is_nan() {
            "NA".into()
        } else if x.is_infinite() {
            if x > 0.0 { "inf" } else { "-inf" }.into()
        } else {
            self.round(x).to_string()
        }
    }

    pub fn text_opt(&self, x: Option<f64>) -> String {
        x.map_or_else(|| "NA".into(), |v| self.text(v))
    }
}

const INDEX_KEYS: [&str; 5] = ["index", "row", "col", "i", "j"];

/// Serialize a library diagnostic with its indices shifted to 1-based.
pub fn one_based<T: Serialize>(value: &T, numbers: Numbers) -> Value {
    fn shift(v: Value, numbers: Numbers) -> Value {
        match v {
            Value::Object(map) => Value::Object(
                map.into_iter()
                    .map(|(k, v)| {
                        let v = match (&v, INDEX_KEYS.contains(&k.as_str())) {
                            (Value::Number(n), true) if n.is_u64() => json!(n.as_u64().unwrap() + 1),
                            (Value::Number(n), false) if n.is_f64() => numbers.json(n.as_f64().unwrap()),
                            _ => shift(v, numbers),
                        };
                        (k, v)
                    })
                    .collect::<Map<_, _>>(),
            ),
            Value::Array(items) => Value::Array(items.into_iter().map(|v| shift(v, numbers)).collect()),
            other => other,
        }
    }
    shift(serde_json::to_value(value).expect("diagnostics serialize"), numbers)
}

pub fn header(command: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("command".into(), json!(command));
    m
}

/// Where and how a report is written.
#[derive(Debug, Clone)]
pub struct Sink {
    pub path: Option<PathBuf>,
}

impl Sink {
    pub fn write(&self, text: &str) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Input(format!("cannot write output: {e}"));
        match &self.path {
            Some(p) => std::fs::write(p, text).map_err(io),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes()).map_err(io)?;
                out.flush().map_err(io)
            }
        }
    }

    pub fn write_json(&self, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.write(&text)
    }

    pub fn write_csv(&self, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).and_then(|_| rows.iter().try_for_each(|r| w.write_record(r))).map_err(csv_err)?;
        let bytes = w.into_inner().map_err(|e| CliError::Input(format!("cannot write csv: {e}")))?;
        self.write(&String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Input(format!("cannot write csv: {e}"))
}
