//! Rendering of command results as JSON, CSV or gnuplot-style tables.

use std::fs;
use std::io::{self, Write};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Column-oriented numeric table.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

pub struct Sink {
    pub format: Format,
    pub output: Option<String>,
    pub bits: bool,
    pub plot_data: Option<String>,
}

// Entropy-like keys rescaled by --bits.
const NAT_KEYS: &[&str] = &[
    "entropy",
    "information_gain",
    "reversible_entropy_flux",
    "entropy_change",
    "entropy_difference",
    "dh_loop",
    "information",
    "gain",
    "max_info_bound",
    "best_gain",
    "dp_gap",
    "cyclic_info",
    "oriented_info",
    "line_integral",
    "area_integral",
    "running_gain",
];

fn to_bits(v: &mut Value) {
    match v {
        Value::Object(map) => {
            for (k, x) in map.iter_mut() {
                if NAT_KEYS.contains(&k.as_str()) {
                    if let Some(f) = x.as_f64() {
                        *x = serde_json::json!(f / std::f64::consts::LN_2);
                        continue;
                    }
                }
                to_bits(x);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(to_bits),
        _ => {}
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

impl Sink {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.output {
            Some(p) if p != "-" => Box::new(io::BufWriter::new(
                fs::File::create(p).with_context(|| format!("creating {p}"))?,
            )),
            _ => Box::new(io::stdout().lock()),
        })
    }

    /// Writes `report`. In CSV mode `table` is written when given, otherwise
    /// the report is flattened into `key,value` rows; the full JSON report
    /// then goes to stderr so that no result is lost.
    pub fn emit<R: Serialize>(&self, report: &R, table: Option<&Table>) -> Result<()> {
        let mut value = serde_json::to_value(report)?;
        if self.bits {
            to_bits(&mut value);
            if let Value::Object(map) = &mut value {
                map.insert("units".into(), Value::String("bits".into()));
            }
        }
        let mut w = self.writer()?;
        match self.format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut w, &value)?;
                writeln!(w)?;
            }
            Format::Csv => {
                let mut cw = csv::Writer::from_writer(&mut w);
                match table {
                    Some(t) => {
                        cw.write_record(&t.headers)?;
                        for row in &t.rows {
                            cw.write_record(row.iter().map(f64::to_string))?;
                        }
                        cw.flush()?;
                        drop(cw);
                        eprintln!("{}", serde_json::to_string_pretty(&value)?);
                    }
                    None => {
                        let mut rows = Vec::new();
                        flatten("", &value, &mut rows);
                        cw.write_record(["key", "value"])?;
                        for (k, v) in rows {
                            cw.write_record([k, v])?;
                        }
                        cw.flush()?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Whitespace-separated table for gnuplot, when `--plot-data` is set.
    pub fn plot(&self, table: &Table) -> Result<()> {
        let Some(path) = &self.plot_data else {
            return Ok(());
        };
        let mut w = io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {path}"))?);
        writeln!(w, "# {}", table.headers.join(" "))?;
        for row in &table.rows {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(w, "{}", cells.join(" "))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_rescale_only_entropy_keys() {
        let mut v = serde_json::json!({"entropy": std::f64::consts::LN_2, "theta": 2.0, "nested": [{"gain": 0.0}]});
        to_bits(&mut v);
        assert_eq!(v["entropy"], 1.0);
        assert_eq!(v["theta"], 2.0);
        assert_eq!(v["nested"][0]["gain"], 0.0);
    }

    #[test]
    fn flattening() {
        let v = serde_json::json!({"a": {"b": 1.5, "c": [true, "x"]}, "d": null});
        let mut out = Vec::new();
        flatten("", &v, &mut out);
        assert_eq!(
            out,
            vec![
                ("a.b".into(), "1.5".into()),
                ("a.c.0".into(), "true".into()),
                ("a.c.1".into(), "x".into()),
                ("d".into(), "null".into()),
            ]
        );
    }
}
