//! Measurement records shared by every census and experiment.

use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// One measured tuple: its parameters, the measured magnitude, the bound
/// shape it is compared against, and their ratio.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub params: Vec<(String, f64)>,
    pub value: f64,
    pub normalizer: f64,
    pub ratio: f64,
}

impl Record {
    pub fn new(params: Vec<(&str, f64)>, value: f64, normalizer: f64) -> Self {
        let ratio = if normalizer != 0.0 {
            value / normalizer
        } else {
            f64::NAN
        };
        Record {
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            value,
            normalizer,
            ratio,
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub max_ratio: f64,
    pub median_ratio: f64,
    pub argmax: Option<usize>,
}

impl Summary {
    fn of(records: &[Record]) -> Self {
        let mut finite: Vec<(usize, f64)> = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.ratio.is_finite())
            .map(|(i, r)| (i, r.ratio))
            .collect();
        if finite.is_empty() {
            return Summary {
                count: records.len(),
                ..Summary::default()
            };
        }
        // first index wins ties, so the summary is order-deterministic
        let (argmax, max_ratio) = finite
            .iter()
            .copied()
            .fold((usize::MAX, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
        finite.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mid = finite.len() / 2;
        let median_ratio = if finite.len() % 2 == 1 {
            finite[mid].1
        } else {
            0.5 * (finite[mid - 1].1 + finite[mid].1)
        };
        Summary {
            count: records.len(),
            max_ratio,
            median_ratio,
            argmax: Some(argmax),
        }
    }
}

/// Records plus summary statistics and the hash of the producing config.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub records: Vec<Record>,
    pub summary: Summary,
    /// Scalar results that are not per-tuple (fitted slopes, counts, ...).
    pub extras: Vec<(String, f64)>,
    pub provenance: String,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>, records: Vec<Record>) -> Self {
        let summary = Summary::of(&records);
        ExperimentReport {
            name: name.into(),
            records,
            summary,
            extras: Vec::new(),
            provenance: String::new(),
        }
    }

    pub fn with_provenance(mut self, hash: impl Into<String>) -> Self {
        self.provenance = hash.into();
        self
    }

    pub fn with_extra(mut self, key: impl Into<String>, value: f64) -> Self {
        self.extras.push((key.into(), value));
        self
    }

    pub fn extra(&self, key: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One CSV row per record. Parameter columns come from the first record;
    /// the config hash is repeated on every row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let names: Vec<String> = self
            .records
            .first()
            .map(|r| r.params.iter().map(|(k, _)| k.clone()).collect())
            .unwrap_or_default();
        let mut header = names.clone();
        header.extend(["value", "normalizer", "ratio", "config_hash"].map(String::from));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row: Vec<String> = names
                .iter()
                .map(|k| r.param(k).map(fmt_f64).unwrap_or_default())
                .collect();
            row.push(fmt_f64(r.value));
            row.push(fmt_f64(r.normalizer));
            row.push(fmt_f64(r.ratio));
            row.push(self.provenance.clone());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON-lines: one object per record, then a summary object.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            let mut obj = serde_json::Map::new();
            for (k, v) in &r.params {
                obj.insert(k.clone(), json_num(*v));
            }
            obj.insert("value".into(), json_num(r.value));
            obj.insert("normalizer".into(), json_num(r.normalizer));
            obj.insert("ratio".into(), json_num(r.ratio));
            obj.insert("config_hash".into(), self.provenance.clone().into());
            writeln!(out, "{}", serde_json::Value::Object(obj))?;
        }
        let mut summary = serde_json::Map::new();
        summary.insert("report".into(), self.name.clone().into());
        summary.insert("count".into(), self.summary.count.into());
        summary.insert("max_ratio".into(), json_num(self.summary.max_ratio));
        summary.insert("median_ratio".into(), json_num(self.summary.median_ratio));
        for (k, v) in &self.extras {
            summary.insert(k.clone(), json_num(*v));
        }
        summary.insert("config_hash".into(), self.provenance.clone().into());
        writeln!(out, "{}", serde_json::Value::Object(summary))?;
        Ok(())
    }
}

fn json_num(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v)
        .map(serde_json::Value::Number)
        .unwrap_or_else(|| serde_json::Value::String(fmt_f64(v)))
}

/// Shortest round-trip formatting; integers print without a fraction.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Hex SHA-256 of canonical config bytes.
pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    hex::encode(digest)
}
