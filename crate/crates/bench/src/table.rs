//! Per-run result tables and their mean/std summaries.
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! reading a per-run file back and summarizing reproduces the stored summary
//! exactly.

use std::io::{Read, Write};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub keys: Vec<String>,
    pub run: usize,
    pub status: String,
    pub metrics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTable {
    pub key_names: Vec<String>,
    pub metric_names: Vec<String>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub keys: Vec<String>,
    pub runs: usize,
    pub ok: usize,
    /// `(mean, std)` per metric over finite values.
    pub stats: Vec<(f64, f64)>,
}

impl RunTable {
    pub fn new(key_names: &[&str], metric_names: &[&str]) -> Self {
        Self {
            key_names: key_names.iter().map(|s| s.to_string()).collect(),
            metric_names: metric_names.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, keys: Vec<String>, run: usize, status: impl Into<String>, metrics: Vec<f64>) {
        assert_eq!(keys.len(), self.key_names.len());
        assert_eq!(metrics.len(), self.metric_names.len());
        self.rows.push(Row { keys, run, status: status.into(), metrics });
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.key_names.iter().map(String::as_str).collect();
        header.extend(["run", "status"]);
        header.extend(self.metric_names.iter().map(String::as_str));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.keys.clone();
            rec.push(row.run.to_string());
            rec.push(row.status.clone());
            rec.extend(row.metrics.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a file written by [`RunTable::write_csv`]; `key_count` leading
    /// columns are keys.
    pub fn read_csv<R: Read>(input: R, key_count: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < key_count + 2 || header[key_count] != "run" || header[key_count + 1] != "status" {
            return Err(BenchError::Config("unexpected per-run header".into()));
        }
        let mut table = Self {
            key_names: header[..key_count].to_vec(),
            metric_names: header[key_count + 2..].to_vec(),
            rows: Vec::new(),
        };
        for rec in r.records() {
            let rec = rec?;
            let parse = |s: &str| s.parse::<f64>().map_err(|_| BenchError::Config(format!("bad number {s:?}")));
            table.rows.push(Row {
                keys: rec.iter().take(key_count).map(str::to_string).collect(),
                run: rec[key_count].parse().map_err(|_| BenchError::Config("bad run index".into()))?,
                status: rec[key_count + 1].to_string(),
                metrics: rec.iter().skip(key_count + 2).map(parse).collect::<Result<_>>()?,
            });
        }
        Ok(table)
    }

    /// Groups rows by keys in first-appearance order.
    pub fn summarize(&self) -> Vec<SummaryRow> {
        let mut groups: Vec<(Vec<String>, Vec<&Row>)> = Vec::new();
        for row in &self.rows {
            match groups.iter_mut().find(|g| g.0 == row.keys) {
                Some(g) => g.1.push(row),
                None => groups.push((row.keys.clone(), vec![row])),
            }
        }
        groups
            .into_iter()
            .map(|(keys, rows)| {
                let stats = (0..self.metric_names.len())
                    .map(|m| mean_std(&rows.iter().map(|r| r.metrics[m]).filter(|v| v.is_finite()).collect::<Vec<_>>()))
                    .collect();
                SummaryRow { keys, runs: rows.len(), ok: rows.iter().filter(|r| r.status == "ok").count(), stats }
            })
            .collect()
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = self.key_names.clone();
        header.extend(["runs".to_string(), "ok".to_string()]);
        for m in &self.metric_names {
            header.push(format!("{m}_mean"));
            header.push(format!("{m}_std"));
        }
        w.write_record(&header)?;
        for s in self.summarize() {
            let mut rec = s.keys.clone();
            rec.push(s.runs.to_string());
            rec.push(s.ok.to_string());
            for (mean, std) in &s.stats {
                rec.push(mean.to_string());
                rec.push(std.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean and sample standard deviation; NaN when empty.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    ggm_core::diagnostics::mean_std(values)
}
