use std::io::{self, Write};

use nalgebra::DVector;

/// Row-major sample trace of fixed-length vectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    dim: usize,
    values: Vec<f64>,
}

impl Trace {
    pub fn new(dim: usize) -> Self {
        Self { dim, values: Vec::new() }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self { dim, values: Vec::with_capacity(dim * rows) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.values.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.dim, "trace row length");
        self.values.extend_from_slice(row);
    }

    pub fn push_vector(&mut self, row: &DVector<f64>) {
        self.push(row.as_slice());
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut means = vec![0.0; self.dim];
        for r in self.rows() {
            means.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    /// CSV with a header of column labels and one row per sample.
    pub fn write_csv<W: Write>(&self, mut out: W, labels: &[String]) -> io::Result<()> {
        assert_eq!(labels.len(), self.dim, "one label per column");
        writeln!(out, "{}", labels.join(","))?;
        for r in self.rows() {
            let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}
