//! External clustering-agreement metrics.
//!
//! Conventions: NMI normalises by the arithmetic mean of the two entropies,
//! ACC uses an optimal one-to-one matching on the zero-padded confusion
//! matrix, and F1 is computed over same-cluster vertex pairs.

use pathfinding::matrix::Matrix;
use pathfinding::prelude::kuhn_munkres;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub nmi: f64,
    pub purity: f64,
    pub acc: f64,
    pub ari: f64,
    pub f1: f64,
    pub n: usize,
    pub k_true: usize,
    pub k_pred: usize,
}

struct Contingency {
    n: usize,
    /// `table[i][j]`: vertices in predicted cluster `i` and true cluster `j`.
    table: Vec<Vec<u64>>,
    rows: Vec<u64>,
    cols: Vec<u64>,
}

impl Contingency {
    fn new(pred: &Partition, truth: &Partition) -> Result<Contingency> {
        if pred.len() != truth.len() {
            return Err(Error::LabelMismatch(format!(
                "prediction covers {} vertices, ground truth {}",
                pred.len(),
                truth.len()
            )));
        }
        if pred.is_empty() {
            return Err(Error::LabelMismatch("no vertices to compare".into()));
        }
        let mut table = vec![vec![0u64; truth.k()]; pred.k()];
        for (&a, &b) in pred.assignment().iter().zip(truth.assignment()) {
            table[a][b] += 1;
        }
        let rows = table.iter().map(|r| r.iter().sum()).collect();
        let cols = (0..truth.k()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
        Ok(Contingency {
            n: pred.len(),
            table,
            rows,
            cols,
        })
    }

    fn cells(&self) -> impl Iterator<Item = u64> + '_ {
        self.table.iter().flatten().copied()
    }
}

fn pairs(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn nmi(c: &Contingency) -> f64 {
    let n = c.n as f64;
    let h_pred = entropy(&c.rows, n);
    let h_true = entropy(&c.cols, n);
    if h_pred == 0.0 && h_true == 0.0 {
        return 1.0;
    }
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (c.rows[i] as f64 * c.cols[j] as f64)).ln();
            }
        }
    }
    (mi / ((h_pred + h_true) / 2.0)).clamp(0.0, 1.0)
}

fn purity(c: &Contingency) -> f64 {
    let hits: u64 = c.table.iter().map(|r| r.iter().copied().max().unwrap_or(0)).sum();
    hits as f64 / c.n as f64
}

fn acc(c: &Contingency) -> f64 {
    let size = c.rows.len().max(c.cols.len());
    let square: Vec<Vec<i64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| c.table.get(i).and_then(|r| r.get(j)).map_or(0, |&v| v as i64))
                .collect()
        })
        .collect();
    let weights = Matrix::from_rows(square).expect("square matrix");
    let (matched, _) = kuhn_munkres(&weights);
    matched as f64 / c.n as f64
}

fn ari(c: &Contingency) -> f64 {
    let index: f64 = c.cells().map(pairs).sum();
    let a: f64 = c.rows.iter().copied().map(pairs).sum();
    let b: f64 = c.cols.iter().copied().map(pairs).sum();
    let total = pairs(c.n as u64);
    let expected = if total > 0.0 { a * b / total } else { 0.0 };
    let max = (a + b) / 2.0;
    if max == expected {
        // Both partitions are trivial in the same way (all one cluster or all
        // singletons); they agree exactly.
        return 1.0;
    }
    (index - expected) / (max - expected)
}

fn pair_f1(c: &Contingency) -> f64 {
    let tp: f64 = c.cells().map(pairs).sum();
    let pred_pairs: f64 = c.rows.iter().copied().map(pairs).sum();
    let true_pairs: f64 = c.cols.iter().copied().map(pairs).sum();
    if pred_pairs == 0.0 && true_pairs == 0.0 {
        return 1.0;
    }
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / pred_pairs;
    let recall = tp / true_pairs;
    2.0 * precision * recall / (precision + recall)
}

/// Compares a predicted partition with the ground truth over the same vertices.
pub fn compute_metrics(pred: &Partition, truth: &Partition) -> Result<MetricsReport> {
    let c = Contingency::new(pred, truth)?;
    Ok(MetricsReport {
        nmi: nmi(&c),
        purity: purity(&c),
        acc: acc(&c),
        ari: ari(&c),
        f1: pair_f1(&c),
        n: c.n,
        k_true: truth.k(),
        k_pred: pred.k(),
    })
}

/// Adjusted Rand index alone.
pub fn adjusted_rand_index(pred: &Partition, truth: &Partition) -> Result<f64> {
    Ok(ari(&Contingency::new(pred, truth)?))
}
