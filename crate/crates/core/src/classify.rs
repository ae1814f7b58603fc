//! Brute-force k-nearest-neighbor classification and evaluation.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{McaError, Result};
use crate::numlin::Matrix;

pub const DEFAULT_NEIGHBORS: usize = 10;

const QUERY_BLOCK: usize = 64;
const POINT_BLOCK: usize = 4096;

#[derive(Debug, Clone)]
pub struct KnnModel {
    points: Matrix,
    labels: Vec<u32>,
    num_neighbors: usize,
    sq_norms: Vec<f64>,
}

impl KnnModel {
    pub fn new(points: Matrix, labels: Vec<u32>, num_neighbors: usize) -> Result<Self> {
        if labels.len() != points.ncols() {
            return Err(McaError::DimensionMismatch {
                context: "k-NN labels",
                expected: points.ncols(),
                found: labels.len(),
            });
        }
        if num_neighbors == 0 || points.ncols() < num_neighbors {
            return Err(McaError::InvalidArgument(format!(
                "k-NN needs at least {num_neighbors} training points, got {}",
                points.ncols()
            )));
        }
        let sq_norms = points.column_iter().map(|c| c.norm_squared()).collect();
        Ok(Self {
            points,
            labels,
            num_neighbors,
            sq_norms,
        })
    }

    pub fn num_neighbors(&self) -> usize {
        self.num_neighbors
    }

    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    /// Majority vote among the nearest training points. Distance ties go to
    /// the lower training index, vote ties to the smaller label.
    pub fn predict(&self, queries: &Matrix) -> Result<Vec<u32>> {
        if queries.nrows() != self.dim() {
            return Err(McaError::DimensionMismatch {
                context: "k-NN query dimension",
                expected: self.dim(),
                found: queries.nrows(),
            });
        }
        let starts: Vec<usize> = (0..queries.ncols()).step_by(QUERY_BLOCK).collect();
        let blocks: Vec<Vec<u32>> = starts
            .par_iter()
            .map(|&start| {
                let width = QUERY_BLOCK.min(queries.ncols() - start);
                self.predict_block(&queries.columns(start, width).into_owned())
            })
            .collect();
        Ok(blocks.into_iter().flatten().collect())
    }

    fn predict_block(&self, queries: &Matrix) -> Vec<u32> {
        let k = self.num_neighbors;
        let m = self.points.ncols();
        let mut best: Vec<Vec<(f64, usize)>> = vec![Vec::with_capacity(k + 1); queries.ncols()];
        let q_norms: Vec<f64> = queries.column_iter().map(|c| c.norm_squared()).collect();
        let mut start = 0;
        while start < m {
            let width = POINT_BLOCK.min(m - start);
            let chunk = self.points.columns(start, width);
            // gram[(i, q)] = <point_{start+i}, query_q>
            let gram = chunk.transpose() * queries;
            for (q, heap) in best.iter_mut().enumerate() {
                for i in 0..width {
                    let dist = self.sq_norms[start + i] + q_norms[q] - 2.0 * gram[(i, q)];
                    insert_candidate(heap, (dist, start + i), k);
                }
            }
            start += width;
        }
        best.iter().map(|heap| self.vote(heap)).collect()
    }

    fn vote(&self, neighbors: &[(f64, usize)]) -> u32 {
        let mut tally: Vec<(u32, usize)> = Vec::with_capacity(neighbors.len());
        for &(_, idx) in neighbors {
            let label = self.labels[idx];
            match tally.iter_mut().find(|(l, _)| *l == label) {
                Some(entry) => entry.1 += 1,
                None => tally.push((label, 1)),
            }
        }
        tally
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(label, _)| label)
            .expect("at least one neighbor")
    }
}

/// Keeps `heap` as the `k` smallest `(distance, index)` pairs, sorted.
fn insert_candidate(heap: &mut Vec<(f64, usize)>, cand: (f64, usize), k: usize) {
    let before = |a: &(f64, usize), b: &(f64, usize)| a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);
    if heap.len() == k && !before(&cand, heap.last().expect("k >= 1")) {
        return;
    }
    let pos = heap
        .iter()
        .position(|x| before(&cand, x))
        .unwrap_or(heap.len());
    heap.insert(pos, cand);
    heap.truncate(k);
}

pub fn knn_predict(model: &KnnModel, queries: &Matrix) -> Result<Vec<u32>> {
    model.predict(queries)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Row-normalized confusion matrix: row = true class, column = predicted.
    pub confusion: Vec<Vec<f64>>,
    /// Raw counts behind `confusion`.
    pub counts: Vec<Vec<usize>>,
    /// Number of test points per true class.
    pub per_class_counts: Vec<usize>,
}

impl EvalReport {
    pub fn from_counts(counts: Vec<Vec<usize>>) -> Self {
        let per_class_counts: Vec<usize> = counts.iter().map(|row| row.iter().sum()).collect();
        let total: usize = per_class_counts.iter().sum();
        let correct: usize = (0..counts.len()).map(|c| counts[c][c]).sum();
        let confusion = counts
            .iter()
            .zip(&per_class_counts)
            .map(|(row, &n)| {
                row.iter()
                    .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
                    .collect()
            })
            .collect();
        Self {
            accuracy: if total == 0 {
                0.0
            } else {
                correct as f64 / total as f64
            },
            confusion,
            counts,
            per_class_counts,
        }
    }

    /// Pools the raw counts of several reports over the same classes.
    pub fn pooled<'a>(reports: impl IntoIterator<Item = &'a EvalReport>) -> Option<Self> {
        let mut acc: Option<Vec<Vec<usize>>> = None;
        for r in reports {
            match acc.as_mut() {
                None => acc = Some(r.counts.clone()),
                Some(sum) => {
                    for (row, other) in sum.iter_mut().zip(&r.counts) {
                        for (a, b) in row.iter_mut().zip(other) {
                            *a += b;
                        }
                    }
                }
            }
        }
        acc.map(Self::from_counts)
    }

    pub fn write_confusion_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let c = self.confusion.len();
        let header: Vec<String> = (0..c).map(|j| format!("pred_{j}")).collect();
        writeln!(out, "true,{}", header.join(","))?;
        for (i, row) in self.confusion.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{i},{}", cells.join(","))?;
        }
        Ok(())
    }
}

pub fn evaluate(pred: &[u32], truth: &[u32], num_classes: usize) -> Result<EvalReport> {
    if pred.len() != truth.len() {
        return Err(McaError::DimensionMismatch {
            context: "predictions vs truth",
            expected: truth.len(),
            found: pred.len(),
        });
    }
    let mut counts = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        for label in [p, t] {
            if label as usize >= num_classes {
                return Err(McaError::LabelOutOfRange { label, num_classes });
            }
        }
        counts[t as usize][p as usize] += 1;
    }
    Ok(EvalReport::from_counts(counts))
}
