//! Matching sets between a conventional training set (domain 1) and a small
//! example set (domain 2). Each example point is paired with `r` training
//! points, so MCA receives `n·r` matched columns.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index;
use rayon::prelude::*;

use crate::error::{McaError, Result};
use crate::numlin::Matrix;
use crate::rng::seeded;

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub data: Matrix,
    pub labels: Vec<u32>,
}

impl LabeledDataset {
    pub fn new(data: Matrix, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != data.ncols() {
            return Err(McaError::DimensionMismatch {
                context: "labels per column",
                expected: data.ncols(),
                found: labels.len(),
            });
        }
        Ok(Self { data, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            data: self.data.select_columns(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair {
    pub example: usize,
    pub train: usize,
    /// Position of this training point among the `r` matches of the example.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingSet {
    /// Sorted by `(example, rank)`.
    pub pairs: Vec<Pair>,
    pub r: usize,
    pub n: usize,
}

impl MatchingSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// CSV with header `example_index,train_index,rank`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "example_index,train_index,rank")?;
        for p in &self.pairs {
            writeln!(out, "{},{},{}", p.example, p.train, p.rank)?;
        }
        Ok(())
    }
}

fn candidates_by_label(
    train: &LabeledDataset,
    examples: &LabeledDataset,
    r: usize,
) -> Result<BTreeMap<u32, Vec<usize>>> {
    if r == 0 {
        return Err(McaError::InvalidArgument(
            "replication r must be at least 1".into(),
        ));
    }
    let mut by_label: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &label) in train.labels.iter().enumerate() {
        by_label.entry(label).or_default().push(i);
    }
    for &label in &examples.labels {
        match by_label.get(&label) {
            None => return Err(McaError::LabelAbsent(label)),
            Some(c) if c.len() < r => {
                return Err(McaError::TooFewCandidates {
                    label,
                    needed: r,
                    available: c.len(),
                })
            }
            Some(_) => {}
        }
    }
    Ok(by_label)
}

fn squared_distance(a: nalgebra::DVectorView<'_, f64>, b: nalgebra::DVectorView<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// For each example, the `r` same-label training points closest in Euclidean
/// distance; ties go to the lower training index.
pub fn match_nn(
    train: &LabeledDataset,
    examples: &LabeledDataset,
    r: usize,
) -> Result<MatchingSet> {
    if train.dim() != examples.dim() {
        return Err(McaError::DimensionMismatch {
            context: "nearest-neighbor matching",
            expected: train.dim(),
            found: examples.dim(),
        });
    }
    let by_label = candidates_by_label(train, examples, r)?;
    let pairs: Vec<Pair> = (0..examples.len())
        .into_par_iter()
        .flat_map_iter(|e| {
            let query = examples.data.column(e);
            let mut scored: Vec<(f64, usize)> = by_label[&examples.labels[e]]
                .iter()
                .map(|&t| (squared_distance(train.data.column(t), query), t))
                .collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            scored
                .into_iter()
                .take(r)
                .enumerate()
                .map(move |(rank, (_, train))| Pair {
                    example: e,
                    train,
                    rank,
                })
        })
        .collect();
    Ok(MatchingSet {
        pairs,
        r,
        n: examples.len(),
    })
}

/// For each example, `r` same-label training points drawn uniformly without
/// replacement. Example `e` uses its own stream derived from `(seed, e)`.
pub fn match_random_label(
    train: &LabeledDataset,
    examples: &LabeledDataset,
    r: usize,
    seed: u64,
) -> Result<MatchingSet> {
    let by_label = candidates_by_label(train, examples, r)?;
    let mut pairs = Vec::with_capacity(examples.len() * r);
    for (e, label) in examples.labels.iter().enumerate() {
        let candidates = &by_label[label];
        let mut rng = seeded(seed, e as u64);
        for (rank, pick) in index::sample(&mut rng, candidates.len(), r)
            .into_iter()
            .enumerate()
        {
            pairs.push(Pair {
                example: e,
                train: candidates[pick],
                rank,
            });
        }
    }
    Ok(MatchingSet {
        pairs,
        r,
        n: examples.len(),
    })
}

/// Identity pairing `j ↔ j` for index-aligned datasets.
pub fn match_source(n_pairs: usize) -> MatchingSet {
    MatchingSet {
        pairs: (0..n_pairs)
            .map(|j| Pair {
                example: j,
                train: j,
                rank: 0,
            })
            .collect(),
        r: 1,
        n: n_pairs,
    }
}

/// Materializes the matched columns: column `t` of the first matrix is the
/// training point of pair `t`, column `t` of the second its example point.
pub fn gather(
    ms: &MatchingSet,
    train: &LabeledDataset,
    examples: &LabeledDataset,
) -> Result<(Matrix, Matrix)> {
    let mut train_idx = Vec::with_capacity(ms.len());
    let mut example_idx = Vec::with_capacity(ms.len());
    for p in &ms.pairs {
        if p.train >= train.len() {
            return Err(McaError::IndexOutOfRange {
                context: "training set",
                index: p.train,
                len: train.len(),
            });
        }
        if p.example >= examples.len() {
            return Err(McaError::IndexOutOfRange {
                context: "example set",
                index: p.example,
                len: examples.len(),
            });
        }
        train_idx.push(p.train);
        example_idx.push(p.example);
    }
    Ok((
        train.data.select_columns(&train_idx),
        examples.data.select_columns(&example_idx),
    ))
}
