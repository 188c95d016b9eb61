//! Exact brute-force k-nearest-neighbor search.
//!
//! Shared by the kNN, LOF and LCP scorers. Deliberately no indexing
//! structure: datasets stay at desk scale and exactness keeps the scorer
//! oracles simple.

use crate::error::{Error, Result};
use crate::linalg::{sq_distance, FeatureMatrix};

/// Neighbors of one query: training-row indices with matching squared
/// Euclidean distances, sorted by (distance, index).
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub indices: Vec<usize>,
    pub sq_distances: Vec<f64>,
}

impl NeighborList {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Exact k nearest training rows to `query`, ties broken by lower index.
///
/// `exclude` skips one training row by index; pass the query's own row
/// index when querying a training point against its own set.
pub fn knn_query(
    train: &FeatureMatrix,
    query: &[f64],
    k: usize,
    exclude: Option<usize>,
) -> Result<NeighborList> {
    if query.len() != train.cols() {
        return Err(Error::DimensionMismatch {
            context: "knn query dimensionality",
            expected: train.cols(),
            got: query.len(),
        });
    }
    let available = train.rows() - usize::from(exclude.is_some());
    if k == 0 || k > available {
        return Err(Error::InvalidParameter(format!(
            "k must be in 1..={available}, got {k}"
        )));
    }
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(available);
    for (i, row) in train.row_iter().enumerate() {
        if exclude == Some(i) {
            continue;
        }
        dists.push((sq_distance(query, row), i));
    }
    // total order: distances are finite by the matrix invariant
    dists.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    dists.truncate(k);
    Ok(NeighborList {
        indices: dists.iter().map(|&(_, i)| i).collect(),
        sq_distances: dists.iter().map(|&(d, _)| d).collect(),
    })
}
