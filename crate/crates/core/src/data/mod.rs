//! Dataset representation, CSV ingestion, stratified splitting, subsampling
//! and synthetic benchmark generators.

mod csv_io;
mod split;
mod synthetic;

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, FeatureSet, Result};

pub use csv_io::{load_csv, read_csv, write_csv, BlockSpec};
pub use split::{stratified_split, stratified_split_indices, subsample, subsample_indices};
pub use synthetic::{
    additive_response, gen_additive, gen_blocked, gen_nonadditive, nonadditive_response,
    threshold_label, BlockedParams, Synthetic,
};

/// Binary membership of features in contextual blocks (a `W x N` matrix),
/// stored as member lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMatrix {
    names: Vec<String>,
    members: Vec<Vec<usize>>,
    n_features: usize,
}

impl BlockMatrix {
    pub fn new(names: Vec<String>, members: Vec<Vec<usize>>, n_features: usize) -> Result<Self> {
        if names.len() != members.len() {
            return Err(Error::DimensionMismatch {
                expected: members.len(),
                found: names.len(),
            });
        }
        let mut members = members;
        for m in &mut members {
            if let Some(&bad) = m.iter().find(|&&i| i >= n_features) {
                return Err(Error::invalid(format!(
                    "block member {bad} out of range for {n_features} features"
                )));
            }
            m.sort_unstable();
            m.dedup();
        }
        Ok(BlockMatrix {
            names,
            members,
            n_features,
        })
    }

    /// Build from dense 0/1 rows; every row must have the same length.
    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut members = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            let mut m = Vec::new();
            for (i, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => m.push(i),
                    other => {
                        return Err(Error::invalid(format!(
                            "block matrix entries must be 0 or 1, found {other}"
                        )))
                    }
                }
            }
            members.push(m);
        }
        let names = (1..=rows.len()).map(|w| format!("block{w}")).collect();
        Self::new(names, members, n)
    }

    pub fn identity(n: usize) -> Self {
        BlockMatrix {
            names: (1..=n).map(|w| format!("block{w}")).collect(),
            members: (0..n).map(|i| vec![i]).collect(),
            n_features: n,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        self.members
            .iter()
            .map(|m| {
                let mut row = vec![0u8; self.n_features];
                for &i in m {
                    row[i] = 1;
                }
                row
            })
            .collect()
    }

    pub fn n_blocks(&self) -> usize {
        self.members.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn members(&self, block: usize) -> &[usize] {
        &self.members[block]
    }

    pub fn block_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Block `w` is selected iff at least one of its members is selected.
    pub fn block_selection(&self, delta: &FeatureSet) -> Vec<bool> {
        self.members
            .iter()
            .map(|m| m.iter().any(|&i| delta.get(i)))
            .collect()
    }

    /// Number of blocks each feature belongs to (column sums of B).
    pub fn column_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.n_features];
        for m in &self.members {
            for &i in m {
                sums[i] += 1;
            }
        }
        sums
    }
}

/// Indices of features known to be relevant by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    relevant: BTreeSet<usize>,
}

impl GroundTruth {
    pub fn new(n_features: usize, relevant: impl IntoIterator<Item = usize>) -> Result<Self> {
        let relevant: BTreeSet<usize> = relevant.into_iter().collect();
        if let Some(&bad) = relevant.iter().find(|&&i| i >= n_features) {
            return Err(Error::invalid(format!(
                "relevant index {bad} out of range for {n_features} features"
            )));
        }
        Ok(GroundTruth { relevant })
    }

    pub fn relevant(&self) -> &BTreeSet<usize> {
        &self.relevant
    }

    pub fn len(&self) -> usize {
        self.relevant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevant.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.relevant.contains(&i)
    }
}

/// Numeric feature matrix (rows are samples) with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<i64>,
    feature_names: Vec<String>,
    block_matrix: Option<BlockMatrix>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<i64>,
        feature_names: Vec<String>,
        block_matrix: Option<BlockMatrix>,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: features.ncols(),
                found: feature_names.len(),
            });
        }
        if let Some(b) = &block_matrix {
            if b.n_features() != features.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: features.ncols(),
                    found: b.n_features(),
                });
            }
        }
        Ok(Dataset {
            features,
            labels,
            feature_names,
            block_matrix,
        })
    }

    /// Dataset with generated names `x1..xN` and no blocks.
    pub fn from_matrix(features: Array2<f64>, labels: Vec<i64>) -> Result<Self> {
        let names = default_feature_names(features.ncols());
        Self::new(features, labels, names, None)
    }

    pub fn with_block_matrix(mut self, blocks: BlockMatrix) -> Result<Self> {
        if blocks.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: blocks.n_features(),
            });
        }
        self.block_matrix = Some(blocks);
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.features.column(j)
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn block_matrix(&self) -> Option<&BlockMatrix> {
        self.block_matrix.as_ref()
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<i64> {
        let set: BTreeSet<i64> = self.labels.iter().copied().collect();
        set.into_iter().collect()
    }

    /// Labels re-encoded as `0..C` following the order of [`Dataset::classes`].
    pub fn encoded_labels(&self) -> (Vec<usize>, usize) {
        let classes = self.classes();
        let codes = self
            .labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label present"))
            .collect();
        (codes, classes.len())
    }

    pub(crate) fn require_classes(&self) -> Result<()> {
        let c = self.classes().len();
        if c < 2 {
            return Err(Error::SingleClass(c));
        }
        Ok(())
    }

    /// New dataset made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            feature_names: self.feature_names.clone(),
            block_matrix: self.block_matrix.clone(),
        }
    }
}

pub(crate) fn default_feature_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}
