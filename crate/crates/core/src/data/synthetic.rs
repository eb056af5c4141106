//! Synthetic classification benchmarks with known relevant features.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{default_feature_names, BlockMatrix, Dataset, GroundTruth};
use crate::rng::{rng_from_seed, Rng};
use crate::{Error, Result};

/// A generated dataset with its ground truth. `epsilon` holds the per-row
/// label noise for the additive and non-additive models.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub truth: GroundTruth,
    pub epsilon: Option<Vec<f64>>,
}

/// Class assignment `g(z) = 1` if `z >= 0`, else 0.
pub fn threshold_label(z: f64) -> i64 {
    i64::from(z >= 0.0)
}

/// `-2 sin(2 x1) + x2^2 + x3 + exp(-x4) + eps` for a row `x`.
pub fn additive_response(x: &[f64], eps: f64) -> f64 {
    -2.0 * (2.0 * x[0]).sin() + x[1] * x[1] + x[2] + (-x[3]).exp() + eps
}

/// `x1 * exp(2 x2) + x3^2 + eps` for a row `x`.
pub fn nonadditive_response(x: &[f64], eps: f64) -> f64 {
    x[0] * (2.0 * x[1]).exp() + x[2] * x[2] + eps
}

fn gaussian_model(
    n_rows: usize,
    n_features: usize,
    n_relevant: usize,
    seed: u64,
    response: fn(&[f64], f64) -> f64,
) -> Result<Synthetic> {
    if n_features < n_relevant {
        return Err(Error::invalid(format!(
            "need at least {n_relevant} features, got {n_features}"
        )));
    }
    if n_rows == 0 {
        return Err(Error::invalid("n_rows must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let features =
        Array2::from_shape_simple_fn((n_rows, n_features), || rng.sample::<f64, _>(StandardNormal));
    let epsilon: Vec<f64> = (0..n_rows).map(|_| rng.sample(StandardNormal)).collect();
    let labels = features
        .rows()
        .into_iter()
        .zip(&epsilon)
        .map(|(row, &e)| {
            let x: Vec<f64> = row.iter().take(n_relevant).copied().collect();
            threshold_label(response(&x, e))
        })
        .collect();
    let dataset = Dataset::from_matrix(features, labels)?;
    Ok(Synthetic {
        dataset,
        truth: GroundTruth::new(n_features, 0..n_relevant)?,
        epsilon: Some(epsilon),
    })
}

/// Standard normal features; the label depends additively on features 1-4.
pub fn gen_additive(n_rows: usize, n_features: usize, seed: u64) -> Result<Synthetic> {
    gaussian_model(n_rows, n_features, 4, seed, additive_response)
}

/// Standard normal features; the label depends on features 1-3 through an
/// interaction term.
pub fn gen_nonadditive(n_rows: usize, n_features: usize, seed: u64) -> Result<Synthetic> {
    gaussian_model(n_rows, n_features, 3, seed, nonadditive_response)
}

/// Parameters of the block-structured generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockedParams {
    pub n_rows: usize,
    pub n_blocks: usize,
    pub block_size: usize,
    pub relevant_blocks: usize,
    pub informative_per_block: usize,
    pub redundant_blocks: usize,
    pub redundant_per_block: usize,
}

impl Default for BlockedParams {
    fn default() -> Self {
        BlockedParams {
            n_rows: 512,
            n_blocks: 8,
            block_size: 32,
            relevant_blocks: 4,
            informative_per_block: 4,
            redundant_blocks: 2,
            redundant_per_block: 3,
        }
    }
}

const REDUNDANT_NOISE_STD: f64 = 0.05;

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Informative,
    Redundant,
    Noise,
}

/// Block-structured two-class data.
///
/// Relevant blocks are the first `relevant_blocks` blocks, redundant blocks
/// the last `redundant_blocks`; a block may be both when the two ranges
/// overlap. Informative features are drawn around the class centroids `+v`
/// and `-v` for a random sign vector `v` (unit variance); redundant features
/// are random linear combinations of the informative ones (weights uniform
/// in `[-1, 1]`) plus N(0, 0.05^2) noise; everything else is standard normal
/// noise. Roles are shuffled within each block.
pub fn gen_blocked(p: &BlockedParams, seed: u64) -> Result<Synthetic> {
    let counts = [
        p.n_rows,
        p.n_blocks,
        p.block_size,
        p.relevant_blocks,
        p.informative_per_block,
        p.redundant_blocks,
        p.redundant_per_block,
    ];
    if counts.contains(&0) {
        return Err(Error::invalid("all blocked generator counts must be positive"));
    }
    if p.relevant_blocks > p.n_blocks || p.redundant_blocks > p.n_blocks {
        return Err(Error::invalid(format!(
            "{} relevant and {} redundant blocks do not fit into {} blocks",
            p.relevant_blocks, p.redundant_blocks, p.n_blocks
        )));
    }
    let is_relevant = |w: usize| w < p.relevant_blocks;
    let is_redundant = |w: usize| w >= p.n_blocks - p.redundant_blocks;
    for w in 0..p.n_blocks {
        let used = usize::from(is_relevant(w)) * p.informative_per_block
            + usize::from(is_redundant(w)) * p.redundant_per_block;
        if used > p.block_size {
            return Err(Error::invalid(format!(
                "block {} needs {used} designated features but holds only {}",
                w + 1,
                p.block_size
            )));
        }
    }

    let mut rng = rng_from_seed(seed);
    let n = p.n_blocks * p.block_size;
    let mut roles = Vec::with_capacity(n);
    let mut members = Vec::with_capacity(p.n_blocks);
    for w in 0..p.n_blocks {
        let mut block = Vec::with_capacity(p.block_size);
        if is_relevant(w) {
            block.extend(std::iter::repeat_n(Role::Informative, p.informative_per_block));
        }
        if is_redundant(w) {
            block.extend(std::iter::repeat_n(Role::Redundant, p.redundant_per_block));
        }
        block.resize(p.block_size, Role::Noise);
        block.shuffle(&mut rng);
        roles.extend(block);
        members.push((w * p.block_size..(w + 1) * p.block_size).collect());
    }
    let informative: Vec<usize> = (0..n).filter(|&i| roles[i] == Role::Informative).collect();
    let redundant: Vec<usize> = (0..n).filter(|&i| roles[i] == Role::Redundant).collect();

    let mut labels: Vec<i64> = (0..p.n_rows).map(|r| i64::from(r >= p.n_rows / 2)).collect();
    labels.shuffle(&mut rng);
    let centroid: Vec<f64> = informative
        .iter()
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let weights: Vec<Vec<f64>> = redundant
        .iter()
        .map(|_| {
            informative
                .iter()
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect()
        })
        .collect();

    let mut features = Array2::zeros((p.n_rows, n));
    for (r, &label) in labels.iter().enumerate() {
        let sign = if label == 1 { 1.0 } else { -1.0 };
        let inf_values: Vec<f64> = centroid
            .iter()
            .map(|&c| sign * c + normal(&mut rng))
            .collect();
        for (&j, &v) in informative.iter().zip(&inf_values) {
            features[[r, j]] = v;
        }
        for (&j, w) in redundant.iter().zip(&weights) {
            let combo: f64 = w.iter().zip(&inf_values).map(|(a, b)| a * b).sum();
            features[[r, j]] = combo + REDUNDANT_NOISE_STD * normal(&mut rng);
        }
        for j in (0..n).filter(|&j| roles[j] == Role::Noise) {
            features[[r, j]] = normal(&mut rng);
        }
    }

    let names = (1..=p.n_blocks).map(|w| format!("block{w}")).collect();
    let blocks = BlockMatrix::new(names, members, n)?;
    let dataset = Dataset::new(features, labels, default_feature_names(n), Some(blocks))?;
    Ok(Synthetic {
        dataset,
        truth: GroundTruth::new(n, informative)?,
        epsilon: None,
    })
}

fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}
