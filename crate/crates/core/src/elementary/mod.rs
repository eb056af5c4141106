//! Elementary feature selectors and the ensemble loop producing the
//! per-feature vote counts.

mod fisher;
mod mrmr;
mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{subsample, Dataset};
use crate::rng::derive_seed;
use crate::{Error, FeatureSet, Result};

pub use fisher::{fisher_scores, fisher_select};
pub use mrmr::{equal_frequency_bins, mrmr_select, mutual_information};
pub use tree::{tree_importances, tree_select, TreeParams};

fn default_bins() -> usize {
    5
}

/// Which elementary selector the ensemble is made of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum ElementarySelectorKind {
    Mrmr {
        #[serde(default = "default_bins")]
        bins: usize,
    },
    #[default]
    Fisher,
    Tree {
        #[serde(default = "TreeParams::default_max_depth")]
        max_depth: usize,
        #[serde(default = "TreeParams::default_min_leaf")]
        min_leaf: usize,
    },
}


impl ElementarySelectorKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ElementarySelectorKind::Mrmr { bins } if bins < 2 => {
                Err(Error::invalid(format!("mrmr bins must be >= 2, got {bins}")))
            }
            ElementarySelectorKind::Tree { max_depth, min_leaf } if max_depth < 1 || min_leaf < 1 => {
                Err(Error::invalid("tree max_depth and min_leaf must be >= 1"))
            }
            _ => Ok(()),
        }
    }

    /// Run this selector once for `l` features.
    pub fn select(&self, d: &Dataset, l: usize, seed: u64) -> Result<FeatureSet> {
        self.validate()?;
        match *self {
            ElementarySelectorKind::Mrmr { bins } => mrmr_select(d, l, bins),
            ElementarySelectorKind::Fisher => fisher_select(d, l),
            ElementarySelectorKind::Tree { max_depth, min_leaf } => {
                tree_select(d, l, &TreeParams { max_depth, min_leaf }, seed)
            }
        }
    }
}

/// Ensemble size `M`, features per model `l`, and the row fraction each
/// model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub models: usize,
    pub features_per_model: usize,
    pub subsample_fraction: f64,
    pub seed: u64,
}

impl EnsembleConfig {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.models < 1 {
            return Err(Error::invalid("ensemble needs at least one model"));
        }
        if self.features_per_model < 1 || self.features_per_model > n_features {
            return Err(Error::invalid(format!(
                "features_per_model must lie in 1..={n_features}, got {}",
                self.features_per_model
            )));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "subsample_fraction must lie in (0, 1], got {}",
                self.subsample_fraction
            )));
        }
        Ok(())
    }
}

/// Per-feature selection counts over `models` elementary models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCounts {
    pub counts: Vec<u32>,
    pub models: usize,
}

impl FeatureCounts {
    pub fn zeros(n: usize, models: usize) -> Self {
        FeatureCounts {
            counts: vec![0; n],
            models,
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| f64::from(c)).collect()
    }

    fn add(&mut self, delta: &FeatureSet) {
        for i in delta.iter_selected() {
            self.counts[i] += 1;
        }
    }
}

/// Train `M` selectors on stratified subsamples and sum their votes.
/// Model `m` draws its rows and any selector randomness from a seed derived
/// from `(cfg.seed, m)`, so the result does not depend on scheduling.
pub fn run_ensemble(d: &Dataset, kind: &ElementarySelectorKind, cfg: &EnsembleConfig) -> Result<FeatureCounts> {
    kind.validate()?;
    cfg.validate(d.n_features())?;
    let selections = (0..cfg.models)
        .into_par_iter()
        .map(|m| {
            let model_seed = derive_seed(cfg.seed, m as u64);
            let part = subsample(d, cfg.subsample_fraction, derive_seed(model_seed, 0))?;
            kind.select(&part, cfg.features_per_model, derive_seed(model_seed, 1))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts = FeatureCounts::zeros(d.n_features(), cfg.models);
    for s in &selections {
        counts.add(s);
    }
    Ok(counts)
}

/// Indices of the `l` largest scores; equal scores go to the lower index.
pub(crate) fn top_l(scores: &[f64], l: usize) -> FeatureSet {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    FeatureSet::from_indices(scores.len(), &order[..l.min(scores.len())])
}

pub(crate) fn check_l(d: &Dataset, l: usize) -> Result<()> {
    if l > d.n_features() {
        return Err(Error::invalid(format!(
            "cannot select {l} of {} features",
            d.n_features()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_additive;

    #[test]
    fn top_l_tie_break() {
        assert_eq!(top_l(&[1.0, 3.0, 3.0, 0.5], 2).indices(), vec![1, 2]);
        assert_eq!(top_l(&[0.0; 4], 2).indices(), vec![0, 1]);
    }

    #[test]
    fn single_model_equals_its_selection() {
        let s = gen_additive(120, 12, 3).unwrap();
        let cfg = EnsembleConfig {
            models: 1,
            features_per_model: 3,
            subsample_fraction: 0.75,
            seed: 17,
        };
        let counts = run_ensemble(&s.dataset, &ElementarySelectorKind::Fisher, &cfg).unwrap();
        let ms = derive_seed(17, 0);
        let part = subsample(&s.dataset, 0.75, derive_seed(ms, 0)).unwrap();
        let single = fisher_select(&part, 3).unwrap();
        let expected: Vec<u32> = single.bits().iter().map(|&b| u32::from(b)).collect();
        assert_eq!(counts.counts, expected);
    }

    #[test]
    fn counts_are_bounded_and_sum_to_m_l() {
        let s = gen_additive(100, 15, 8).unwrap();
        for kind in [
            ElementarySelectorKind::Fisher,
            ElementarySelectorKind::Mrmr { bins: 5 },
            ElementarySelectorKind::Tree {
                max_depth: 4,
                min_leaf: 2,
            },
        ] {
            let cfg = EnsembleConfig {
                models: 12,
                features_per_model: 4,
                subsample_fraction: 0.75,
                seed: 5,
            };
            let counts = run_ensemble(&s.dataset, &kind, &cfg).unwrap();
            assert_eq!(counts.total(), 12 * 4);
            assert!(counts.counts.iter().all(|&c| c <= 12));
            assert_eq!(counts, run_ensemble(&s.dataset, &kind, &cfg).unwrap());
        }
    }

    #[test]
    fn fisher_ensemble_finds_additive_signal() {
        let s = gen_additive(250, 60, 21).unwrap();
        let cfg = EnsembleConfig {
            models: 100,
            features_per_model: 4,
            subsample_fraction: 0.75,
            seed: 2,
        };
        let counts = run_ensemble(&s.dataset, &ElementarySelectorKind::Fisher, &cfg).unwrap();
        let relevant: u32 = counts.counts[..4].iter().sum();
        let mut noise: Vec<u32> = counts.counts[4..].to_vec();
        noise.sort_unstable_by(|a, b| b.cmp(a));
        let top_noise: u32 = noise[..4].iter().sum();
        assert!(relevant > top_noise, "relevant {relevant} vs noise {top_noise}");
    }

    #[test]
    fn invalid_configs() {
        let s = gen_additive(40, 5, 1).unwrap();
        let mut cfg = EnsembleConfig {
            models: 0,
            features_per_model: 2,
            subsample_fraction: 0.5,
            seed: 0,
        };
        assert!(run_ensemble(&s.dataset, &ElementarySelectorKind::Fisher, &cfg).is_err());
        cfg.models = 2;
        cfg.features_per_model = 6;
        assert!(run_ensemble(&s.dataset, &ElementarySelectorKind::Fisher, &cfg).is_err());
        cfg.features_per_model = 2;
        assert!(run_ensemble(&s.dataset, &ElementarySelectorKind::Mrmr { bins: 1 }, &cfg).is_err());
    }

    #[test]
    fn selector_kind_serde() {
        let k: ElementarySelectorKind = serde_json::from_str(r#"{"kind":"mrmr"}"#).unwrap();
        assert_eq!(k, ElementarySelectorKind::Mrmr { bins: 5 });
        let k: ElementarySelectorKind = serde_json::from_str(r#"{"kind":"tree","max_depth":3}"#).unwrap();
        assert_eq!(
            k,
            ElementarySelectorKind::Tree {
                max_depth: 3,
                min_leaf: TreeParams::default_min_leaf()
            }
        );
    }
}
