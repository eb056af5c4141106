//! Utility and risk of a feature set, the probabilistic initialization
//! sampler, the genetic algorithm, an exhaustive oracle, and the end-to-end
//! selection pipeline.

use std::cmp::Ordering;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{default_max_size, ConstraintSystem};
use crate::data::Dataset;
use crate::elementary::{run_ensemble, ElementarySelectorKind, EnsembleConfig, FeatureCounts};
use crate::prior::{expected_importance, Family, ImportanceEstimate, MhSettings, PosteriorModel, PriorSpec};
use crate::rng::{derive_seed, rng_from_seed, streams};
use crate::{Error, FeatureSet, Result};

/// Largest dimension accepted by [`brute_force`].
pub const BRUTE_FORCE_LIMIT: usize = 20;

/// `δᵀθ̂ + λκ(δ)`.
pub fn utility(delta: &FeatureSet, theta: &[f64], sys: &ConstraintSystem) -> f64 {
    delta.dot(theta) + sys.lambda() * sys.joint_admissibility(delta)
}

/// `(1 − δ)ᵀθ̂ + λ(1 − κ(δ))`. Equals `1 + λ − utility` when `θ̂` sums to one.
pub fn risk(delta: &FeatureSet, theta: &[f64], sys: &ConstraintSystem) -> f64 {
    let residual: f64 = theta
        .iter()
        .zip(delta.bits())
        .filter(|(_, &b)| !b)
        .map(|(t, _)| t)
        .sum();
    residual + sys.lambda() * (1.0 - sys.joint_admissibility(delta))
}

fn check_dims(sys: &ConstraintSystem, n: usize) -> Result<()> {
    if sys.n_features() != n {
        return Err(Error::DimensionMismatch {
            expected: sys.n_features(),
            found: n,
        });
    }
    Ok(())
}

/// Draws `q` feature sets. Each starts empty and visits the features in a
/// random order drawn without replacement with probabilities proportional to
/// `weights`; adding feature `i` is accepted when a uniform `u ∈ (0, 1]`
/// satisfies `u ≤ κ(δ ∪ {i}) / κ(δ)`.
pub fn alg1_sample(weights: &[f64], sys: &ConstraintSystem, q: usize, seed: u64) -> Result<Vec<FeatureSet>> {
    let n = weights.len();
    check_dims(sys, n)?;
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::invalid(format!("sampling weights must be nonnegative, got {w}")));
    }
    let empty = FeatureSet::empty(n);
    let kappa_empty = sys.joint_admissibility(&empty);
    if kappa_empty <= 0.0 {
        return Err(Error::InadmissibleStart);
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(q);
    for _ in 0..q {
        // Efraimidis-Spirakis keys: sorting ln(u)/w descending yields a
        // weighted permutation; zero weights go last.
        let mut keys: Vec<(f64, usize)> = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let u: f64 = 1.0 - rng.random::<f64>();
                let key = if w > 0.0 { u.ln() / w } else { f64::NEG_INFINITY };
                (key, i)
            })
            .collect();
        keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut delta = empty.clone();
        let mut kappa = kappa_empty;
        for (_, i) in keys {
            delta.set(i, true);
            let cand = sys.joint_admissibility(&delta);
            let u: f64 = 1.0 - rng.random::<f64>();
            if u <= cand / kappa {
                kappa = cand;
            } else {
                delta.set(i, false);
            }
        }
        out.push(delta);
    }
    Ok(out)
}

/// Genetic algorithm settings without a seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaSettings {
    pub population: usize,
    pub generations: usize,
    /// Probability that a child has one uniformly chosen bit flipped.
    pub mutation_rate: f64,
    pub elite_fraction: f64,
}

impl Default for GaSettings {
    fn default() -> Self {
        GaSettings {
            population: 100,
            generations: 100,
            mutation_rate: 0.1,
            elite_fraction: 0.05,
        }
    }
}

impl GaSettings {
    pub fn with_seed(self, seed: u64) -> GaConfig {
        GaConfig {
            population: self.population,
            generations: self.generations,
            mutation_rate: self.mutation_rate,
            elite_fraction: self.elite_fraction,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.with_seed(0).validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    pub elite_fraction: f64,
    pub seed: u64,
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::invalid(format!("population must be >= 2, got {}", self.population)));
        }
        if self.generations < 1 {
            return Err(Error::invalid("generations must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::invalid(format!(
                "mutation_rate must lie in [0, 1], got {}",
                self.mutation_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.elite_fraction) {
            return Err(Error::invalid(format!(
                "elite_fraction must lie in [0, 1], got {}",
                self.elite_fraction
            )));
        }
        Ok(())
    }

    fn n_elite(&self) -> usize {
        ((self.elite_fraction * self.population as f64).ceil() as usize).clamp(1, self.population)
    }
}

/// Best feature set found by an optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub delta: FeatureSet,
    pub utility: f64,
}

/// GA result with the best-ever utility after each generation (index 0 is
/// the initial population).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaOutcome {
    pub best: Optimum,
    pub trace: Vec<f64>,
}

/// Higher utility first, then the tie-break order of [`FeatureSet`].
fn rank(a: &Optimum, b: &Optimum) -> Ordering {
    b.utility
        .total_cmp(&a.utility)
        .then_with(|| a.delta.tie_break(&b.delta))
}

fn evaluate(pop: Vec<FeatureSet>, theta: &[f64], sys: &ConstraintSystem) -> Vec<Optimum> {
    let mut scored: Vec<Optimum> = pop
        .into_par_iter()
        .map(|delta| Optimum {
            utility: utility(&delta, theta, sys),
            delta,
        })
        .collect();
    scored.sort_by(rank);
    scored
}

/// Maximizes the utility starting from `init`. Parents are drawn with
/// probability proportional to their rank (best gets weight `Q`), children
/// take each bit from either parent with equal probability, and with
/// probability `mutation_rate` one random bit of the child is flipped. The top `ceil(elite_fraction·Q)`
/// individuals survive unchanged.
pub fn ga_optimize(
    theta: &[f64],
    sys: &ConstraintSystem,
    cfg: &GaConfig,
    init: Vec<FeatureSet>,
) -> Result<GaOutcome> {
    cfg.validate()?;
    check_dims(sys, theta.len())?;
    if init.is_empty() {
        return Err(Error::invalid("the initial population is empty"));
    }
    if let Some(bad) = init.iter().find(|d| d.len() != theta.len()) {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            found: bad.len(),
        });
    }
    let n = theta.len();
    let q = cfg.population;
    let mut rng = rng_from_seed(cfg.seed);
    // Pad or trim the initial population to Q by cycling.
    let pop: Vec<FeatureSet> = init.iter().cycle().take(q).cloned().collect();
    let mut scored = evaluate(pop, theta, sys);
    let mut best = scored[0].clone();
    let mut trace = vec![best.utility];
    let parents = WeightedIndex::new((1..=q).rev()).expect("positive rank weights");
    let n_elite = cfg.n_elite();

    for _ in 0..cfg.generations {
        let mut next: Vec<FeatureSet> = scored[..n_elite].iter().map(|o| o.delta.clone()).collect();
        while next.len() < q {
            let a = &scored[parents.sample(&mut rng)].delta;
            let b = &scored[parents.sample(&mut rng)].delta;
            let bits = (0..n)
                .map(|i| if rng.random::<bool>() { a.get(i) } else { b.get(i) })
                .collect();
            let mut child = FeatureSet::from_bits(bits);
            if cfg.mutation_rate > 0.0 && rng.random::<f64>() < cfg.mutation_rate {
                child.flip(rng.random_range(0..n));
            }
            next.push(child);
        }
        scored = evaluate(next, theta, sys);
        if rank(&scored[0], &best) == Ordering::Less {
            best = scored[0].clone();
        }
        trace.push(best.utility);
    }
    Ok(GaOutcome { best, trace })
}

/// Exhaustive maximization over all `2^N` feature sets, ties resolved by
/// the [`FeatureSet`] tie-break order.
pub fn brute_force(theta: &[f64], sys: &ConstraintSystem) -> Result<Optimum> {
    let n = theta.len();
    check_dims(sys, n)?;
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::Intractable {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let best = (0..1u64 << n)
        .into_par_iter()
        .map(|mask| {
            let delta = FeatureSet::from_mask(n, mask);
            Optimum {
                utility: utility(&delta, theta, sys),
                delta,
            }
        })
        .min_by(rank)
        .expect("at least the empty set");
    Ok(best)
}

/// Ensemble size and per-model feature count. `features_per_model = None`
/// uses the max-size bound of the constraint system, or the size rule when
/// there is none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSettings {
    pub models: usize,
    pub features_per_model: Option<usize>,
    pub subsample_fraction: f64,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        EnsembleSettings {
            models: 100,
            features_per_model: None,
            subsample_fraction: 0.75,
        }
    }
}

impl EnsembleSettings {
    /// An explicit `features_per_model` is returned as is, for validation by
    /// the caller.
    pub fn resolve_l(&self, sys: &ConstraintSystem) -> usize {
        let n = sys.n_features();
        self.features_per_model.unwrap_or_else(|| {
            sys.max_size_bound()
                .map(|b| b.floor().max(1.0) as usize)
                .unwrap_or_else(|| default_max_size(n))
                .min(n)
        })
    }
}

/// Everything the selection pipeline needs apart from the data, the
/// constraints and the seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub selector: ElementarySelectorKind,
    pub ensemble: EnsembleSettings,
    pub prior: PriorSpec,
    pub ga: GaSettings,
    pub mh: MhSettings,
}

/// Output of [`select_features`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub selected: FeatureSet,
    pub utility: f64,
    pub risk: f64,
    pub kappa: f64,
    pub features_per_model: usize,
    pub counts: FeatureCounts,
    pub posterior: PosteriorModel,
    pub importance: ImportanceEstimate,
    pub ga_trace: Vec<f64>,
}

/// Runs the ensemble, updates the prior, estimates θ̂, seeds the GA with
/// [`alg1_sample`] and returns the optimized feature set. Every random
/// stage draws from its own stream derived from `seed`.
pub fn select_features(d: &Dataset, cfg: &PipelineConfig, sys: &ConstraintSystem, seed: u64) -> Result<Selection> {
    check_dims(sys, d.n_features())?;
    cfg.ga.validate()?;
    let l = cfg.ensemble.resolve_l(sys);
    let ens = EnsembleConfig {
        models: cfg.ensemble.models,
        features_per_model: l,
        subsample_fraction: cfg.ensemble.subsample_fraction,
        seed: derive_seed(seed, streams::ENSEMBLE),
    };
    let counts = run_ensemble(d, &cfg.selector, &ens)?;
    let posterior = cfg.prior.posterior(&counts)?;
    let importance = expected_importance(&posterior, &cfg.mh, derive_seed(seed, streams::POSTERIOR))?;
    let theta = &importance.theta;
    let weights = match (posterior.family(), posterior.alpha()) {
        (Family::Dirichlet, Some(alpha)) => alpha.to_vec(),
        _ => theta.clone(),
    };
    let init = alg1_sample(&weights, sys, cfg.ga.population, derive_seed(seed, streams::INIT))?;
    let ga = ga_optimize(theta, sys, &cfg.ga.with_seed(derive_seed(seed, streams::GA)), init)?;
    let selected = ga.best.delta;
    Ok(Selection {
        utility: ga.best.utility,
        risk: risk(&selected, theta, sys),
        kappa: sys.joint_admissibility(&selected),
        selected,
        features_per_model: l,
        counts,
        posterior,
        importance,
        ga_trace: ga.trace,
    })
}
