//! Prior and posterior families over the importance vector θ and the
//! posterior expected importance.
//!
//! The Dirichlet and generalized Dirichlet means are closed form. The
//! hyperdirichlet density is only known up to its normalizing constant, so
//! its mean is a Metropolis-Hastings estimate.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::elementary::FeatureCounts;
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::{Error, Result};

/// Prior weight given to every feature when nothing is known.
pub const UNINFORMATIVE_WEIGHT: f64 = 0.01;

/// Largest dimension accepted by the hyperdirichlet family.
pub const HYPERDIRICHLET_LIMIT: usize = 20;

/// Positive Dirichlet prior weights α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriorWeights {
    alpha: Vec<f64>,
}

impl PriorWeights {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        check_positive("alpha", &alpha)?;
        if alpha.is_empty() {
            return Err(Error::invalid("alpha must have at least one component"));
        }
        Ok(PriorWeights { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

fn check_positive(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        Some(i) => Err(Error::invalid(format!(
            "{name}[{i}] must be positive and finite, got {}",
            v[i]
        ))),
        None => Ok(()),
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `α_n = 0.01` for every feature.
pub fn uninformative_prior(n: usize) -> Result<PriorWeights> {
    PriorWeights::new(vec![UNINFORMATIVE_WEIGHT; n])
}

/// One factor `(Σ_{i∈G} θ_i)^exponent` of a hyperdirichlet density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperTerm {
    pub subset: Vec<usize>,
    pub exponent: f64,
}

impl HyperTerm {
    pub fn new(mut subset: Vec<usize>, exponent: f64) -> Result<Self> {
        subset.sort_unstable();
        subset.dedup();
        if subset.is_empty() {
            return Err(Error::invalid("hyperdirichlet subsets must be nonempty"));
        }
        if !exponent.is_finite() {
            return Err(Error::invalid(format!("non-finite hyperdirichlet exponent {exponent}")));
        }
        Ok(HyperTerm { subset, exponent })
    }

    fn singleton(&self) -> Option<usize> {
        match self.subset[..] {
            [i] => Some(i),
            _ => None,
        }
    }
}

/// Hyperdirichlet terms reproducing the Dirichlet(α) density
/// `Π θ_n^{α_n - 1}`.
pub fn dirichlet_terms(prior: &PriorWeights) -> Vec<HyperTerm> {
    prior
        .alpha()
        .iter()
        .enumerate()
        .map(|(i, &a)| HyperTerm {
            subset: vec![i],
            exponent: a - 1.0,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Dirichlet,
    GeneralizedDirichlet,
    Hyperdirichlet,
}

/// Posterior distribution of θ after observing the ensemble counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PosteriorModel {
    Dirichlet {
        alpha: Vec<f64>,
    },
    GeneralizedDirichlet {
        alpha: Vec<f64>,
        beta: Vec<f64>,
    },
    Hyperdirichlet {
        n_features: usize,
        terms: Vec<HyperTerm>,
    },
}

impl PosteriorModel {
    pub fn family(&self) -> Family {
        match self {
            PosteriorModel::Dirichlet { .. } => Family::Dirichlet,
            PosteriorModel::GeneralizedDirichlet { .. } => Family::GeneralizedDirichlet,
            PosteriorModel::Hyperdirichlet { .. } => Family::Hyperdirichlet,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            PosteriorModel::Dirichlet { alpha } | PosteriorModel::GeneralizedDirichlet { alpha, .. } => {
                alpha.len()
            }
            PosteriorModel::Hyperdirichlet { n_features, .. } => *n_features,
        }
    }

    /// Posterior α° for the Dirichlet and generalized families.
    pub fn alpha(&self) -> Option<&[f64]> {
        match self {
            PosteriorModel::Dirichlet { alpha } | PosteriorModel::GeneralizedDirichlet { alpha, .. } => {
                Some(alpha)
            }
            PosteriorModel::Hyperdirichlet { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            PosteriorModel::Dirichlet { alpha } => {
                check_positive("alpha", alpha)?;
                if alpha.is_empty() {
                    return Err(Error::invalid("empty posterior"));
                }
            }
            PosteriorModel::GeneralizedDirichlet { alpha, beta } => {
                check_positive("alpha", alpha)?;
                check_positive("beta", beta)?;
                if alpha.is_empty() {
                    return Err(Error::invalid("empty posterior"));
                }
                check_dims(alpha.len() - 1, beta.len())?;
            }
            PosteriorModel::Hyperdirichlet { n_features, terms } => {
                check_hyper(*n_features, terms)?;
            }
        }
        Ok(())
    }
}

/// `α° = α + Δ`.
pub fn posterior_dirichlet(prior: &PriorWeights, counts: &FeatureCounts) -> Result<PosteriorModel> {
    check_dims(prior.len(), counts.len())?;
    let alpha = prior
        .alpha()
        .iter()
        .zip(&counts.counts)
        .map(|(a, &c)| a + f64::from(c))
        .collect();
    Ok(PosteriorModel::Dirichlet { alpha })
}

/// `β_n = Σ_{i>n} α_i`, under which the generalized Dirichlet coincides with
/// the Dirichlet.
pub fn default_beta(alpha: &[f64]) -> Vec<f64> {
    let mut beta = vec![0.0; alpha.len().saturating_sub(1)];
    let mut tail = 0.0;
    for n in (0..beta.len()).rev() {
        tail += alpha[n + 1];
        beta[n] = tail;
    }
    beta
}

/// Generalized Dirichlet update: `α°_n = α_n + Δ_n` and
/// `β°_n = β_n + Σ_{i>n} Δ_i`. `beta` defaults to [`default_beta`].
pub fn posterior_generalized(
    prior: &PriorWeights,
    beta: Option<&[f64]>,
    counts: &FeatureCounts,
) -> Result<PosteriorModel> {
    let n = prior.len();
    check_dims(n, counts.len())?;
    let beta = match beta {
        Some(b) => {
            check_dims(n - 1, b.len())?;
            check_positive("beta", b)?;
            b.to_vec()
        }
        None => default_beta(prior.alpha()),
    };
    let delta = counts.as_f64();
    let alpha = prior.alpha().iter().zip(&delta).map(|(a, d)| a + d).collect();
    let mut tail = 0.0;
    let mut beta_post = beta;
    for i in (0..n - 1).rev() {
        tail += delta[i + 1];
        beta_post[i] += tail;
    }
    Ok(PosteriorModel::GeneralizedDirichlet {
        alpha,
        beta: beta_post,
    })
}

fn check_hyper(n: usize, terms: &[HyperTerm]) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("empty posterior"));
    }
    if n > HYPERDIRICHLET_LIMIT {
        return Err(Error::Intractable {
            n,
            limit: HYPERDIRICHLET_LIMIT,
        });
    }
    for t in terms {
        if t.subset.is_empty() {
            return Err(Error::invalid("hyperdirichlet subsets must be nonempty"));
        }
        if let Some(&i) = t.subset.iter().find(|&&i| i >= n) {
            return Err(Error::invalid(format!(
                "hyperdirichlet subset index {i} out of range for {n} features"
            )));
        }
    }
    Ok(())
}

/// Adds each count `Δ_n > 0` to the exponent of the singleton term `{n}`,
/// creating the term if the prior has none.
pub fn posterior_hyperdirichlet(
    n_features: usize,
    prior: &[HyperTerm],
    counts: &FeatureCounts,
) -> Result<PosteriorModel> {
    check_hyper(n_features, prior)?;
    check_dims(n_features, counts.len())?;
    let mut terms = prior.to_vec();
    for (n, &c) in counts.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        match terms.iter_mut().find(|t| t.singleton() == Some(n)) {
            Some(t) => t.exponent += f64::from(c),
            None => terms.push(HyperTerm {
                subset: vec![n],
                exponent: f64::from(c),
            }),
        }
    }
    Ok(PosteriorModel::Hyperdirichlet { n_features, terms })
}

/// Prior family and parameters as configured by the user. Missing weights
/// fall back to [`uninformative_prior`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    Dirichlet {
        #[serde(default)]
        alpha: Option<Vec<f64>>,
    },
    GeneralizedDirichlet {
        #[serde(default)]
        alpha: Option<Vec<f64>>,
        #[serde(default)]
        beta: Option<Vec<f64>>,
    },
    Hyperdirichlet {
        #[serde(default)]
        terms: Option<Vec<HyperTerm>>,
    },
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::Dirichlet { alpha: None }
    }
}

impl PriorSpec {
    fn weights(alpha: &Option<Vec<f64>>, n: usize) -> Result<PriorWeights> {
        match alpha {
            Some(a) => {
                check_dims(n, a.len())?;
                PriorWeights::new(a.clone())
            }
            None => uninformative_prior(n),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            PriorSpec::Dirichlet { .. } => Family::Dirichlet,
            PriorSpec::GeneralizedDirichlet { .. } => Family::GeneralizedDirichlet,
            PriorSpec::Hyperdirichlet { .. } => Family::Hyperdirichlet,
        }
    }

    /// Conjugate update with the ensemble counts.
    pub fn posterior(&self, counts: &FeatureCounts) -> Result<PosteriorModel> {
        let n = counts.len();
        match self {
            PriorSpec::Dirichlet { alpha } => posterior_dirichlet(&Self::weights(alpha, n)?, counts),
            PriorSpec::GeneralizedDirichlet { alpha, beta } => {
                posterior_generalized(&Self::weights(alpha, n)?, beta.as_deref(), counts)
            }
            PriorSpec::Hyperdirichlet { terms } => {
                if n > HYPERDIRICHLET_LIMIT {
                    return Err(Error::Intractable {
                        n,
                        limit: HYPERDIRICHLET_LIMIT,
                    });
                }
                let terms = match terms {
                    Some(t) => t.clone(),
                    None => dirichlet_terms(&uninformative_prior(n)?),
                };
                posterior_hyperdirichlet(n, &terms, counts)
            }
        }
    }
}

/// Metropolis-Hastings settings. The proposal from state θ is
/// Dirichlet(concentration·θ + offset).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MhSettings {
    pub burn_in: usize,
    /// Retained samples, split evenly across chains.
    pub samples: usize,
    pub concentration: f64,
    pub offset: f64,
    pub chains: usize,
}

impl Default for MhSettings {
    fn default() -> Self {
        MhSettings {
            burn_in: 2000,
            samples: 10_000,
            concentration: 200.0,
            offset: 0.1,
            chains: 4,
        }
    }
}

impl MhSettings {
    pub fn validate(&self) -> Result<()> {
        if self.chains < 1 || self.samples < self.chains {
            return Err(Error::invalid(format!(
                "mh needs chains >= 1 and samples >= chains, got {} samples over {} chains",
                self.samples, self.chains
            )));
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return Err(Error::invalid("mh concentration must be positive"));
        }
        if !(self.offset > 0.0 && self.offset.is_finite()) {
            return Err(Error::invalid("mh offset must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    ClosedForm,
    MhSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhDiagnostics {
    pub acceptance_rate: f64,
    pub samples: usize,
    pub chains: usize,
    /// Batch-means Monte Carlo standard error per component.
    pub std_error: Vec<f64>,
}

/// Posterior mean of θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEstimate {
    pub theta: Vec<f64>,
    pub method: EstimateMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mh: Option<MhDiagnostics>,
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Posterior expected importance. `mh` and `seed` are only used by the
/// hyperdirichlet family.
pub fn expected_importance(post: &PosteriorModel, mh: &MhSettings, seed: u64) -> Result<ImportanceEstimate> {
    post.validate()?;
    let closed = |theta| ImportanceEstimate {
        theta: normalized(theta),
        method: EstimateMethod::ClosedForm,
        mh: None,
    };
    match post {
        PosteriorModel::Dirichlet { alpha } => Ok(closed(alpha.clone())),
        PosteriorModel::GeneralizedDirichlet { alpha, beta } => {
            let n = alpha.len();
            let mut theta = Vec::with_capacity(n);
            let mut carry = 1.0;
            for i in 0..n - 1 {
                let s = alpha[i] + beta[i];
                theta.push(carry * alpha[i] / s);
                carry *= beta[i] / s;
            }
            theta.push(carry);
            Ok(closed(theta))
        }
        PosteriorModel::Hyperdirichlet { n_features, terms } => {
            mh.validate()?;
            metropolis_hastings(*n_features, terms, mh, seed)
        }
    }
}

fn log_target(terms: &[HyperTerm], theta: &[f64]) -> f64 {
    terms
        .iter()
        .map(|t| t.exponent * t.subset.iter().map(|&i| theta[i]).sum::<f64>().ln())
        .sum()
}

fn proposal_params(theta: &[f64], mh: &MhSettings) -> Vec<f64> {
    theta.iter().map(|t| mh.concentration * t + mh.offset).collect()
}

fn log_dirichlet(x: &[f64], a: &[f64]) -> f64 {
    let total: f64 = a.iter().sum();
    ln_gamma(total)
        + a.iter()
            .zip(x)
            .map(|(&ai, &xi)| (ai - 1.0) * xi.ln() - ln_gamma(ai))
            .sum::<f64>()
}

fn sample_dirichlet(a: &[f64], rng: &mut Rng) -> Vec<f64> {
    let g: Vec<f64> = a
        .iter()
        .map(|&ai| Gamma::new(ai, 1.0).expect("positive shape").sample(rng))
        .collect();
    normalized(g)
}

struct ChainOutput {
    accepted: usize,
    steps: usize,
    batch_means: Vec<Vec<f64>>,
    sum: Vec<f64>,
    kept: usize,
}

const BATCHES_PER_CHAIN: usize = 20;

fn run_chain(n: usize, terms: &[HyperTerm], mh: &MhSettings, kept: usize, seed: u64) -> ChainOutput {
    let mut rng = rng_from_seed(seed);
    let mut theta = vec![1.0 / n as f64; n];
    let mut log_p = log_target(terms, &theta);
    let mut params = proposal_params(&theta, mh);
    let mut accepted = 0;
    let batches = BATCHES_PER_CHAIN.min(kept).max(1);
    let batch_len = kept / batches;
    let mut batch_means = Vec::with_capacity(batches);
    let mut batch_sum = vec![0.0; n];
    let mut in_batch = 0;
    let mut sum = vec![0.0; n];
    let steps = mh.burn_in + kept;
    for step in 0..steps {
        if n > 1 {
            let cand = sample_dirichlet(&params, &mut rng);
            if cand.iter().all(|&x| x > 0.0) {
                let cand_params = proposal_params(&cand, mh);
                let cand_log_p = log_target(terms, &cand);
                let log_ratio = cand_log_p - log_p + log_dirichlet(&theta, &cand_params)
                    - log_dirichlet(&cand, &params);
                if log_ratio.is_finite() && rng.random::<f64>().ln() < log_ratio {
                    theta = cand;
                    log_p = cand_log_p;
                    params = cand_params;
                    accepted += 1;
                }
            }
        } else {
            accepted += 1;
        }
        if step >= mh.burn_in {
            for (s, t) in sum.iter_mut().zip(&theta) {
                *s += t;
            }
            if batch_means.len() < batches {
                for (s, t) in batch_sum.iter_mut().zip(&theta) {
                    *s += t;
                }
                in_batch += 1;
                if in_batch == batch_len {
                    batch_means.push(batch_sum.iter().map(|s| s / batch_len as f64).collect());
                    batch_sum.iter_mut().for_each(|s| *s = 0.0);
                    in_batch = 0;
                }
            }
        }
    }
    ChainOutput {
        accepted,
        steps,
        batch_means,
        sum,
        kept,
    }
}

fn metropolis_hastings(n: usize, terms: &[HyperTerm], mh: &MhSettings, seed: u64) -> Result<ImportanceEstimate> {
    let per_chain: Vec<usize> = (0..mh.chains)
        .map(|c| mh.samples / mh.chains + usize::from(c < mh.samples % mh.chains))
        .collect();
    let outputs: Vec<ChainOutput> = per_chain
        .par_iter()
        .enumerate()
        .map(|(c, &kept)| run_chain(n, terms, mh, kept, derive_seed(seed, c as u64)))
        .collect();

    let accepted: usize = outputs.iter().map(|o| o.accepted).sum();
    let steps: usize = outputs.iter().map(|o| o.steps).sum();
    let acceptance_rate = accepted as f64 / steps as f64;
    if acceptance_rate < 0.01 {
        return Err(Error::StuckChain(acceptance_rate));
    }
    let kept: usize = outputs.iter().map(|o| o.kept).sum();
    let mut mean = vec![0.0; n];
    for o in &outputs {
        for (m, s) in mean.iter_mut().zip(&o.sum) {
            *m += s / kept as f64;
        }
    }
    let batches: Vec<&Vec<f64>> = outputs.iter().flat_map(|o| &o.batch_means).collect();
    let b = batches.len() as f64;
    let std_error = (0..n)
        .map(|i| {
            if batches.len() < 2 {
                return f64::NAN;
            }
            let bm = batches.iter().map(|v| v[i]).sum::<f64>() / b;
            let var = batches.iter().map(|v| (v[i] - bm).powi(2)).sum::<f64>() / (b - 1.0);
            (var / b).sqrt()
        })
        .collect();
    Ok(ImportanceEstimate {
        theta: normalized(mean),
        method: EstimateMethod::MhSample,
        mh: Some(MhDiagnostics {
            acceptance_rate,
            samples: kept,
            chains: mh.chains,
            std_error,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::Beta;

    fn counts(c: &[u32]) -> FeatureCounts {
        FeatureCounts {
            counts: c.to_vec(),
            models: c.iter().copied().max().unwrap_or(0) as usize,
        }
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn uninformative() {
        assert_eq!(uninformative_prior(3).unwrap().alpha(), &[0.01, 0.01, 0.01]);
        assert_eq!(uninformative_prior(1).unwrap().alpha(), &[0.01]);
        assert!(uninformative_prior(0).is_err());
        assert!(PriorWeights::new(vec![1.0, 0.0]).is_err());
        assert!(PriorWeights::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn dirichlet_update_examples() {
        let p = uninformative_prior(3).unwrap();
        let post = posterior_dirichlet(&p, &counts(&[3, 5, 2])).unwrap();
        assert!(close(post.alpha().unwrap(), &[3.01, 5.01, 2.01], 1e-12));
        let post = posterior_dirichlet(&p, &counts(&[0, 0, 0])).unwrap();
        assert_eq!(post.alpha().unwrap(), p.alpha());
        let p = PriorWeights::new(vec![2.0, 3.0]).unwrap();
        let post = posterior_dirichlet(&p, &counts(&[8, 7])).unwrap();
        assert_eq!(post.alpha().unwrap(), &[10.0, 10.0]);
        assert!(matches!(
            posterior_dirichlet(&p, &counts(&[1, 2, 3])),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn dirichlet_mean() {
        let post = PosteriorModel::Dirichlet {
            alpha: vec![1.0, 1.0, 2.0],
        };
        let est = expected_importance(&post, &MhSettings::default(), 0).unwrap();
        assert_eq!(est.theta, vec![0.25, 0.25, 0.5]);
        assert_eq!(est.method, EstimateMethod::ClosedForm);
        assert!(est.mh.is_none());
    }

    #[test]
    fn generalized_update_by_hand() {
        let p = PriorWeights::new(vec![1.0, 1.0, 1.0]).unwrap();
        let post = posterior_generalized(&p, Some(&[2.0, 1.0]), &counts(&[2, 1, 1])).unwrap();
        assert_eq!(
            post,
            PosteriorModel::GeneralizedDirichlet {
                alpha: vec![3.0, 2.0, 2.0],
                beta: vec![4.0, 2.0],
            }
        );
        let zero = posterior_generalized(&p, Some(&[2.0, 1.0]), &counts(&[0, 0, 0])).unwrap();
        assert_eq!(
            zero,
            PosteriorModel::GeneralizedDirichlet {
                alpha: vec![1.0, 1.0, 1.0],
                beta: vec![2.0, 1.0],
            }
        );
        assert!(posterior_generalized(&p, Some(&[2.0]), &counts(&[0, 0, 0])).is_err());
        assert!(posterior_generalized(&p, Some(&[2.0, -1.0]), &counts(&[0, 0, 0])).is_err());
    }

    #[test]
    fn generalized_default_beta_matches_dirichlet() {
        let p = PriorWeights::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(default_beta(p.alpha()), vec![5.0, 3.0]);
        let post = posterior_generalized(&p, None, &counts(&[0, 0, 0])).unwrap();
        let est = expected_importance(&post, &MhSettings::default(), 0).unwrap();
        assert!(close(&est.theta, &[1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0], 1e-12));
    }

    #[test]
    fn generalized_mean_matches_stick_breaking_simulation() {
        // θ_n = Z_n Π_{i<n} (1 - Z_i) with independent Z_i ~ Beta(α_i, β_i)
        let alpha = [3.0, 2.0, 4.0];
        let beta = [4.0, 2.0];
        let post = PosteriorModel::GeneralizedDirichlet {
            alpha: alpha.to_vec(),
            beta: beta.to_vec(),
        };
        let est = expected_importance(&post, &MhSettings::default(), 0).unwrap();
        let mut rng = rng_from_seed(99);
        let draws = 200_000;
        let mut mean = [0.0; 3];
        let b0 = Beta::new(alpha[0], beta[0]).unwrap();
        let b1 = Beta::new(alpha[1], beta[1]).unwrap();
        for _ in 0..draws {
            let z0: f64 = b0.sample(&mut rng);
            let z1: f64 = b1.sample(&mut rng);
            mean[0] += z0;
            mean[1] += (1.0 - z0) * z1;
            mean[2] += (1.0 - z0) * (1.0 - z1);
        }
        let mean: Vec<f64> = mean.iter().map(|m| m / draws as f64).collect();
        assert!(close(&est.theta, &mean, 3e-3), "{:?} vs {:?}", est.theta, mean);
    }

    #[test]
    fn single_feature_generalized() {
        let p = PriorWeights::new(vec![0.5]).unwrap();
        let post = posterior_generalized(&p, None, &counts(&[4])).unwrap();
        assert_eq!(expected_importance(&post, &MhSettings::default(), 0).unwrap().theta, vec![1.0]);
    }

    #[test]
    fn hyperdirichlet_update() {
        let p = PriorWeights::new(vec![2.0, 3.0]).unwrap();
        let terms = dirichlet_terms(&p);
        assert_eq!(terms[0].exponent, 1.0);
        let post = posterior_hyperdirichlet(2, &terms, &counts(&[1, 0])).unwrap();
        match &post {
            PosteriorModel::Hyperdirichlet { terms, .. } => {
                assert_eq!(terms.len(), 2);
                assert_eq!(terms[0].exponent, 2.0);
                assert_eq!(terms[1].exponent, 2.0);
            }
            _ => unreachable!(),
        }
        let unchanged = posterior_hyperdirichlet(2, &terms, &counts(&[0, 0])).unwrap();
        assert_eq!(
            unchanged,
            PosteriorModel::Hyperdirichlet {
                n_features: 2,
                terms: terms.clone()
            }
        );
        let pair = vec![HyperTerm::new(vec![1, 0], 2.0).unwrap()];
        let post = posterior_hyperdirichlet(2, &pair, &counts(&[0, 3])).unwrap();
        match post {
            PosteriorModel::Hyperdirichlet { terms, .. } => {
                assert_eq!(terms[0].subset, vec![0, 1]);
                assert_eq!(terms[1], HyperTerm::new(vec![1], 3.0).unwrap());
            }
            _ => unreachable!(),
        }
        assert!(HyperTerm::new(vec![], 1.0).is_err());
    }

    #[test]
    fn hyperdirichlet_guard() {
        let p = uninformative_prior(25).unwrap();
        let r = posterior_hyperdirichlet(25, &dirichlet_terms(&p), &FeatureCounts::zeros(25, 1));
        assert!(matches!(r, Err(Error::Intractable { n: 25, limit: 20 })));
        let bad = vec![HyperTerm {
            subset: vec![3],
            exponent: 1.0,
        }];
        assert!(posterior_hyperdirichlet(2, &bad, &counts(&[0, 0])).is_err());
    }

    fn dirichlet_as_hyper(alpha: &[f64]) -> PosteriorModel {
        PosteriorModel::Hyperdirichlet {
            n_features: alpha.len(),
            terms: dirichlet_terms(&PriorWeights::new(alpha.to_vec()).unwrap()),
        }
    }

    // The default proposal is tuned for the sharp posteriors produced by
    // ensemble counts; on this flat target it needs a longer run.
    fn long_run() -> MhSettings {
        MhSettings {
            samples: 200_000,
            ..MhSettings::default()
        }
    }

    #[test]
    fn mh_recovers_dirichlet_mean() {
        let est = expected_importance(&dirichlet_as_hyper(&[2.0, 3.0, 5.0]), &long_run(), 7).unwrap();
        assert!(close(&est.theta, &[0.2, 0.3, 0.5], 0.01), "{:?}", est.theta);
        let diag = est.mh.unwrap();
        assert_eq!(diag.samples, 200_000);
        assert!(diag.acceptance_rate > 0.05 && diag.acceptance_rate <= 1.0);
        assert!(diag.std_error.iter().all(|s| s.is_finite() && *s < 0.004));
        assert!((est.theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mh_doubling_samples_is_consistent() {
        let post = dirichlet_as_hyper(&[2.0, 3.0, 5.0]);
        let base = MhSettings::default();
        let a = expected_importance(&post, &base, 11).unwrap();
        let doubled = MhSettings {
            samples: 2 * base.samples,
            ..base
        };
        let b = expected_importance(&post, &doubled, 11).unwrap();
        let se = a.mh.unwrap().std_error;
        for i in 0..3 {
            assert!((a.theta[i] - b.theta[i]).abs() <= 3.0 * se[i], "component {i}");
        }
    }

    #[test]
    fn mh_handles_group_terms() {
        // Π θ_n^{α_n - 1} · (θ_0 + θ_1)^a aggregates to
        // E[θ_0] = α_0/(α_0+α_1) · (α_0+α_1+a)/(α_0+α_1+α_2+a)
        let (a0, a1, a2, a) = (2.0, 3.0, 5.0, 3.0);
        let mut terms = dirichlet_terms(&PriorWeights::new(vec![a0, a1, a2]).unwrap());
        terms.push(HyperTerm::new(vec![0, 1], a).unwrap());
        let post = PosteriorModel::Hyperdirichlet { n_features: 3, terms };
        let est = expected_importance(&post, &long_run(), 3).unwrap();
        let s = a0 + a1 + a;
        let total = s + a2;
        let expected = [a0 / (a0 + a1) * s / total, a1 / (a0 + a1) * s / total, a2 / total];
        assert!(close(&est.theta, &expected, 0.015), "{:?} vs {:?}", est.theta, expected);
    }

    #[test]
    fn mh_is_deterministic() {
        let post = dirichlet_as_hyper(&[1.5, 2.5]);
        let mh = MhSettings {
            samples: 2000,
            burn_in: 200,
            ..MhSettings::default()
        };
        assert_eq!(
            expected_importance(&post, &mh, 5).unwrap(),
            expected_importance(&post, &mh, 5).unwrap()
        );
    }

    #[test]
    fn stuck_chain_is_reported() {
        // a sharp central target and a proposal that only reaches the corners
        let post = dirichlet_as_hyper(&[1000.0; 3]);
        let mh = MhSettings {
            concentration: 1e-3,
            offset: 1e-3,
            ..MhSettings::default()
        };
        let r = expected_importance(&post, &mh, 1);
        assert!(matches!(r, Err(Error::StuckChain(rate)) if rate < 0.01), "{r:?}");
    }

    #[test]
    fn mh_settings_validation() {
        let bad = MhSettings {
            chains: 0,
            ..MhSettings::default()
        };
        assert!(bad.validate().is_err());
        let s: MhSettings = serde_json::from_str(r#"{"samples": 500}"#).unwrap();
        assert_eq!(s.burn_in, 2000);
        assert!(serde_json::from_str::<MhSettings>(r#"{"thin": 2}"#).is_err());
    }

    #[test]
    fn prior_spec_defaults_and_dims() {
        let c = counts(&[2, 0, 1]);
        let post = PriorSpec::default().posterior(&c).unwrap();
        assert!(close(post.alpha().unwrap(), &[2.01, 0.01, 1.01], 1e-12));
        let spec: PriorSpec = serde_json::from_str(r#"{"family":"generalized_dirichlet","alpha":[1,1,1]}"#).unwrap();
        assert_eq!(spec.posterior(&c).unwrap().family(), Family::GeneralizedDirichlet);
        let bad = PriorSpec::Dirichlet {
            alpha: Some(vec![1.0, 1.0]),
        };
        assert!(matches!(bad.posterior(&c), Err(Error::DimensionMismatch { .. })));
        let hyper: PriorSpec = serde_json::from_str(r#"{"family":"hyperdirichlet"}"#).unwrap();
        assert_eq!(hyper.posterior(&c).unwrap().family(), Family::Hyperdirichlet);
        assert!(hyper.posterior(&FeatureCounts::zeros(21, 1)).is_err());
        assert!(serde_json::from_str::<PriorSpec>(r#"{"family":"dirichlet","gamma":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn conjugacy_composes(
            alpha in prop::collection::vec(0.01f64..5.0, 1..8),
            d1 in prop::collection::vec(0u32..50, 8),
            d2 in prop::collection::vec(0u32..50, 8),
        ) {
            let n = alpha.len();
            let p = PriorWeights::new(alpha).unwrap();
            let c1 = counts(&d1[..n]);
            let c2 = counts(&d2[..n]);
            let step = posterior_dirichlet(&p, &c1).unwrap();
            let mid = PriorWeights::new(step.alpha().unwrap().to_vec()).unwrap();
            let two = posterior_dirichlet(&mid, &c2).unwrap();
            let sum: Vec<u32> = d1[..n].iter().zip(&d2[..n]).map(|(a, b)| a + b).collect();
            let one = posterior_dirichlet(&p, &counts(&sum)).unwrap();
            prop_assert!(close(two.alpha().unwrap(), one.alpha().unwrap(), 1e-9));
        }

        #[test]
        fn mean_increases_with_count(
            alpha in prop::collection::vec(0.01f64..5.0, 2..8),
            d in prop::collection::vec(0u32..50, 8),
            idx in 0usize..8,
        ) {
            let n = alpha.len();
            let i = idx % n;
            let p = PriorWeights::new(alpha).unwrap();
            let mut c = d[..n].to_vec();
            let before = expected_importance(&posterior_dirichlet(&p, &counts(&c)).unwrap(), &MhSettings::default(), 0).unwrap();
            c[i] += 1;
            let after = expected_importance(&posterior_dirichlet(&p, &counts(&c)).unwrap(), &MhSettings::default(), 0).unwrap();
            prop_assert!(after.theta[i] > before.theta[i]);
        }

        #[test]
        fn closed_forms_are_probability_vectors(
            alpha in prop::collection::vec(0.01f64..5.0, 1..10),
            beta in prop::collection::vec(0.01f64..5.0, 10),
            d in prop::collection::vec(0u32..100, 10),
        ) {
            let n = alpha.len();
            let p = PriorWeights::new(alpha).unwrap();
            let c = counts(&d[..n]);
            for post in [
                posterior_dirichlet(&p, &c).unwrap(),
                posterior_generalized(&p, Some(&beta[..n - 1]), &c).unwrap(),
            ] {
                let est = expected_importance(&post, &MhSettings::default(), 0).unwrap();
                prop_assert!(est.theta.iter().all(|&t| t >= 0.0));
                prop_assert!((est.theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn generalized_with_default_beta_is_dirichlet(
            alpha in prop::collection::vec(0.01f64..5.0, 1..10),
            d in prop::collection::vec(0u32..100, 10),
        ) {
            let n = alpha.len();
            let p = PriorWeights::new(alpha).unwrap();
            let c = counts(&d[..n]);
            let mh = MhSettings::default();
            let gd = expected_importance(&posterior_generalized(&p, None, &c).unwrap(), &mh, 0).unwrap();
            let dir = expected_importance(&posterior_dirichlet(&p, &c).unwrap(), &mh, 0).unwrap();
            prop_assert!(close(&gd.theta, &dir.theta, 1e-9));
        }
    }
}
