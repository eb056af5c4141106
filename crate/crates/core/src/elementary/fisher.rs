use super::{check_l, top_l};
use crate::data::Dataset;
use crate::{FeatureSet, Result};

const GUARD: f64 = 1e-12;

/// Fisher score per feature:
/// `sum_c m_c (mu_c - mu)^2 / (sum_c m_c var_c + 1e-12)` with class sizes
/// `m_c`, class means `mu_c`, global mean `mu` and within-class population
/// variances `var_c`.
pub fn fisher_scores(d: &Dataset) -> Result<Vec<f64>> {
    d.require_classes()?;
    let (codes, n_classes) = d.encoded_labels();
    let mut sizes = vec![0usize; n_classes];
    for &c in &codes {
        sizes[c] += 1;
    }
    let scores = (0..d.n_features())
        .map(|j| {
            let col = d.column(j);
            let mut sum = vec![0.0; n_classes];
            for (&v, &c) in col.iter().zip(&codes) {
                sum[c] += v;
            }
            let means: Vec<f64> = sum.iter().zip(&sizes).map(|(s, &m)| s / m as f64).collect();
            let global = col.iter().sum::<f64>() / col.len() as f64;
            let mut within = vec![0.0; n_classes];
            for (&v, &c) in col.iter().zip(&codes) {
                within[c] += (v - means[c]).powi(2);
            }
            let between: f64 = means
                .iter()
                .zip(&sizes)
                .map(|(mu, &m)| m as f64 * (mu - global).powi(2))
                .sum();
            // sum_c m_c var_c equals the summed squared deviations
            let denom: f64 = within.iter().sum();
            between / (denom + GUARD)
        })
        .collect();
    Ok(scores)
}

/// The `l` features with the largest Fisher score.
pub fn fisher_select(d: &Dataset, l: usize) -> Result<FeatureSet> {
    check_l(d, l)?;
    Ok(top_l(&fisher_scores(d)?, l))
}
