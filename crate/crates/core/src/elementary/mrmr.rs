use super::check_l;
use crate::data::Dataset;
use crate::{Error, FeatureSet, Result};

/// Equal-frequency discretization into at most `bins` bins. Sorted position
/// `p` maps to bin `floor(p * bins / n)`; tied values all take the bin of
/// their first sorted position, so a constant column lands in bin 0.
pub fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0; n];
    let mut current = 0;
    for (p, &i) in order.iter().enumerate() {
        if p == 0 || values[i] != values[order[p - 1]] {
            current = p * bins / n;
        }
        out[i] = current;
    }
    out
}

/// Plug-in mutual information (natural log) between two discrete codes.
pub fn mutual_information(a: &[usize], ka: usize, b: &[usize], kb: usize) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let mut joint = vec![0usize; ka * kb];
    let mut pa = vec![0usize; ka];
    let mut pb = vec![0usize; kb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * kb + y] += 1;
        pa[x] += 1;
        pb[y] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let c = joint[x * kb + y];
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (c * nf / (pa[x] as f64 * pb[y] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Greedy mRMR (difference criterion): start from the most relevant feature,
/// then repeatedly add the feature maximizing relevance minus mean mutual
/// information with the already selected ones.
pub fn mrmr_select(d: &Dataset, l: usize, bins: usize) -> Result<FeatureSet> {
    check_l(d, l)?;
    if bins < 2 {
        return Err(Error::invalid(format!("mrmr bins must be >= 2, got {bins}")));
    }
    let n = d.n_features();
    let (y, k) = d.encoded_labels();
    let codes: Vec<Vec<usize>> = (0..n)
        .map(|j| equal_frequency_bins(&d.column(j).to_vec(), bins))
        .collect();
    let relevance: Vec<f64> = codes
        .iter()
        .map(|c| mutual_information(c, bins, &y, k))
        .collect();

    let mut selected = Vec::with_capacity(l);
    let mut redundancy = vec![0.0; n];
    let mut chosen = vec![false; n];
    while selected.len() < l {
        let s = selected.len() as f64;
        let mut best: Option<(usize, f64)> = None;
        for j in (0..n).filter(|&j| !chosen[j]) {
            let score = if s == 0.0 {
                relevance[j]
            } else {
                relevance[j] - redundancy[j] / s
            };
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((j, score));
            }
        }
        let (pick, _) = best.expect("l <= n leaves a candidate");
        chosen[pick] = true;
        selected.push(pick);
        for j in (0..n).filter(|&j| !chosen[j]) {
            redundancy[j] += mutual_information(&codes[j], bins, &codes[pick], bins);
        }
    }
    Ok(FeatureSet::from_indices(n, &selected))
}
