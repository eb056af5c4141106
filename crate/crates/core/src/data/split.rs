use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::Dataset;
use crate::rng::rng_from_seed;
use crate::{Error, Result};

fn rows_by_class(labels: &[i64]) -> BTreeMap<i64, Vec<usize>> {
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    groups
}

/// Row indices `(train, test)` of a stratified split, both sorted ascending.
///
/// Each class contributes `round(fraction * class_count)` rows to the train
/// part (kept in `1..class_count`), then single classes are nudged by one
/// row, closest residual first, toward a global train size of
/// `round(fraction * n)`. No class ends up more than one row away from
/// `fraction * class_count`.
pub fn stratified_split_indices(
    labels: &[i64],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let groups = rows_by_class(labels);
    for (&class, rows) in &groups {
        if rows.len() < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count: rows.len(),
            });
        }
    }

    let exact: Vec<f64> = groups
        .values()
        .map(|r| train_fraction * r.len() as f64)
        .collect();
    let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    let mut take: Vec<usize> = exact
        .iter()
        .zip(&sizes)
        .map(|(&e, &n)| (e.round() as usize).clamp(1, n - 1))
        .collect();

    let target = (train_fraction * labels.len() as f64).round() as i64;
    let mut adjusted = vec![false; take.len()];
    loop {
        let diff = target - take.iter().sum::<usize>() as i64;
        if diff == 0 {
            break;
        }
        let step: i64 = diff.signum();
        let best = (0..take.len())
            .filter(|&k| !adjusted[k])
            .filter(|&k| {
                let next = take[k] as i64 + step;
                next >= 1 && next < sizes[k] as i64 && (next as f64 - exact[k]).abs() <= 1.0
            })
            .min_by(|&a, &b| {
                let ra = ((take[a] as i64 + step) as f64 - exact[a]).abs();
                let rb = ((take[b] as i64 + step) as f64 - exact[b]).abs();
                ra.total_cmp(&rb).then(a.cmp(&b))
            });
        match best {
            Some(k) => {
                take[k] = (take[k] as i64 + step) as usize;
                adjusted[k] = true;
            }
            None => break,
        }
    }

    let mut rng = rng_from_seed(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (rows, &k) in groups.values().zip(&take) {
        let mut rows = rows.clone();
        rows.shuffle(&mut rng);
        train.extend_from_slice(&rows[..k]);
        test.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = stratified_split_indices(d.labels(), train_fraction, seed)?;
    Ok((d.select_rows(&train), d.select_rows(&test)))
}

/// `floor(fraction * n)` row indices drawn without replacement, stratified
/// by class (largest-remainder apportionment), sorted ascending.
pub fn subsample_indices(labels: &[i64], fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "subsample fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let groups = rows_by_class(labels);
    let total = (fraction * labels.len() as f64).floor() as usize;
    let exact: Vec<f64> = groups.values().map(|r| fraction * r.len() as f64).collect();
    let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..take.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut remaining = total.saturating_sub(take.iter().sum());
    for k in order {
        if remaining == 0 {
            break;
        }
        let cap = groups.values().nth(k).map_or(0, Vec::len);
        if take[k] < cap {
            take[k] += 1;
            remaining -= 1;
        }
    }

    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(total);
    for (rows, &k) in groups.values().zip(&take) {
        let mut rows = rows.clone();
        rows.shuffle(&mut rng);
        out.extend_from_slice(&rows[..k]);
    }
    out.sort_unstable();
    Ok(out)
}

pub fn subsample(d: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    let rows = subsample_indices(d.labels(), fraction, seed)?;
    Ok(d.select_rows(&rows))
}
