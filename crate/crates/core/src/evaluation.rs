//! Selection quality metrics and the repeated-split benchmark.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSpec;
use crate::data::{stratified_split, Dataset, GroundTruth};
use crate::optimizer::{select_features, PipelineConfig};
use crate::rng::{derive_seed, streams};
use crate::stats::{mean, pearson, std_dev};
use crate::{Error, FeatureSet, Result};

/// F1 of `selected` against the relevant features; 0 when nothing is
/// selected or nothing matches.
pub fn feature_f1(selected: &FeatureSet, truth: &GroundTruth) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::invalid("ground truth must contain at least one feature"));
    }
    let k = selected.count();
    if k == 0 {
        return Ok(0.0);
    }
    let hits = selected.iter_selected().filter(|&i| truth.contains(i)).count();
    if hits == 0 {
        return Ok(0.0);
    }
    let p = hits as f64 / k as f64;
    let r = hits as f64 / truth.len() as f64;
    Ok(2.0 * p * r / (p + r))
}

/// Selections of `I` runs over the same `N` features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMatrix {
    rows: Vec<FeatureSet>,
}

impl SelectionMatrix {
    pub fn new(rows: Vec<FeatureSet>) -> Result<Self> {
        if let Some(first) = rows.first() {
            if let Some(bad) = rows.iter().find(|r| r.len() != first.len()) {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: bad.len(),
                });
            }
        }
        Ok(SelectionMatrix { rows })
    }

    pub fn rows(&self) -> &[FeatureSet] {
        &self.rows
    }

    pub fn n_runs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, FeatureSet::len)
    }
}

/// Stability of repeated selections:
/// `1 − mean_f(s_f²) / ((k̄/N)(1 − k̄/N))` with `s_f² = I/(I−1)·p̂_f(1−p̂_f)`.
/// Values are not clipped and can be negative for small `I`.
pub fn stability(z: &SelectionMatrix) -> Result<f64> {
    let i = z.n_runs();
    if i < 2 {
        return Err(Error::UndefinedStability(format!(
            "at least two runs are required, got {i}"
        )));
    }
    let n = z.n_features();
    let it = i as f64;
    let nf = n as f64;
    let k_bar = z.rows.iter().map(|r| r.count() as f64).sum::<f64>() / it;
    if k_bar == 0.0 || k_bar == nf {
        return Err(Error::UndefinedStability(format!(
            "every run selected {} features",
            if k_bar == 0.0 { "no" } else { "all" }
        )));
    }
    let mut var_sum = 0.0;
    for f in 0..n {
        let p = z.rows.iter().filter(|r| r.get(f)).count() as f64 / it;
        var_sum += it / (it - 1.0) * p * (1.0 - p);
    }
    let q = k_bar / nf;
    Ok(1.0 - (var_sum / nf) / (q * (1.0 - q)))
}

/// Mean absolute Pearson correlation over distinct pairs of selected
/// features; 0 with fewer than two features.
pub fn redundancy_rate(d: &Dataset, selected: &FeatureSet) -> Result<f64> {
    if selected.len() != d.n_features() {
        return Err(Error::DimensionMismatch {
            expected: d.n_features(),
            found: selected.len(),
        });
    }
    let idx = selected.indices();
    if idx.len() < 2 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            sum += pearson(d.column(i), d.column(j)).abs();
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

fn default_runs() -> usize {
    10
}

fn default_train_fraction() -> f64 {
    0.75
}

/// Number of repeated splits and the training share of each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSettings {
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        EvaluationSettings {
            runs: default_runs(),
            train_fraction: default_train_fraction(),
        }
    }
}

impl EvaluationSettings {
    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::invalid("runs must be >= 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub selected: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub feature_f1: Option<f64>,
    pub redundancy: f64,
    pub utility: f64,
    pub kappa: f64,
    pub runtime_seconds: f64,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    fn of(xs: &[f64]) -> Self {
        Summary {
            mean: mean(xs),
            std: if xs.len() < 2 { 0.0 } else { std_dev(xs) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub feature_f1: Option<Summary>,
    /// `None` when stability is undefined; `stability_note` says why.
    pub stability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stability_note: Option<String>,
    pub redundancy: Summary,
    pub mean_runtime_seconds: f64,
}

/// Per-run records plus aggregates recomputable from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_features: usize,
    pub runs: Vec<RunRecord>,
    pub aggregates: Aggregates,
}

impl EvaluationReport {
    pub fn selection_matrix(&self) -> SelectionMatrix {
        SelectionMatrix {
            rows: self
                .runs
                .iter()
                .map(|r| FeatureSet::from_indices(self.n_features, &r.selected))
                .collect(),
        }
    }

    fn aggregate(n_features: usize, runs: Vec<RunRecord>) -> Self {
        let f1: Option<Vec<f64>> = runs.iter().map(|r| r.feature_f1).collect();
        let red: Vec<f64> = runs.iter().map(|r| r.redundancy).collect();
        let times: Vec<f64> = runs.iter().map(|r| r.runtime_seconds).collect();
        let mut report = EvaluationReport {
            n_features,
            runs,
            aggregates: Aggregates {
                feature_f1: f1.map(|v| Summary::of(&v)),
                stability: None,
                stability_note: None,
                redundancy: Summary::of(&red),
                mean_runtime_seconds: mean(&times),
            },
        };
        match stability(&report.selection_matrix()) {
            Ok(phi) => report.aggregates.stability = Some(phi),
            Err(e) => report.aggregates.stability_note = Some(e.to_string()),
        }
        report
    }
}

/// Repeats selection on `runs` stratified train splits. Constraints are
/// built from each training part; redundancy is measured on the full data.
/// Runtime covers [`select_features`] only.
pub fn benchmark(
    d: &Dataset,
    truth: Option<&GroundTruth>,
    pipeline: &PipelineConfig,
    constraints: &ConstraintSpec,
    settings: &EvaluationSettings,
    seed: u64,
) -> Result<EvaluationReport> {
    settings.validate()?;
    if let Some(t) = truth {
        if t.relevant().iter().any(|&i| i >= d.n_features()) {
            return Err(Error::invalid("ground truth refers to a feature outside the data"));
        }
    }
    let mut records = Vec::with_capacity(settings.runs);
    for run in 0..settings.runs {
        let run_seed = derive_seed(derive_seed(seed, streams::RUNS), run as u64);
        let (train, _) = stratified_split(d, settings.train_fraction, derive_seed(run_seed, streams::SPLIT))?;
        let sys = constraints.build(&train)?;
        let start = Instant::now();
        let sel = select_features(&train, pipeline, &sys, run_seed)?;
        let runtime_seconds = start.elapsed().as_secs_f64();
        records.push(RunRecord {
            run,
            selected: sel.selected.indices(),
            feature_f1: truth.map(|t| feature_f1(&sel.selected, t)).transpose()?,
            redundancy: redundancy_rate(d, &sel.selected)?,
            utility: sel.utility,
            kappa: sel.kappa,
            runtime_seconds,
        });
    }
    Ok(EvaluationReport::aggregate(d.n_features(), records))
}
