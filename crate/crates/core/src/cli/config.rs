//! JSON run configuration and its resolution against the input data.

use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::constraints::{ConstraintSpec, ConstraintSystem};
use crate::data::{gen_additive, gen_blocked, gen_nonadditive, load_csv, BlockSpec, BlockedParams, Dataset, GroundTruth};
use crate::elementary::ElementarySelectorKind;
use crate::evaluation::EvaluationSettings;
use crate::optimizer::{EnsembleSettings, GaSettings, PipelineConfig};
use crate::prior::{dirichlet_terms, Family, HyperTerm, MhSettings, PriorSpec, PriorWeights, HYPERDIRICHLET_LIMIT, UNINFORMATIVE_WEIGHT};
use crate::rng::{derive_seed, streams};
use crate::Error;

/// Complete configuration of a `select` or `bench` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputConfig,
    #[serde(default)]
    pub selector: ElementarySelectorKind,
    #[serde(default)]
    pub ensemble: EnsembleSettings,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub constraints: ConstraintSpec,
    #[serde(default)]
    pub ga: GaSettings,
    #[serde(default)]
    pub mh: MhSettings,
    #[serde(default)]
    pub evaluation: EvaluationSettings,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputConfig {
    Csv(CsvInput),
    Synthetic(SyntheticSpec),
}

fn default_label_column() -> String {
    "y".into()
}

/// A CSV file plus optional block structure and ground truth. Relative
/// paths are resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvInput {
    pub path: PathBuf,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<BlockSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_file: Option<PathBuf>,
}

fn default_rows() -> usize {
    1000
}

fn default_features() -> usize {
    1000
}

/// Synthetic generator and its size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SyntheticSpec {
    Additive {
        #[serde(default = "default_rows")]
        rows: usize,
        #[serde(default = "default_features")]
        features: usize,
    },
    Nonadditive {
        #[serde(default = "default_rows")]
        rows: usize,
        #[serde(default = "default_features")]
        features: usize,
    },
    Blocked(BlockedParams),
}

impl SyntheticSpec {
    /// Generates the data for master seed `seed`.
    pub fn generate(&self, seed: u64) -> crate::Result<crate::data::Synthetic> {
        let data_seed = derive_seed(seed, streams::DATA);
        match *self {
            SyntheticSpec::Additive { rows, features } => gen_additive(rows, features, data_seed),
            SyntheticSpec::Nonadditive { rows, features } => gen_nonadditive(rows, features, data_seed),
            SyntheticSpec::Blocked(p) => gen_blocked(&p, data_seed),
        }
    }
}

fn default_weight() -> f64 {
    UNINFORMATIVE_WEIGHT
}

/// A hyperdirichlet factor over named features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedTerm {
    pub features: Vec<String>,
    pub exponent: f64,
}

/// Prior weights by feature or block name. Unnamed features get
/// `default_weight`; a feature in several weighted blocks takes the largest
/// block weight, and an explicit feature weight overrides block weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    #[serde(default = "default_family")]
    pub family: Family,
    #[serde(default = "default_weight")]
    pub default_weight: f64,
    #[serde(default)]
    pub features: IndexMap<String, f64>,
    #[serde(default)]
    pub blocks: IndexMap<String, f64>,
    /// Generalized Dirichlet only: `N - 1` weights, defaulting to tail sums
    /// of the prior weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    /// Hyperdirichlet only: factors added to the Dirichlet-equivalent terms.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<NamedTerm>,
}

fn default_family() -> Family {
    Family::Dirichlet
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            family: Family::Dirichlet,
            default_weight: UNINFORMATIVE_WEIGHT,
            features: IndexMap::new(),
            blocks: IndexMap::new(),
            beta: None,
            terms: Vec::new(),
        }
    }
}

fn config_err(field: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {e}"))
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_err(field, format!("weight must be positive, got {v}")))
    }
}

impl PriorConfig {
    /// Per-feature weights α for `d`.
    pub fn weights(&self, d: &Dataset) -> Result<Vec<f64>, CliError> {
        positive("prior.default_weight", self.default_weight)?;
        let mut alpha = vec![self.default_weight; d.n_features()];
        if !self.blocks.is_empty() {
            let bm = d
                .block_matrix()
                .ok_or_else(|| config_err("prior.blocks", "the input has no block structure"))?;
            let mut block_weight: Vec<Option<f64>> = vec![None; d.n_features()];
            for (name, &w) in &self.blocks {
                let field = format!("prior.blocks.{name}");
                positive(&field, w)?;
                let b = bm
                    .block_index(name)
                    .ok_or_else(|| config_err(&field, format!("unknown block {name:?}")))?;
                for &i in bm.members(b) {
                    block_weight[i] = Some(block_weight[i].map_or(w, |old: f64| old.max(w)));
                }
            }
            for (a, bw) in alpha.iter_mut().zip(block_weight) {
                if let Some(w) = bw {
                    *a = w;
                }
            }
        }
        for (name, &w) in &self.features {
            let field = format!("prior.features.{name}");
            positive(&field, w)?;
            let i = d
                .feature_index(name)
                .ok_or_else(|| config_err(&field, format!("unknown feature {name:?}")))?;
            alpha[i] = w;
        }
        Ok(alpha)
    }

    /// Numeric prior for `d`.
    pub fn resolve(&self, d: &Dataset) -> Result<PriorSpec, CliError> {
        let alpha = self.weights(d)?;
        if self.beta.is_some() && self.family != Family::GeneralizedDirichlet {
            return Err(config_err("prior.beta", "only used by the generalized_dirichlet family"));
        }
        if !self.terms.is_empty() && self.family != Family::Hyperdirichlet {
            return Err(config_err("prior.terms", "only used by the hyperdirichlet family"));
        }
        let spec = match self.family {
            Family::Dirichlet => PriorSpec::Dirichlet { alpha: Some(alpha) },
            Family::GeneralizedDirichlet => {
                if let Some(b) = &self.beta {
                    if b.len() + 1 != d.n_features() {
                        return Err(config_err(
                            "prior.beta",
                            format!("expected {} values, got {}", d.n_features() - 1, b.len()),
                        ));
                    }
                    if let Some(v) = b.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                        return Err(config_err("prior.beta", format!("values must be positive, got {v}")));
                    }
                }
                PriorSpec::GeneralizedDirichlet {
                    alpha: Some(alpha),
                    beta: self.beta.clone(),
                }
            }
            Family::Hyperdirichlet => {
                if d.n_features() > HYPERDIRICHLET_LIMIT {
                    return Err(config_err(
                        "prior.family",
                        format!(
                            "hyperdirichlet supports at most {HYPERDIRICHLET_LIMIT} features, the input has {}",
                            d.n_features()
                        ),
                    ));
                }
                let weights = PriorWeights::new(alpha).map_err(|e| config_err("prior", e))?;
                let mut terms = dirichlet_terms(&weights);
                for (k, t) in self.terms.iter().enumerate() {
                    let field = format!("prior.terms[{k}]");
                    let idx = t
                        .features
                        .iter()
                        .map(|f| {
                            d.feature_index(f)
                                .ok_or_else(|| config_err(&field, format!("unknown feature {f:?}")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    terms.push(HyperTerm::new(idx, t.exponent).map_err(|e| config_err(&field, e))?);
                }
                PriorSpec::Hyperdirichlet { terms: Some(terms) }
            }
        };
        Ok(spec)
    }
}

/// Names listed in a truth sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub relevant: Vec<usize>,
    pub relevant_names: Vec<String>,
}

/// A resolved run: the data, the numeric pipeline settings and the config
/// with every default filled in.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub dataset: Dataset,
    pub truth: Option<GroundTruth>,
    pub pipeline: PipelineConfig,
    pub system: ConstraintSystem,
}

/// Errors while reading input data are runtime failures unless they point
/// at a misnamed column or feature.
fn data_err(field: &str, e: Error) -> CliError {
    match e {
        Error::UnknownColumn(_) | Error::UnknownFeature(_) | Error::InvalidArgument(_) => config_err(field, e),
        other => CliError::Runtime(format!("{field}: {other}")),
    }
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(field: &str, path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(field, format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(field, format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    fn load_input(&self, base: &Path) -> Result<(Dataset, Option<GroundTruth>), CliError> {
        match &self.input {
            InputConfig::Synthetic(spec) => {
                let s = spec.generate(self.seed).map_err(|e| config_err("input.synthetic", e))?;
                Ok((s.dataset, Some(s.truth)))
            }
            InputConfig::Csv(c) => {
                if c.blocks.is_some() && c.blocks_file.is_some() {
                    return Err(config_err("input.csv", "give either blocks or blocks_file, not both"));
                }
                let blocks: Option<BlockSpec> = match &c.blocks_file {
                    Some(p) => Some(read_json("input.csv.blocks_file", &resolve_path(base, p))?),
                    None => c.blocks.clone(),
                };
                let d = load_csv(resolve_path(base, &c.path), &c.label_column, blocks.as_ref())
                    .map_err(|e| data_err("input.csv", e))?;
                let truth = match &c.truth_file {
                    Some(p) => {
                        let t: TruthFile = read_json("input.csv.truth_file", &resolve_path(base, p))?;
                        let idx = t
                            .relevant_names
                            .iter()
                            .map(|n| {
                                d.feature_index(n).ok_or_else(|| {
                                    config_err("input.csv.truth_file", format!("unknown feature {n:?}"))
                                })
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        Some(GroundTruth::new(d.n_features(), idx).map_err(|e| config_err("input.csv.truth_file", e))?)
                    }
                    None => None,
                };
                Ok((d, truth))
            }
        }
    }

    /// Loads the data and validates every section. `base` is the directory
    /// that relative input paths refer to.
    pub fn prepare(mut self, seed_override: Option<u64>, base: &Path) -> Result<Prepared, CliError> {
        if let Some(s) = seed_override {
            self.seed = s;
        }
        self.selector.validate().map_err(|e| config_err("selector", e))?;
        self.ga.validate().map_err(|e| config_err("ga", e))?;
        self.mh.validate().map_err(|e| config_err("mh", e))?;
        self.evaluation.validate().map_err(|e| config_err("evaluation", e))?;
        if self.ensemble.models < 1 {
            return Err(config_err("ensemble.models", "must be >= 1"));
        }
        let f = self.ensemble.subsample_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(config_err("ensemble.subsample_fraction", format!("must lie in (0, 1], got {f}")));
        }
        if !(self.constraints.lambda.is_finite() && self.constraints.lambda > 0.0) {
            return Err(config_err(
                "constraints.lambda",
                format!("must be positive, got {}", self.constraints.lambda),
            ));
        }

        let (dataset, truth) = self.load_input(base)?;
        let n = dataset.n_features();
        let prior = self.prior.resolve(&dataset)?;
        self.constraints.resolve(n);
        let system = self.constraints.build(&dataset).map_err(|e| match e {
            Error::InvalidArgument(m) if m.starts_with("constraints.") => CliError::Config(m),
            other => config_err("constraints", other),
        })?;
        let l = self.ensemble.resolve_l(&system);
        if l < 1 || l > n {
            return Err(config_err(
                "ensemble.features_per_model",
                format!("must lie in 1..={n}, got {l}"),
            ));
        }
        self.ensemble.features_per_model = Some(l);
        let pipeline = PipelineConfig {
            selector: self.selector,
            ensemble: self.ensemble,
            prior,
            ga: self.ga,
            mh: self.mh,
        };
        Ok(Prepared {
            config: self,
            dataset,
            truth,
            pipeline,
            system,
        })
    }
}
