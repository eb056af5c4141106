//! Side constraints `A delta <= b` with logistic relaxation, block-level
//! constraints evaluated on block selections, decorrelation constraints and
//! the joint admissibility `kappa`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BlockMatrix, Dataset};
use crate::stats::average_ranks;
use crate::{Error, FeatureSet, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    Feature,
    Block,
}

/// Where a constraint came from; used for reporting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintKind {
    MaxSize,
    BlockMaxSize,
    MaxPerBlock { block: usize },
    Decorrelation { i: usize, j: usize },
    Custom { index: usize },
}

/// One row `(a, b, rho)` of the constraint system.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    kind: ConstraintKind,
    coefficients: Vec<f64>,
    bound: f64,
    rho: f64,
    scope: Scope,
    support: Vec<(usize, f64)>,
}

impl Constraint {
    /// `rho` must be positive or `f64::INFINITY` (a hard constraint).
    pub fn new(
        kind: ConstraintKind,
        coefficients: Vec<f64>,
        bound: f64,
        rho: f64,
        scope: Scope,
    ) -> Result<Self> {
        if rho.is_nan() || rho <= 0.0 {
            return Err(Error::invalid(format!(
                "constraint shape rho must be positive or infinite, got {rho}"
            )));
        }
        if !bound.is_finite() || coefficients.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("constraint coefficients and bound must be finite"));
        }
        let support = coefficients
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0.0)
            .map(|(i, &a)| (i, a))
            .collect();
        Ok(Constraint {
            kind,
            coefficients,
            bound,
            rho,
            scope,
            support,
        })
    }

    pub fn kind(&self) -> &ConstraintKind {
        &self.kind
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn is_hard(&self) -> bool {
        self.rho == f64::INFINITY
    }

    /// Short human-readable name.
    pub fn label(&self) -> String {
        match &self.kind {
            ConstraintKind::MaxSize => "max_size".into(),
            ConstraintKind::BlockMaxSize => "block_max_size".into(),
            ConstraintKind::MaxPerBlock { block } => format!("max_per_block[{block}]"),
            ConstraintKind::Decorrelation { i, j } => format!("decorrelation[{i},{j}]"),
            ConstraintKind::Custom { index } => format!("custom[{index}]"),
        }
    }

    /// `a^T x - b` for a binary vector on this constraint's scope.
    pub fn margin(&self, x: &[bool]) -> f64 {
        let lhs: f64 = self
            .support
            .iter()
            .filter(|&&(i, _)| x[i])
            .map(|&(_, a)| a)
            .sum();
        lhs - self.bound
    }

    /// Relaxed admissibility of a vector already expressed on this
    /// constraint's scope (features or block selections).
    pub fn admissibility_on(&self, x: &[bool]) -> f64 {
        relaxed_admissibility(self.margin(x), self.rho)
    }
}

/// `1` if `margin <= 0`, `0` if violated and `rho` is infinite, otherwise
/// `2 xi / (1 + xi)` with `xi = exp(-rho * margin)`.
pub fn relaxed_admissibility(margin: f64, rho: f64) -> f64 {
    if margin <= 0.0 {
        1.0
    } else if rho == f64::INFINITY {
        0.0
    } else {
        let xi = (-rho * margin).exp();
        2.0 * xi / (1.0 + xi)
    }
}

/// Block selection vector: block `w` is selected iff `(B delta)_w >= 1`.
pub fn block_selection(blocks: &BlockMatrix, delta: &FeatureSet) -> Vec<bool> {
    blocks.block_selection(delta)
}

/// Admissibility of a single constraint; block-scoped constraints need the
/// block matrix.
pub fn admissibility(
    c: &Constraint,
    delta: &FeatureSet,
    blocks: Option<&BlockMatrix>,
) -> Result<f64> {
    match c.scope {
        Scope::Feature => {
            if c.coefficients.len() != delta.len() {
                return Err(Error::DimensionMismatch {
                    expected: c.coefficients.len(),
                    found: delta.len(),
                });
            }
            Ok(c.admissibility_on(delta.bits()))
        }
        Scope::Block => {
            let b = blocks.ok_or_else(|| {
                Error::invalid("block-scoped constraint evaluated without a block matrix")
            })?;
            if b.n_features() != delta.len() {
                return Err(Error::DimensionMismatch {
                    expected: b.n_features(),
                    found: delta.len(),
                });
            }
            if c.coefficients.len() != b.n_blocks() {
                return Err(Error::DimensionMismatch {
                    expected: b.n_blocks(),
                    found: c.coefficients.len(),
                });
            }
            Ok(c.admissibility_on(&b.block_selection(delta)))
        }
    }
}

/// `K` constraints over `N` features, an optional block matrix and the
/// overall constraint strength `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    n_features: usize,
    constraints: Vec<Constraint>,
    block_matrix: Option<BlockMatrix>,
    lambda: f64,
    has_block_scope: bool,
}

impl ConstraintSystem {
    pub fn new(
        n_features: usize,
        constraints: Vec<Constraint>,
        block_matrix: Option<BlockMatrix>,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        if lambda < 1.0 {
            log::warn!(
                "lambda = {lambda} < 1 is not recommended: weak constraints let the \
                 monotone utility favour selecting every feature"
            );
        }
        if let Some(b) = &block_matrix {
            if b.n_features() != n_features {
                return Err(Error::DimensionMismatch {
                    expected: n_features,
                    found: b.n_features(),
                });
            }
        }
        for c in &constraints {
            let expected = match c.scope {
                Scope::Feature => n_features,
                Scope::Block => block_matrix
                    .as_ref()
                    .ok_or_else(|| {
                        Error::invalid(format!("{} is block-scoped but no block matrix is set", c.label()))
                    })?
                    .n_blocks(),
            };
            if c.coefficients.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    found: c.coefficients.len(),
                });
            }
        }
        let has_block_scope = constraints.iter().any(|c| c.scope == Scope::Block);
        Ok(ConstraintSystem {
            n_features,
            constraints,
            block_matrix,
            lambda,
            has_block_scope,
        })
    }

    /// No constraints, `lambda = 1`.
    pub fn unconstrained(n_features: usize) -> Self {
        ConstraintSystem {
            n_features,
            constraints: Vec::new(),
            block_matrix: None,
            lambda: 1.0,
            has_block_scope: false,
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn block_matrix(&self) -> Option<&BlockMatrix> {
        self.block_matrix.as_ref()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Bound of the first max-size constraint, if any.
    pub fn max_size_bound(&self) -> Option<f64> {
        self.constraints
            .iter()
            .find(|c| c.kind == ConstraintKind::MaxSize)
            .map(|c| c.bound)
    }

    /// Per-constraint admissibilities in constraint order.
    pub fn admissibilities(&self, delta: &FeatureSet) -> Vec<f64> {
        let blocks = self.block_selection_if_needed(delta);
        self.constraints
            .iter()
            .map(|c| self.eval(c, delta, blocks.as_deref()))
            .collect()
    }

    /// `kappa(delta)`: the product of all admissibilities, 1 for an empty
    /// system.
    pub fn joint_admissibility(&self, delta: &FeatureSet) -> f64 {
        debug_assert_eq!(delta.len(), self.n_features);
        let blocks = self.block_selection_if_needed(delta);
        let mut kappa = 1.0;
        for c in &self.constraints {
            kappa *= self.eval(c, delta, blocks.as_deref());
            if kappa == 0.0 {
                break;
            }
        }
        kappa
    }

    /// True when every hard constraint is satisfied.
    pub fn satisfies_hard(&self, delta: &FeatureSet) -> bool {
        let blocks = self.block_selection_if_needed(delta);
        self.constraints
            .iter()
            .filter(|c| c.is_hard())
            .all(|c| self.eval(c, delta, blocks.as_deref()) == 1.0)
    }

    fn block_selection_if_needed(&self, delta: &FeatureSet) -> Option<Vec<bool>> {
        if self.has_block_scope {
            self.block_matrix.as_ref().map(|b| b.block_selection(delta))
        } else {
            None
        }
    }

    fn eval(&self, c: &Constraint, delta: &FeatureSet, blocks: Option<&[bool]>) -> f64 {
        match c.scope {
            Scope::Feature => c.admissibility_on(delta.bits()),
            Scope::Block => c.admissibility_on(blocks.expect("block selection computed")),
        }
    }
}

/// `kappa(delta)` for a constraint system.
pub fn joint_admissibility(sys: &ConstraintSystem, delta: &FeatureSet) -> f64 {
    sys.joint_admissibility(delta)
}

/// At most `b` selected features.
pub fn max_size(n: usize, b: usize, rho: f64) -> Result<Constraint> {
    if b < 1 || b > n {
        return Err(Error::invalid(format!("max-size bound {b} outside 1..={n}")));
    }
    Constraint::new(ConstraintKind::MaxSize, vec![1.0; n], b as f64, rho, Scope::Feature)
}

/// At most `b` selected blocks (block scope).
pub fn block_max_size(n_blocks: usize, b: usize, rho: f64) -> Result<Constraint> {
    if b < 1 || b > n_blocks {
        return Err(Error::invalid(format!(
            "block-max-size bound {b} outside 1..={n_blocks}"
        )));
    }
    Constraint::new(
        ConstraintKind::BlockMaxSize,
        vec![1.0; n_blocks],
        b as f64,
        rho,
        Scope::Block,
    )
}

/// At most `b` selected features inside block `w` (feature scope, `a` is
/// row `w` of the block matrix).
pub fn max_per_block(blocks: &BlockMatrix, w: usize, b: usize, rho: f64) -> Result<Constraint> {
    if w >= blocks.n_blocks() {
        return Err(Error::invalid(format!("block index {w} out of range")));
    }
    if b < 1 {
        return Err(Error::invalid("max-per-block bound must be at least 1"));
    }
    let mut a = vec![0.0; blocks.n_features()];
    for &i in blocks.members(w) {
        a[i] = 1.0;
    }
    Constraint::new(
        ConstraintKind::MaxPerBlock { block: w },
        a,
        b as f64,
        rho,
        Scope::Feature,
    )
}

/// One max-per-block constraint for every block.
pub fn max_per_block_all(blocks: &BlockMatrix, b: usize, rho: f64) -> Result<Vec<Constraint>> {
    (0..blocks.n_blocks())
        .map(|w| max_per_block(blocks, w, b, rho))
        .collect()
}

/// Spearman rank correlation matrix (upper triangle used). Constant columns
/// correlate 0 with everything.
pub fn spearman_matrix(d: &Dataset) -> Vec<Vec<f64>> {
    let n = d.n_features();
    let standardized: Vec<Option<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let col = d.column(j).to_vec();
            let ranks = average_ranks(&col);
            let m = ranks.iter().sum::<f64>() / ranks.len() as f64;
            let centered: Vec<f64> = ranks.iter().map(|r| r - m).collect();
            let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm > 0.0).then(|| centered.iter().map(|v| v / norm).collect())
        })
        .collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| match (&standardized[i], &standardized[j]) {
                    (Some(a), Some(b)) => {
                        let r: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                        r.clamp(-1.0, 1.0)
                    }
                    _ => 0.0,
                })
                .collect()
        })
        .collect()
}

/// Shape for a decorrelation constraint: the odds `|tau| / (1 - |tau|)`.
pub fn correlation_odds(tau: f64) -> f64 {
    let t = tau.abs();
    if t >= 1.0 {
        f64::INFINITY
    } else {
        t / (1.0 - t)
    }
}

/// Cannot-link constraints between every pair `i < j` whose absolute
/// Spearman correlation exceeds `tau`.
pub fn decorrelation(d: &Dataset, tau: f64) -> Result<Vec<Constraint>> {
    if d.n_samples() < 2 {
        return Err(Error::invalid("decorrelation needs at least two samples"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("tau must lie in (0, 1), got {tau}")));
    }
    let n = d.n_features();
    let corr = spearman_matrix(d);
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let t = corr[i][j].abs();
            if t > tau {
                let mut a = vec![0.0; n];
                a[i] = 1.0;
                a[j] = 1.0;
                out.push(Constraint::new(
                    ConstraintKind::Decorrelation { i, j },
                    a,
                    1.0,
                    correlation_odds(t),
                    Scope::Feature,
                )?);
            }
        }
    }
    Ok(out)
}

/// Default max-size bound by feature count: 5 below 100 features, 10 up to
/// 1000, 20 beyond; never more than `n`.
pub fn default_max_size(n: usize) -> usize {
    let b = if n < 100 {
        5
    } else if n <= 1000 {
        10
    } else {
        20
    };
    b.min(n).max(1)
}

/// Serde helpers for shape parameters: finite numbers as JSON numbers,
/// infinity as the string `"inf"`.
pub mod rho_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rho: &f64, s: S) -> Result<S::Ok, S::Error> {
        if rho.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*rho)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v >= 0.0 => Ok(v),
            Raw::Num(v) => Err(de::Error::custom(format!("rho must be >= 0, got {v}"))),
            Raw::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "hard" => Ok(f64::INFINITY),
                other => Err(de::Error::custom(format!(
                    "rho must be a number or \"inf\", got {other:?}"
                ))),
            },
        }
    }
}

fn default_rho() -> f64 {
    1.0
}

fn default_lambda() -> f64 {
    1.0
}

fn default_tau() -> f64 {
    0.4
}

/// Cardinality bound with its shape. `rho = 0` omits the constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeBound {
    #[serde(default)]
    pub b: Option<usize>,
    #[serde(default = "default_rho", with = "rho_serde")]
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecorrelationSpec {
    #[serde(default = "default_tau")]
    pub tau: f64,
}

/// A user-supplied row `a^T x <= b` on feature or block scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomRow {
    pub a: Vec<f64>,
    pub b: f64,
    #[serde(default = "default_rho", with = "rho_serde")]
    pub rho: f64,
    #[serde(default)]
    pub scope: Scope,
}

/// Declarative constraint configuration, turned into a [`ConstraintSystem`]
/// against a concrete dataset (decorrelation depends on the data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "ConstraintSpec::default_max_size")]
    pub max_size: Option<SizeBound>,
    #[serde(default)]
    pub block_max_size: Option<SizeBound>,
    #[serde(default)]
    pub max_per_block: Option<SizeBound>,
    #[serde(default)]
    pub decorrelation: Option<DecorrelationSpec>,
    #[serde(default)]
    pub custom: Vec<CustomRow>,
}

impl Default for ConstraintSpec {
    fn default() -> Self {
        ConstraintSpec {
            lambda: 1.0,
            max_size: Self::default_max_size(),
            block_max_size: None,
            max_per_block: None,
            decorrelation: None,
            custom: Vec::new(),
        }
    }
}

impl ConstraintSpec {
    fn default_max_size() -> Option<SizeBound> {
        Some(SizeBound { b: None, rho: 1.0 })
    }

    /// Fill in the size-rule max-size bound for `n` features.
    pub fn resolve(&mut self, n: usize) {
        if let Some(ms) = &mut self.max_size {
            ms.b.get_or_insert(default_max_size(n));
        }
    }

    pub fn build(&self, d: &Dataset) -> Result<ConstraintSystem> {
        let n = d.n_features();
        let blocks = d.block_matrix();
        let need_blocks = |what: &str| {
            blocks.ok_or_else(|| {
                Error::invalid(format!("constraints.{what}: the input has no block structure"))
            })
        };
        let mut out = Vec::new();
        if let Some(ms) = self.max_size.filter(|s| s.rho > 0.0) {
            let b = ms.b.unwrap_or_else(|| default_max_size(n));
            out.push(max_size(n, b, ms.rho).map_err(|e| prefix("max_size", e))?);
        }
        if let Some(bms) = self.block_max_size.filter(|s| s.rho > 0.0) {
            let bm = need_blocks("block_max_size")?;
            let b = bms
                .b
                .ok_or_else(|| Error::invalid("constraints.block_max_size.b: missing bound"))?;
            out.push(block_max_size(bm.n_blocks(), b, bms.rho).map_err(|e| prefix("block_max_size", e))?);
        }
        if let Some(mpb) = self.max_per_block.filter(|s| s.rho > 0.0) {
            let bm = need_blocks("max_per_block")?;
            let b = mpb
                .b
                .ok_or_else(|| Error::invalid("constraints.max_per_block.b: missing bound"))?;
            out.extend(max_per_block_all(bm, b, mpb.rho).map_err(|e| prefix("max_per_block", e))?);
        }
        if let Some(dc) = &self.decorrelation {
            out.extend(decorrelation(d, dc.tau).map_err(|e| prefix("decorrelation", e))?);
        }
        for (k, row) in self.custom.iter().enumerate() {
            if row.rho == 0.0 {
                continue;
            }
            let expected = match row.scope {
                Scope::Block => need_blocks(&format!("custom[{k}]"))?.n_blocks(),
                Scope::Feature => n,
            };
            if row.a.len() != expected {
                return Err(prefix(
                    &format!("custom[{k}].a"),
                    Error::DimensionMismatch {
                        expected,
                        found: row.a.len(),
                    },
                ));
            }
            out.push(
                Constraint::new(
                    ConstraintKind::Custom { index: k },
                    row.a.clone(),
                    row.b,
                    row.rho,
                    row.scope,
                )
                .map_err(|e| prefix(&format!("custom[{k}]"), e))?,
            );
        }
        ConstraintSystem::new(n, out, blocks.cloned(), self.lambda).map_err(|e| prefix("lambda", e))
    }
}

fn prefix(field: &str, e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) if m.starts_with("constraints.") => Error::InvalidArgument(m),
        other => Error::InvalidArgument(format!("constraints.{field}: {other}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    const SOFT_AT_ONE: f64 = 0.537_882_842_739_990_4;

    fn ones3() -> Constraint {
        Constraint::new(ConstraintKind::Custom { index: 0 }, vec![1.0; 3], 2.0, 1.0, Scope::Feature)
            .unwrap()
    }

    #[test]
    fn satisfied_at_boundary() {
        let mut c = ones3();
        let d = FeatureSet::from_indices(3, &[0, 1]);
        for rho in [0.01, 1.0, 50.0, f64::INFINITY] {
            c.rho = rho;
            assert_eq!(admissibility(&c, &d, None).unwrap(), 1.0);
        }
    }

    #[test]
    fn hard_violation_is_zero() {
        let mut c = ones3();
        c.rho = f64::INFINITY;
        assert_eq!(admissibility(&c, &FeatureSet::full(3), None).unwrap(), 0.0);
    }

    #[test]
    fn soft_violation_margin_one() {
        // 2 e^-1 / (1 + e^-1) evaluated independently
        let e = (-1.0f64).exp();
        let oracle = 2.0 * e / (1.0 + e);
        assert!((oracle - SOFT_AT_ONE).abs() < 1e-15);
        let v = admissibility(&ones3(), &FeatureSet::full(3), None).unwrap();
        assert!((v - 0.537883).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch_detected() {
        assert!(admissibility(&ones3(), &FeatureSet::full(4), None).is_err());
    }

    #[test]
    fn block_selection_examples() {
        let id = BlockMatrix::identity(3);
        let d = FeatureSet::from_indices(3, &[0, 2]);
        assert_eq!(block_selection(&id, &d), d.bits().to_vec());
        let b = BlockMatrix::from_dense(&[vec![1, 1]]).unwrap();
        assert_eq!(block_selection(&b, &FeatureSet::from_indices(2, &[1])), vec![true]);
        assert_eq!(block_selection(&b, &FeatureSet::empty(2)), vec![false]);
    }

    #[test]
    fn joint_products() {
        let empty = ConstraintSystem::unconstrained(3);
        assert_eq!(empty.joint_admissibility(&FeatureSet::full(3)), 1.0);

        let hard = ConstraintSystem::new(3, vec![max_size(3, 1, f64::INFINITY).unwrap()], None, 1.0)
            .unwrap();
        assert_eq!(hard.joint_admissibility(&FeatureSet::full(3)), 0.0);

        // margin m with rho = ln 3 / m gives 2 (1/3) / (4/3) = 0.5
        let rho = 3f64.ln();
        let c1 = max_size(3, 1, rho).unwrap();
        let c2 = max_size(3, 1, rho).unwrap();
        let sys = ConstraintSystem::new(3, vec![c1, c2], None, 1.0).unwrap();
        let d = FeatureSet::from_indices(3, &[0, 1]);
        assert!((sys.admissibilities(&d)[0] - 0.5).abs() < 1e-12);
        assert!((sys.joint_admissibility(&d) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn max_size_examples() {
        let c = max_size(5, 2, 1.0).unwrap();
        assert_eq!(c.rho(), 1.0);
        assert_eq!(admissibility(&c, &FeatureSet::from_indices(5, &[0, 3]), None).unwrap(), 1.0);
        let v = admissibility(&c, &FeatureSet::from_indices(5, &[0, 1, 3]), None).unwrap();
        assert!((v - SOFT_AT_ONE).abs() < 1e-12);
        assert!(max_size(5, 0, 1.0).is_err());
        assert!(max_size(5, 6, 1.0).is_err());
    }

    #[test]
    fn block_constraints() {
        let b = BlockMatrix::from_dense(&[vec![1, 1, 1, 0], vec![0, 0, 0, 1]]).unwrap();
        let mpb = max_per_block_all(&b, 2, f64::INFINITY).unwrap();
        assert_eq!(mpb.len(), 2);
        let sys = ConstraintSystem::new(4, mpb, Some(b.clone()), 1.0).unwrap();
        assert_eq!(sys.joint_admissibility(&FeatureSet::from_indices(4, &[0, 1, 2])), 0.0);
        assert_eq!(sys.joint_admissibility(&FeatureSet::from_indices(4, &[0, 1, 3])), 1.0);

        let bms = block_max_size(2, 1, f64::INFINITY).unwrap();
        let sys = ConstraintSystem::new(4, vec![bms], Some(b), 1.0).unwrap();
        assert_eq!(sys.joint_admissibility(&FeatureSet::from_indices(4, &[0, 1, 2])), 1.0);
        assert_eq!(sys.joint_admissibility(&FeatureSet::from_indices(4, &[0, 3])), 0.0);
    }

    #[test]
    fn block_scope_requires_matrix() {
        let bms = block_max_size(2, 1, 1.0).unwrap();
        assert!(ConstraintSystem::new(4, vec![bms.clone()], None, 1.0).is_err());
        assert!(admissibility(&bms, &FeatureSet::full(4), None).is_err());
    }

    #[test]
    fn rho_must_be_positive() {
        assert!(Constraint::new(ConstraintKind::MaxSize, vec![1.0], 1.0, 0.0, Scope::Feature).is_err());
        assert!(Constraint::new(ConstraintKind::MaxSize, vec![1.0], 1.0, f64::NAN, Scope::Feature).is_err());
    }

    #[test]
    fn lambda_validation() {
        assert!(ConstraintSystem::new(2, vec![], None, 0.0).is_err());
        assert!(ConstraintSystem::new(2, vec![], None, 0.5).is_ok());
    }

    #[test]
    fn odds_examples() {
        assert_eq!(correlation_odds(0.5), 1.0);
        assert!((correlation_odds(0.8) - 4.0).abs() < 1e-12);
        assert_eq!(correlation_odds(-1.0), f64::INFINITY);
    }

    fn dataset(cols: &[Vec<f64>]) -> Dataset {
        let n = cols[0].len();
        let m = Array2::from_shape_fn((n, cols.len()), |(r, c)| cols[c][r]);
        Dataset::from_matrix(m, (0..n).map(|i| (i % 2) as i64).collect()).unwrap()
    }

    #[test]
    fn decorrelation_pairs() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v * v).collect(); // monotone, rho = 1
        let z = vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0];
        let c = vec![2.0; 10];
        let d = dataset(&[x, y, z, c]);
        let corr = spearman_matrix(&d);
        assert!((corr[0][1] - 1.0).abs() < 1e-12);
        assert_eq!(corr[0][3], 0.0);
        let cons = decorrelation(&d, 0.4).unwrap();
        let pairs: Vec<_> = cons.iter().map(|c| c.kind().clone()).collect();
        assert!(pairs.contains(&ConstraintKind::Decorrelation { i: 0, j: 1 }));
        assert!(cons.iter().all(|c| match c.kind() {
            ConstraintKind::Decorrelation { i, j } => i < j && *j != 3 && *i != 3,
            _ => false,
        }));
        for c in &cons {
            if let ConstraintKind::Decorrelation { i, j } = *c.kind() {
                let t = corr[i][j].abs();
                assert!(t > 0.4);
                assert!((c.rho() - correlation_odds(t)).abs() < 1e-12 || c.is_hard());
                assert_eq!(c.bound(), 1.0);
            }
        }
        assert!(decorrelation(&d, 1.0).is_err());
    }

    #[test]
    fn weak_pair_emits_nothing() {
        // Spearman 0.3 between a and b
        let a: Vec<f64> = (1..=10).map(f64::from).collect();
        let b = vec![4.0, 10.0, 1.0, 8.0, 3.0, 6.0, 2.0, 9.0, 7.0, 5.0];
        let d = dataset(&[a, b]);
        let t = spearman_matrix(&d)[0][1].abs();
        assert!(t <= 0.4, "{t}");
        assert!(decorrelation(&d, 0.4).unwrap().is_empty());
    }

    #[test]
    fn spec_filters_zero_rho_and_resolves_bound() {
        let d = dataset(&vec![vec![1.0, 2.0, 3.0, 4.0]; 3]);
        let mut spec = ConstraintSpec::default();
        spec.resolve(3);
        assert_eq!(spec.max_size.unwrap().b, Some(3));
        spec.custom.push(CustomRow { a: vec![1.0, 0.0, 0.0], b: 0.0, rho: 0.0, scope: Scope::Feature });
        let sys = spec.build(&d).unwrap();
        assert_eq!(sys.constraints().len(), 1);
        spec.max_size = Some(SizeBound { b: Some(2), rho: 0.0 });
        assert!(spec.build(&d).unwrap().constraints().is_empty());
        spec.block_max_size = Some(SizeBound { b: Some(1), rho: 1.0 });
        assert!(spec.build(&d).is_err());
    }

    #[test]
    fn rho_serde_roundtrip() {
        let s = SizeBound { b: Some(3), rho: f64::INFINITY };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"b":3,"rho":"inf"}"#);
        assert_eq!(serde_json::from_str::<SizeBound>(&j).unwrap(), s);
        assert!(serde_json::from_str::<SizeBound>(r#"{"rho":-1}"#).is_err());
    }

    #[test]
    fn size_rule() {
        assert_eq!(default_max_size(30), 5);
        assert_eq!(default_max_size(100), 10);
        assert_eq!(default_max_size(1000), 10);
        assert_eq!(default_max_size(1001), 20);
        assert_eq!(default_max_size(3), 3);
    }

    proptest! {
        #[test]
        fn converges_to_hard_constraint(margin in 1i32..50, rho_scale in 0.0f64..1.0) {
            let m = f64::from(margin);
            prop_assert!(relaxed_admissibility(m, 50.0) < 1e-6);
            prop_assert!(relaxed_admissibility(m, 50.0 + rho_scale) <= 2.0 * (-50.0f64).exp());
        }

        #[test]
        fn nonincreasing_in_margin(m1 in -5.0f64..10.0, dm in 0.0f64..10.0, rho in 0.01f64..20.0) {
            prop_assert!(relaxed_admissibility(m1 + dm, rho) <= relaxed_admissibility(m1, rho));
        }

        #[test]
        fn kappa_in_unit_interval_and_permutation_equivariant(
            bits in prop::collection::vec(any::<bool>(), 6),
            bounds in prop::collection::vec(0usize..6, 1..4),
            rhos in prop::collection::vec(0.1f64..5.0, 4),
            shift in 0usize..6,
        ) {
            let n = 6;
            let cons: Vec<Constraint> = bounds.iter().enumerate().map(|(k, &b)| {
                let a: Vec<f64> = (0..n).map(|i| ((i + k) % 3) as f64).collect();
                Constraint::new(ConstraintKind::Custom { index: k }, a, b as f64, rhos[k], Scope::Feature).unwrap()
            }).collect();
            let sys = ConstraintSystem::new(n, cons.clone(), None, 1.0).unwrap();
            let delta = FeatureSet::from_bits(bits.clone());
            let kappa = sys.joint_admissibility(&delta);
            prop_assert!((0.0..=1.0).contains(&kappa));
            let all_ok = cons.iter().all(|c| c.margin(delta.bits()) <= 0.0);
            prop_assert_eq!(kappa == 1.0, all_ok);

            // relabel features by a cyclic shift and reverse the constraint rows
            let perm = |i: usize| (i + shift) % n;
            let mut pbits = vec![false; n];
            for i in 0..n { pbits[perm(i)] = bits[i]; }
            let pcons: Vec<Constraint> = cons.iter().rev().map(|c| {
                let mut a = vec![0.0; n];
                for i in 0..n { a[perm(i)] = c.coefficients()[i]; }
                Constraint::new(c.kind().clone(), a, c.bound(), c.rho(), Scope::Feature).unwrap()
            }).collect();
            let psys = ConstraintSystem::new(n, pcons, None, 1.0).unwrap();
            let pk = psys.joint_admissibility(&FeatureSet::from_bits(pbits));
            prop_assert!((pk - kappa).abs() < 1e-12);
        }
    }
}
