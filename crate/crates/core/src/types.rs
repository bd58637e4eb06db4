//! Shared domain types: samples, datasets, standardization and the result
//! container every attribution method returns.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns whose sample standard deviation falls below this are constant.
pub const CONSTANT_COLUMN_TOL: f64 = 1e-12;

/// Standard deviation substituted for constant columns when flooring is enabled.
pub const STD_FLOOR: f64 = 1e-6;

/// One observation `(x, y)` of the test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub x: Vec<f64>,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_key: Option<String>,
}

impl Sample {
    pub fn new(id: impl Into<String>, x: Vec<f64>, y: f64) -> Self {
        Sample {
            id: id.into(),
            x,
            y,
            group_key: None,
        }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group_key = Some(group.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// An ordered collection of samples sharing one feature layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<Sample>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset and checks every invariant, failing with the full report.
    pub fn new(samples: Vec<Sample>, feature_names: Vec<String>) -> Result<Self> {
        let data = Dataset {
            samples,
            feature_names,
        };
        let report = validate_dataset(&data);
        if report.passed() {
            Ok(data)
        } else {
            Err(Error::InvalidDataset(report))
        }
    }

    /// Builds a dataset with features named `x1..xM`.
    pub fn with_default_names(samples: Vec<Sample>) -> Result<Self> {
        let m = samples.first().map_or(0, Sample::dim);
        Self::new(samples, default_feature_names(m))
    }

    /// Skips validation. Run [`validate_dataset`] before relying on invariants.
    pub fn unchecked(samples: Vec<Sample>, feature_names: Vec<String>) -> Self {
        Dataset {
            samples,
            feature_names,
        }
    }

    /// Single-sample dataset; useful for point-wise attribution where the
    /// `M >= 2` and uniqueness invariants are trivially about one row.
    pub fn single(sample: Sample) -> Self {
        let names = default_feature_names(sample.dim());
        Dataset::unchecked(vec![sample], names)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of features `M`.
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Subset by sample index, preserving order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Feature column `j` as a vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.x[j]).collect()
    }

    /// Groups of sample indices by `group_key`, in order of first appearance.
    /// Samples without a key form singleton groups named by their id.
    pub fn groups(&self) -> Vec<(String, Vec<usize>)> {
        let mut order: Vec<(String, Vec<usize>)> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        for (i, s) in self.samples.iter().enumerate() {
            let key = s.group_key.clone().unwrap_or_else(|| s.id.clone());
            match index.get(&key) {
                Some(&g) => order[g].1.push(i),
                None => {
                    index.insert(key.clone(), order.len());
                    order.push((key, vec![i]));
                }
            }
        }
        order
    }
}

pub fn default_feature_names(m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("x{i}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ValidationIssue {
    Empty,
    TooFewFeatures {
        features: usize,
    },
    FeatureNameCount {
        names: usize,
        features: usize,
    },
    RowWidth {
        row: usize,
        expected: usize,
        got: usize,
    },
    NonFinite {
        row: usize,
        column: usize,
    },
    NonFiniteTarget {
        row: usize,
    },
    DuplicateId {
        id: String,
        rows: Vec<usize>,
    },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::Empty => write!(f, "dataset is empty"),
            ValidationIssue::TooFewFeatures { features } => {
                write!(f, "need at least 2 features, found {features}")
            }
            ValidationIssue::FeatureNameCount { names, features } => {
                write!(f, "{names} feature names for {features} features")
            }
            ValidationIssue::RowWidth { row, expected, got } => {
                write!(f, "row {row} has {got} features, expected {expected}")
            }
            ValidationIssue::NonFinite { row, column } => {
                write!(f, "non-finite value at row {row}, column {column}")
            }
            ValidationIssue::NonFiniteTarget { row } => {
                write!(f, "non-finite target at row {row}")
            }
            ValidationIssue::DuplicateId { id, rows } => {
                write!(f, "id `{id}` used by rows {rows:?}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "ok");
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Checks every dataset invariant and reports all violations at once.
/// Row indices are zero-based positions in the sample list.
pub fn validate_dataset(data: &Dataset) -> ValidationReport {
    let mut issues = Vec::new();
    if data.samples.is_empty() {
        issues.push(ValidationIssue::Empty);
    }
    let m = data.feature_names.len();
    if m < 2 {
        issues.push(ValidationIssue::TooFewFeatures { features: m });
    }
    if let Some(first) = data.samples.first() {
        if first.dim() != m {
            issues.push(ValidationIssue::FeatureNameCount {
                names: m,
                features: first.dim(),
            });
        }
    }
    let expected = data.samples.first().map_or(m, Sample::dim);
    let mut ids: HashMap<&str, Vec<usize>> = HashMap::new();
    for (row, s) in data.samples.iter().enumerate() {
        if s.dim() != expected {
            issues.push(ValidationIssue::RowWidth {
                row,
                expected,
                got: s.dim(),
            });
        }
        for (column, v) in s.x.iter().enumerate() {
            if !v.is_finite() {
                issues.push(ValidationIssue::NonFinite { row, column });
            }
        }
        if !s.y.is_finite() {
            issues.push(ValidationIssue::NonFiniteTarget { row });
        }
        ids.entry(s.id.as_str()).or_default().push(row);
    }
    let mut dups: Vec<_> = ids.into_iter().filter(|(_, rows)| rows.len() > 1).collect();
    dups.sort_by_key(|(_, rows)| rows[0]);
    for (id, rows) in dups {
        issues.push(ValidationIssue::DuplicateId {
            id: id.to_string(),
            rows,
        });
    }
    ValidationReport { issues }
}

/// Per-feature affine map to zero mean and unit variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Standardizer {
    pub fn new(means: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        if means.len() != stds.len() {
            return Err(Error::DimensionMismatch {
                expected: means.len(),
                got: stds.len(),
            });
        }
        if let Some(i) = stds.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid(format!(
                "standard deviation {} for feature {i} must be positive",
                stds[i]
            )));
        }
        Ok(Standardizer { means, stds })
    }

    /// The identity map on `m` features.
    pub fn identity(m: usize) -> Self {
        Standardizer {
            means: vec![0.0; m],
            stds: vec![1.0; m],
        }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn destandardize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    /// Converts a displacement from standardized to original units.
    pub fn scale_delta(&self, delta: &[f64]) -> Vec<f64> {
        delta.iter().zip(&self.stds).map(|(d, s)| d * s).collect()
    }

    /// Applies the map to every sample; targets are left untouched.
    pub fn standardize_dataset(&self, data: &Dataset) -> Dataset {
        let samples = data
            .samples
            .iter()
            .map(|s| Sample {
                x: self.standardize(&s.x),
                ..s.clone()
            })
            .collect();
        Dataset::unchecked(samples, data.feature_names.clone())
    }
}

/// Fits means and sample standard deviations (n - 1 denominator).
pub fn fit_standardizer(data: &Dataset) -> Result<Standardizer> {
    fit_standardizer_with(data, false)
}

/// As [`fit_standardizer`]; with `floor_constant` a zero-variance column gets
/// std [`STD_FLOOR`] instead of failing.
pub fn fit_standardizer_with(data: &Dataset, floor_constant: bool) -> Result<Standardizer> {
    if data.is_empty() {
        return Err(Error::invalid("cannot standardize an empty dataset"));
    }
    let m = data.dim();
    let n = data.len() as f64;
    let mut means = vec![0.0; m];
    let mut stds = vec![0.0; m];
    for j in 0..m {
        let col = data.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let std = if data.len() > 1 {
            (ss / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        means[j] = mean;
        stds[j] = if std < CONSTANT_COLUMN_TOL {
            if !floor_constant {
                return Err(Error::ConstantColumn {
                    name: data.feature_names[j].clone(),
                    index: j,
                });
            }
            STD_FLOOR
        } else {
            std
        };
    }
    Ok(Standardizer { means, stds })
}

/// Hyperparameters of the likelihood-compensation solver. All lengths and
/// widths are in standardized feature units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LcHyperParams {
    /// ℓ2 strength.
    pub lambda: f64,
    /// ℓ1 strength.
    pub nu: f64,
    pub kappa0: f64,
    pub kappa_decay: f64,
    pub max_iter: usize,
    /// Threshold on `‖δ_new − δ_old‖₂`.
    pub delta_tol: f64,
    /// Consecutive small steps required to declare convergence.
    pub patience: usize,
    /// Ridge term of the sampled-gradient least squares.
    pub epsilon: f64,
    /// Vicinity draws per gradient estimate.
    pub n_s: usize,
    /// Per-feature vicinity variances.
    pub eta: Vec<f64>,
    pub seed: u64,
}

impl LcHyperParams {
    pub fn for_dim(m: usize) -> Self {
        LcHyperParams {
            lambda: 0.5,
            nu: 0.1,
            kappa0: 0.1,
            kappa_decay: 0.98,
            max_iter: 500,
            delta_tol: 1e-4,
            patience: 3,
            epsilon: 1e-6,
            n_s: 1000,
            eta: vec![1.0; m],
            seed: 0,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return fail(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return fail(format!("nu must be >= 0, got {}", self.nu));
        }
        if !(self.kappa0 > 0.0) || !self.kappa0.is_finite() {
            return fail(format!("kappa0 must be > 0, got {}", self.kappa0));
        }
        if !(self.kappa_decay > 0.0 && self.kappa_decay <= 1.0) {
            return fail(format!(
                "kappa_decay must lie in (0, 1], got {}",
                self.kappa_decay
            ));
        }
        if self.max_iter == 0 {
            return fail("max_iter must be positive".into());
        }
        if !(self.epsilon > 0.0) {
            return fail(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if self.n_s < m + 1 {
            return fail(format!(
                "n_s must be at least M + 1 = {}, got {}",
                m + 1,
                self.n_s
            ));
        }
        if self.eta.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.eta.len(),
            });
        }
        if self.eta.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return fail("eta entries must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "lc")]
    Lc,
    #[serde(rename = "z")]
    Z,
    #[serde(rename = "lime+")]
    LimePlus,
    #[serde(rename = "sv+")]
    SvPlus,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Lc, Method::Z, Method::LimePlus, Method::SvPlus];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lc => "lc",
            Method::Z => "z",
            Method::LimePlus => "lime+",
            Method::SvPlus => "sv+",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lc" => Ok(Method::Lc),
            "z" | "zscore" | "z-score" => Ok(Method::Z),
            "lime+" | "lime" | "limeplus" => Ok(Method::LimePlus),
            "sv+" | "sv" | "svplus" | "shap" => Ok(Method::SvPlus),
            other => Err(Error::invalid(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    pub converged: bool,
}

/// Per-variable responsibility scores produced by one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub method: Method,
    pub scores: Vec<f64>,
    pub sample_ids: Vec<String>,
    pub diagnostics: Diagnostics,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn data(rows: &[[f64; 2]]) -> Dataset {
        let samples = rows
            .iter()
            .enumerate()
            .map(|(i, r)| Sample::new(format!("s{i}"), r.to_vec(), 0.0))
            .collect();
        Dataset::with_default_names(samples).unwrap()
    }

    #[test]
    fn symmetric_column_has_unit_std() {
        let st = fit_standardizer(&data(&[[-1.0, 0.0], [0.0, 2.0], [1.0, 4.0]])).unwrap();
        assert_relative_eq!(st.means()[0], 0.0);
        assert_relative_eq!(st.stds()[0], 1.0);
        assert_relative_eq!(st.means()[1], 2.0);
        assert_relative_eq!(st.stds()[1], 2.0);
    }

    #[test]
    fn constant_column_is_rejected() {
        let d = data(&[[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]);
        match fit_standardizer(&d) {
            Err(Error::ConstantColumn { name, index }) => {
                assert_eq!(name, "x1");
                assert_eq!(index, 0);
            }
            other => panic!("expected ConstantColumn, got {other:?}"),
        }
        let floored = fit_standardizer_with(&d, true).unwrap();
        assert_eq!(floored.stds()[0], STD_FLOOR);
    }

    #[test]
    fn two_point_column_uses_n_minus_one() {
        let st = fit_standardizer(&data(&[[0.0, 0.0], [2.0, 1.0]])).unwrap();
        assert_relative_eq!(st.means()[0], 1.0);
        assert_relative_eq!(st.stds()[0], 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn clean_dataset_passes() {
        let d = Dataset::unchecked(
            (0..3)
                .map(|i| Sample::new(i.to_string(), vec![i as f64, 1.0], 0.5))
                .collect(),
            default_feature_names(2),
        );
        assert!(validate_dataset(&d).passed());
    }

    #[test]
    fn nan_cell_is_located() {
        let d = Dataset::unchecked(
            vec![
                Sample::new("a", vec![1.0, 2.0], 0.0),
                Sample::new("b", vec![1.0, f64::NAN], 0.0),
            ],
            default_feature_names(2),
        );
        let report = validate_dataset(&d);
        assert_eq!(
            report.issues,
            vec![ValidationIssue::NonFinite { row: 1, column: 1 }]
        );
    }

    #[test]
    fn duplicate_ids_are_reported() {
        let d = Dataset::unchecked(
            vec![
                Sample::new("a", vec![1.0, 2.0], 0.0),
                Sample::new("a", vec![3.0, 2.0], 0.0),
            ],
            default_feature_names(2),
        );
        let report = validate_dataset(&d);
        assert_eq!(
            report.issues,
            vec![ValidationIssue::DuplicateId {
                id: "a".into(),
                rows: vec![0, 1]
            }]
        );
        assert!(matches!(
            Dataset::new(d.samples().to_vec(), default_feature_names(2)),
            Err(Error::InvalidDataset(_))
        ));
    }

    #[test]
    fn ragged_rows_are_reported() {
        let d = Dataset::unchecked(
            vec![
                Sample::new("a", vec![1.0, 2.0], 0.0),
                Sample::new("b", vec![3.0], 0.0),
            ],
            default_feature_names(2),
        );
        assert!(validate_dataset(&d)
            .issues
            .contains(&ValidationIssue::RowWidth {
                row: 1,
                expected: 2,
                got: 1
            }));
    }

    #[test]
    fn groups_keep_first_appearance_order() {
        let d = Dataset::unchecked(
            vec![
                Sample::new("a", vec![0.0, 0.0], 0.0).with_group("tue"),
                Sample::new("b", vec![0.0, 0.0], 0.0).with_group("mon"),
                Sample::new("c", vec![0.0, 0.0], 0.0).with_group("tue"),
            ],
            default_feature_names(2),
        );
        let groups = d.groups();
        assert_eq!(groups[0], ("tue".to_string(), vec![0, 2]));
        assert_eq!(groups[1], ("mon".to_string(), vec![1]));
    }

    #[test]
    fn hyperparams_defaults_validate() {
        let p = LcHyperParams::for_dim(3);
        assert!(p.validate(3).is_ok());
        let mut bad = p.clone();
        bad.n_s = 3;
        assert!(bad.validate(3).is_err());
        let mut bad = p;
        bad.kappa_decay = 1.5;
        assert!(bad.validate(3).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
    }
}
