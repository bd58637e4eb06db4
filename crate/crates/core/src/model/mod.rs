//! Query-only access to a deterministic black-box regressor `f(x)`.
//!
//! Everything downstream sees a model through [`Model`]: built-in analytic
//! functions, closures, and the external child-process adapter all implement
//! it. [`ModelHandle`] is the cloneable, type-erased form used by the CLI.

mod external;
pub mod protocol;

use std::fmt;
use std::sync::Arc;

pub use external::{ExternalModel, DEFAULT_TIMEOUT};

use crate::error::{Error, Result};
use crate::types::Standardizer;

pub trait Model: Send + Sync {
    /// Expected input dimension, or `None` when any width is accepted.
    fn dim(&self) -> Option<usize>;

    /// Raw evaluation. Callers go through [`Model::query`], which adds the
    /// dimension and finiteness checks.
    fn evaluate(&self, x: &[f64]) -> Result<f64>;

    fn query(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let value = self.evaluate(x)?;
        if !value.is_finite() {
            return Err(Error::NonFiniteOutput {
                value,
                x: x.to_vec(),
            });
        }
        Ok(value)
    }

    /// Element-wise [`Model::query`]; the error names the failing row.
    fn query_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter()
            .enumerate()
            .map(|(row, x)| {
                self.query(x).map_err(|e| Error::AtRow {
                    row,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

pub(crate) fn check_dim(expected: Option<usize>, x: &[f64]) -> Result<()> {
    match expected {
        Some(m) if m != x.len() => Err(Error::DimensionMismatch {
            expected: m,
            got: x.len(),
        }),
        _ => Ok(()),
    }
}

/// Analytic models used by tests and experiment reproductions.
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltinModel {
    /// `(1 − ‖x‖²/2)·exp(−‖x‖²/2)` on two features.
    MexicanHat,
    Linear {
        weights: Vec<f64>,
        intercept: f64,
    },
    /// Piecewise constant along one axis: `levels[k]` where `k` counts the
    /// breakpoints `<= x[axis]`.
    PiecewiseStep {
        axis: usize,
        breakpoints: Vec<f64>,
        levels: Vec<f64>,
    },
}

impl BuiltinModel {
    pub fn linear(weights: Vec<f64>, intercept: f64) -> Self {
        BuiltinModel::Linear { weights, intercept }
    }

    pub fn piecewise_step(axis: usize, breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if levels.len() != breakpoints.len() + 1 {
            return Err(Error::invalid(format!(
                "step model needs {} levels for {} breakpoints, got {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                levels.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(
                "step breakpoints must be strictly increasing",
            ));
        }
        Ok(BuiltinModel::PiecewiseStep {
            axis,
            breakpoints,
            levels,
        })
    }
}

pub fn mexican_hat(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (1.0 - 0.5 * r2) * (-0.5 * r2).exp()
}

impl Model for BuiltinModel {
    fn dim(&self) -> Option<usize> {
        match self {
            BuiltinModel::MexicanHat => Some(2),
            BuiltinModel::Linear { weights, .. } => Some(weights.len()),
            BuiltinModel::PiecewiseStep { .. } => None,
        }
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            BuiltinModel::MexicanHat => mexican_hat(x),
            BuiltinModel::Linear { weights, intercept } => {
                intercept + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            }
            BuiltinModel::PiecewiseStep {
                axis,
                breakpoints,
                levels,
            } => {
                let v = *x.get(*axis).ok_or(Error::DimensionMismatch {
                    expected: axis + 1,
                    got: x.len(),
                })?;
                let k = breakpoints.partition_point(|b| *b <= v);
                levels[k]
            }
        })
    }
}

/// Adapts a closure into a [`Model`].
pub struct FnModel<F> {
    dim: Option<usize>,
    f: F,
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnModel { dim: Some(dim), f }
    }
}

impl<F> Model for FnModel<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn dim(&self) -> Option<usize> {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

/// Presents a model defined on original units as a function of
/// standardized coordinates: `g(z) = f(destandardize(z))`.
pub struct StandardizedModel<'a> {
    inner: &'a dyn Model,
    standardizer: &'a Standardizer,
}

impl<'a> StandardizedModel<'a> {
    pub fn new(inner: &'a dyn Model, standardizer: &'a Standardizer) -> Self {
        StandardizedModel {
            inner,
            standardizer,
        }
    }
}

impl Model for StandardizedModel<'_> {
    fn dim(&self) -> Option<usize> {
        Some(self.standardizer.dim())
    }

    fn evaluate(&self, z: &[f64]) -> Result<f64> {
        self.inner.query(&self.standardizer.destandardize(z))
    }

    fn query_batch(&self, zs: &[Vec<f64>]) -> Result<Vec<f64>> {
        for (row, z) in zs.iter().enumerate() {
            check_dim(self.dim(), z).map_err(|e| Error::AtRow {
                row,
                source: Box::new(e),
            })?;
        }
        let xs: Vec<Vec<f64>> = zs
            .iter()
            .map(|z| self.standardizer.destandardize(z))
            .collect();
        self.inner.query_batch(&xs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Builtin,
    External,
    Custom,
}

/// Cloneable handle over any model.
#[derive(Clone)]
pub struct ModelHandle {
    kind: ModelKind,
    spec: Option<String>,
    inner: Arc<dyn Model>,
}

impl fmt::Debug for ModelHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelHandle")
            .field("kind", &self.kind)
            .field("spec", &self.spec)
            .finish()
    }
}

impl ModelHandle {
    pub fn builtin(model: BuiltinModel) -> Self {
        ModelHandle {
            kind: ModelKind::Builtin,
            spec: None,
            inner: Arc::new(model),
        }
    }

    pub fn external(model: ExternalModel) -> Self {
        ModelHandle {
            kind: ModelKind::External,
            spec: Some(format!("exec:{}", model.command())),
            inner: Arc::new(model),
        }
    }

    pub fn custom(model: impl Model + 'static) -> Self {
        ModelHandle {
            kind: ModelKind::Custom,
            spec: None,
            inner: Arc::new(model),
        }
    }

    /// Parses `builtin:mexican_hat`, `builtin:linear?w=2,-3&b=1`,
    /// `builtin:step?axis=0&at=0,1&levels=0,1,2` or `exec:<command line>`.
    pub fn parse(spec: &str) -> Result<Self> {
        Self::parse_with_timeout(spec, DEFAULT_TIMEOUT)
    }

    pub fn parse_with_timeout(spec: &str, timeout: std::time::Duration) -> Result<Self> {
        let bad = |reason: &str| Error::InvalidModelSpec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let mut handle = if let Some(cmd) = spec.strip_prefix("exec:") {
            if cmd.trim().is_empty() {
                return Err(bad("empty command line"));
            }
            ModelHandle::external(ExternalModel::spawn(cmd, timeout)?)
        } else if let Some(rest) = spec.strip_prefix("builtin:") {
            let (name, query) = rest.split_once('?').unwrap_or((rest, ""));
            let params = parse_query(query).map_err(|r| bad(&r))?;
            let get = |key: &str| {
                params
                    .iter()
                    .find(|(k, _)| k == key)
                    .map(|(_, v)| v.as_str())
            };
            let floats = |key: &str| -> Result<Vec<f64>> {
                get(key)
                    .ok_or_else(|| bad(&format!("missing parameter `{key}`")))?
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| bad(&format!("bad number `{t}`")))
                    })
                    .collect()
            };
            let model = match name {
                "mexican_hat" | "mexican-hat" => BuiltinModel::MexicanHat,
                "linear" => {
                    let weights = floats("w")?;
                    let intercept = match get("b") {
                        Some(b) => b.trim().parse().map_err(|_| bad("bad intercept"))?,
                        None => 0.0,
                    };
                    BuiltinModel::linear(weights, intercept)
                }
                "step" | "piecewise_step" => {
                    let axis = get("axis")
                        .unwrap_or("0")
                        .parse()
                        .map_err(|_| bad("bad axis"))?;
                    BuiltinModel::piecewise_step(axis, floats("at")?, floats("levels")?)
                        .map_err(|e| bad(&e.to_string()))?
                }
                other => return Err(bad(&format!("unknown builtin `{other}`"))),
            };
            ModelHandle::builtin(model)
        } else {
            return Err(bad("expected `builtin:` or `exec:` prefix"));
        };
        handle.spec = Some(spec.to_string());
        Ok(handle)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn spec(&self) -> Option<&str> {
        self.spec.as_deref()
    }

    pub fn as_model(&self) -> &dyn Model {
        self.inner.as_ref()
    }
}

fn parse_query(query: &str) -> std::result::Result<Vec<(String, String)>, String> {
    query
        .split('&')
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.to_string()))
                .ok_or_else(|| format!("parameter `{p}` lacks `=`"))
        })
        .collect()
}

impl Model for ModelHandle {
    fn dim(&self) -> Option<usize> {
        self.inner.dim()
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.inner.evaluate(x)
    }

    fn query(&self, x: &[f64]) -> Result<f64> {
        self.inner.query(x)
    }

    fn query_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.inner.query_batch(xs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mexican_hat_values() {
        let m = BuiltinModel::MexicanHat;
        assert_eq!(m.query(&[0.0, 0.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(m.query(&[2f64.sqrt(), 0.0]).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.query(&[1.0, 0.0]).unwrap(), 0.30327, epsilon = 1e-5);
        assert_abs_diff_eq!(
            m.query(&[1.0, 0.0]).unwrap(),
            0.5 * (-0.5f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn linear_value() {
        let m = BuiltinModel::linear(vec![2.0, -3.0], 1.0);
        assert_eq!(m.query(&[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn dimension_is_checked() {
        let m = BuiltinModel::MexicanHat;
        assert!(matches!(
            m.query(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
        let err = m.query_batch(&[vec![0.0, 0.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::AtRow { row: 1, .. }));
    }

    #[test]
    fn batch_matches_single_queries() {
        let m = BuiltinModel::MexicanHat;
        assert!(m.query_batch(&[]).unwrap().is_empty());
        let out = m
            .query_batch(&[vec![0.0, 0.0], vec![2f64.sqrt(), 0.0]])
            .unwrap();
        assert_eq!(out[0], 1.0);
        assert_abs_diff_eq!(out[1], 0.0, epsilon = 1e-15);

        let xs: Vec<Vec<f64>> = (0..1000)
            .map(|i| vec![(i as f64 * 0.37).sin() * 3.0, (i as f64 * 0.11).cos() * 2.0])
            .collect();
        let batch = m.query_batch(&xs).unwrap();
        for (x, f) in xs.iter().zip(&batch) {
            assert_eq!(f.to_bits(), m.query(x).unwrap().to_bits());
        }
    }

    #[test]
    fn step_model_levels() {
        let m = BuiltinModel::piecewise_step(1, vec![0.0, 1.0], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(m.query(&[9.0, -0.5]).unwrap(), -1.0);
        assert_eq!(m.query(&[9.0, 0.0]).unwrap(), 0.0);
        assert_eq!(m.query(&[9.0, 5.0]).unwrap(), 2.0);
        assert!(m.query(&[1.0]).is_err());
        assert!(BuiltinModel::piecewise_step(0, vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn non_finite_output_is_rejected() {
        let m = FnModel::new(2, |_x: &[f64]| f64::NAN);
        assert!(matches!(
            m.query(&[0.0, 0.0]),
            Err(Error::NonFiniteOutput { .. })
        ));
        assert!(m.query(&[0.0, 0.0]).unwrap_err().is_model_failure());
    }

    #[test]
    fn parses_builtin_specs() {
        let h = ModelHandle::parse("builtin:mexican_hat").unwrap();
        assert_eq!(h.kind(), &ModelKind::Builtin);
        assert_eq!(h.query(&[0.0, 0.0]).unwrap(), 1.0);

        let h = ModelHandle::parse("builtin:linear?w=2,-3&b=1").unwrap();
        assert_eq!(h.query(&[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(h.dim(), Some(2));

        let h = ModelHandle::parse("builtin:step?axis=0&at=0&levels=1,2").unwrap();
        assert_eq!(h.query(&[0.5, 0.0]).unwrap(), 2.0);

        for bad in [
            "mexican_hat",
            "builtin:nope",
            "builtin:linear",
            "builtin:linear?w=a",
            "exec:",
        ] {
            assert!(
                matches!(ModelHandle::parse(bad), Err(Error::InvalidModelSpec { .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn standardized_model_maps_back_to_original_units() {
        let st = Standardizer::new(vec![1.0, -2.0], vec![2.0, 0.5]).unwrap();
        let lin = BuiltinModel::linear(vec![1.0, 1.0], 0.0);
        let g = StandardizedModel::new(&lin, &st);
        // z = (1, 2) -> x = (3, -1)
        assert_eq!(g.query(&[1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(g.query_batch(&[vec![1.0, 2.0]]).unwrap(), vec![2.0]);
    }
}
