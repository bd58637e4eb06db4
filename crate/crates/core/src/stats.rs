//! Local predictive variance and the Gaussian negative-log-likelihood
//! outlier score.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::types::{Dataset, Standardizer};

pub const SIGMA2_FLOOR: f64 = 1e-8;

/// Multivariate Gaussian density `N(x_ref | x_t, diag(eta))`, normalizer included.
pub fn kernel_weight(x_ref: &[f64], x_t: &[f64], eta: &[f64]) -> f64 {
    debug_assert_eq!(x_ref.len(), x_t.len());
    debug_assert_eq!(x_ref.len(), eta.len());
    let mut quad = 0.0;
    let mut log_det = 0.0;
    for ((a, b), e) in x_ref.iter().zip(x_t).zip(eta) {
        let d = a - b;
        quad += d * d / e;
        log_det += (2.0 * PI * e).ln();
    }
    (-0.5 * (quad + log_det)).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceConfig {
    pub floor: f64,
    /// Use the unweighted mean squared residual when all weights underflow.
    pub fallback_on_degenerate: bool,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        VarianceConfig {
            floor: SIGMA2_FLOOR,
            fallback_on_degenerate: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalVariance {
    pub sigma2: f64,
    pub weight_mass: f64,
    pub fell_back: bool,
}

/// Kernel-weighted mean of squared residuals around `x_t`, floored.
///
/// Terms are accumulated in sorted order so the result is bit-identical under
/// any permutation of the holdout rows.
pub fn weighted_residual_variance<'a>(
    points: impl IntoIterator<Item = &'a [f64]>,
    residuals: &[f64],
    x_t: &[f64],
    eta: &[f64],
    cfg: &VarianceConfig,
) -> Result<LocalVariance> {
    let mut terms: Vec<(f64, f64)> = points
        .into_iter()
        .zip(residuals)
        .map(|(p, r)| {
            let w = kernel_weight(p, x_t, eta);
            (w, w * r * r)
        })
        .collect();
    if terms.is_empty() {
        return Err(Error::invalid("holdout set is empty"));
    }
    terms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mass: f64 = terms.iter().map(|t| t.0).sum();
    let (sigma2, fell_back) = if mass > 0.0 && mass.is_finite() {
        (terms.iter().map(|t| t.1).sum::<f64>() / mass, false)
    } else if cfg.fallback_on_degenerate {
        log::warn!(
            "kernel weights underflowed at x = {x_t:?}; using the unweighted mean squared residual"
        );
        let mut sq: Vec<f64> = residuals.iter().map(|r| r * r).collect();
        sq.sort_by(f64::total_cmp);
        (sq.iter().sum::<f64>() / sq.len() as f64, true)
    } else {
        return Err(Error::DegenerateWeights);
    };
    Ok(LocalVariance {
        sigma2: sigma2.max(cfg.floor),
        weight_mass: mass,
        fell_back,
    })
}

/// Locally weighted maximum-likelihood variance at `x_t` from a holdout set
/// that must not contain the test sample itself. Kernel distances are taken
/// in the coordinates the holdout is expressed in.
pub fn local_variance(
    model: &dyn Model,
    holdout: &Dataset,
    x_t: &[f64],
    eta: &[f64],
    cfg: &VarianceConfig,
) -> Result<LocalVariance> {
    if holdout.is_empty() {
        return Err(Error::invalid("holdout set is empty"));
    }
    let xs: Vec<Vec<f64>> = holdout.samples().iter().map(|s| s.x.clone()).collect();
    let f = model.query_batch(&xs)?;
    let residuals: Vec<f64> = holdout
        .samples()
        .iter()
        .zip(&f)
        .map(|(s, fx)| s.y - fx)
        .collect();
    weighted_residual_variance(xs.iter().map(Vec::as_slice), &residuals, x_t, eta, cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SigmaMode {
    /// Leave-one-out over the dataset itself.
    LeaveOneOut,
    /// One variance for every sample.
    Constant(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub sigma2: Vec<f64>,
    pub effective_weight_mass: Vec<f64>,
    /// Samples whose weights underflowed and used the unweighted fallback.
    pub fallbacks: Vec<usize>,
}

/// Variance for every sample of `data`. Leave-one-out distances are measured
/// after `standardizer`; the model is queried in original units.
pub fn estimate_variances(
    model: &dyn Model,
    data: &Dataset,
    standardizer: &Standardizer,
    eta: &[f64],
    mode: &SigmaMode,
    cfg: &VarianceConfig,
) -> Result<VarianceEstimate> {
    let n = data.len();
    match mode {
        SigmaMode::Constant(v) => {
            if !(*v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "constant sigma2 must be positive, got {v}"
                )));
            }
            Ok(VarianceEstimate {
                sigma2: vec![v.max(cfg.floor); n],
                effective_weight_mass: vec![f64::NAN; n],
                fallbacks: Vec::new(),
            })
        }
        SigmaMode::LeaveOneOut => {
            if n < 2 {
                return Err(Error::invalid(
                    "leave-one-out variance needs at least 2 samples; supply a constant sigma2",
                ));
            }
            if eta.len() != data.dim() {
                return Err(Error::DimensionMismatch {
                    expected: data.dim(),
                    got: eta.len(),
                });
            }
            let xs: Vec<Vec<f64>> = data.samples().iter().map(|s| s.x.clone()).collect();
            let f = model.query_batch(&xs)?;
            let residuals: Vec<f64> = data
                .samples()
                .iter()
                .zip(&f)
                .map(|(s, fx)| s.y - fx)
                .collect();
            let zs: Vec<Vec<f64>> = xs.iter().map(|x| standardizer.standardize(x)).collect();
            let mut est = VarianceEstimate {
                sigma2: Vec::with_capacity(n),
                effective_weight_mass: Vec::with_capacity(n),
                fallbacks: Vec::new(),
            };
            for t in 0..n {
                let others = (0..n).filter(|&k| k != t);
                let points = others.clone().map(|k| zs[k].as_slice());
                let res: Vec<f64> = others.map(|k| residuals[k]).collect();
                let lv = weighted_residual_variance(points, &res, &zs[t], eta, cfg)?;
                if lv.fell_back {
                    est.fallbacks.push(t);
                }
                est.sigma2.push(lv.sigma2);
                est.effective_weight_mass.push(lv.weight_mass);
            }
            Ok(est)
        }
    }
}

/// `−ln N(y | f, σ²)`.
pub fn outlier_score(residual: f64, sigma2: f64) -> f64 {
    0.5 * (2.0 * PI * sigma2).ln() + residual * residual / (2.0 * sigma2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub per_sample_score: Vec<f64>,
    pub aggregate_score: f64,
    pub threshold: Option<f64>,
    pub flagged: Vec<String>,
}

/// Per-sample negative log-likelihood and its mean over the dataset.
/// Samples scoring strictly above `threshold` are flagged.
pub fn anomaly_score(
    data: &Dataset,
    predictions: &[f64],
    sigma2: &[f64],
    threshold: Option<f64>,
) -> Result<AnomalyReport> {
    let n = data.len();
    if n == 0 {
        return Err(Error::invalid("dataset is empty"));
    }
    if predictions.len() != n || sigma2.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if predictions.len() != n {
                predictions.len()
            } else {
                sigma2.len()
            },
        });
    }
    if let Some(s) = sigma2.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::invalid(format!("sigma2 must be positive, got {s}")));
    }
    let scores: Vec<f64> = data
        .samples()
        .iter()
        .zip(predictions.iter().zip(sigma2))
        .map(|(s, (f, v))| outlier_score(s.y - f, *v))
        .collect();
    let aggregate = scores.iter().sum::<f64>() / n as f64;
    let flagged = match threshold {
        Some(th) => data
            .samples()
            .iter()
            .zip(&scores)
            .filter(|(_, sc)| **sc > th)
            .map(|(s, _)| s.id.clone())
            .collect(),
        None => Vec::new(),
    };
    Ok(AnomalyReport {
        per_sample_score: scores,
        aggregate_score: aggregate,
        threshold,
        flagged,
    })
}
