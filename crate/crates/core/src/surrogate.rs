//! Sampling-based local linear fits around a point.
//!
//! [`ridge_gradient`] turns Gaussian vicinity draws into a smooth surrogate
//! of `∂f/∂x`; [`weighted_lasso`] is the kernel-weighted sparse fit behind
//! LIME+.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::seed::rng_from;

/// Model evaluations at Gaussian draws around `center`.
#[derive(Clone, Debug, PartialEq)]
pub struct VicinitySample {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub center: Vec<f64>,
}

impl VicinitySample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: Vec<f64>,
    pub intercept: f64,
    pub residual_rms: f64,
}

pub(crate) fn check_eta(eta: &[f64], m: usize) -> Result<()> {
    if eta.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: eta.len(),
        });
    }
    if eta.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::invalid("vicinity variances must be positive"));
    }
    Ok(())
}

/// Draws `n_s` points from `N(center, diag(eta))` and evaluates the model on
/// them in one batch.
pub fn sample_vicinity(
    model: &dyn Model,
    center: &[f64],
    eta: &[f64],
    n_s: usize,
    seed: u64,
) -> Result<VicinitySample> {
    let m = center.len();
    check_eta(eta, m)?;
    if n_s < m + 1 {
        return Err(Error::invalid(format!(
            "vicinity needs at least M + 1 = {} draws, got {n_s}",
            m + 1
        )));
    }
    let mut rng = rng_from(seed);
    let scale: Vec<f64> = eta.iter().map(|e| e.sqrt()).collect();
    let points: Vec<Vec<f64>> = (0..n_s)
        .map(|_| {
            center
                .iter()
                .zip(&scale)
                .map(|(c, s)| {
                    let u: f64 = StandardNormal.sample(&mut rng);
                    c + s * u
                })
                .collect()
        })
        .collect();
    let values = model.query_batch(&points)?;
    Ok(VicinitySample {
        points,
        values,
        center: center.to_vec(),
    })
}

fn column_means(points: &[Vec<f64>], m: usize) -> Vec<f64> {
    let n = points.len() as f64;
    let mut mean = vec![0.0; m];
    for p in points {
        for (acc, v) in mean.iter_mut().zip(p) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n);
    mean
}

fn rms_residual(points: &[Vec<f64>], targets: &[f64], slope: &[f64], intercept: f64) -> f64 {
    let ss: f64 = points
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let pred = intercept + p.iter().zip(slope).map(|(a, b)| a * b).sum::<f64>();
            (t - pred) * (t - pred)
        })
        .sum();
    (ss / points.len() as f64).sqrt()
}

/// Solves a symmetric positive (semi)definite system, falling back to LU.
fn solve_spd(gram: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    let sol = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => gram.lu().solve(&rhs).ok_or(Error::SingularSystem)?,
    };
    if sol.iter().all(|v| v.is_finite()) {
        Ok(sol)
    } else {
        Err(Error::SingularSystem)
    }
}

/// Ridge least-squares slope on centered vicinity data:
/// `β = (Ψ Ψᵀ + εI)⁻¹ Ψ f` with `Ψ` the centered points (one column per
/// draw) and `f` the centered values. The intercept is `f̄ − βᵀx̄`.
pub fn ridge_gradient(vicinity: &VicinitySample, epsilon: f64) -> Result<LinearFit> {
    let m = vicinity.dim();
    let n = vicinity.len();
    if n < m + 1 {
        return Err(Error::invalid(format!(
            "ridge fit needs at least M + 1 = {} points, got {n}",
            m + 1
        )));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    let x_bar = column_means(&vicinity.points, m);
    let f_bar = vicinity.values.iter().sum::<f64>() / n as f64;
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    let mut centered = vec![0.0; m];
    for (p, f) in vicinity.points.iter().zip(&vicinity.values) {
        for j in 0..m {
            centered[j] = p[j] - x_bar[j];
        }
        let fc = f - f_bar;
        for j in 0..m {
            rhs[j] += centered[j] * fc;
            for k in 0..=j {
                gram[(j, k)] += centered[j] * centered[k];
            }
        }
    }
    for j in 0..m {
        for k in 0..j {
            gram[(k, j)] = gram[(j, k)];
        }
        gram[(j, j)] += epsilon;
    }
    let beta = solve_spd(gram, rhs)?;
    let slope: Vec<f64> = beta.iter().copied().collect();
    let intercept = f_bar - slope.iter().zip(&x_bar).map(|(b, x)| b * x).sum::<f64>();
    let residual_rms = rms_residual(&vicinity.points, &vicinity.values, &slope, intercept);
    Ok(LinearFit {
        slope,
        intercept,
        residual_rms,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    /// Stop once a full sweep changes no coefficient by more than this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            tol: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LassoFit {
    pub fit: LinearFit,
    pub sweeps: usize,
    /// Objective after each sweep.
    pub objective_trace: Vec<f64>,
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Minimizes `½ Σ w_m (y_m − β₀ − βᵀx_m)² + ν‖β‖₁` with an unpenalized
/// intercept by cyclic coordinate descent.
pub fn weighted_lasso(
    points: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    nu: f64,
) -> Result<LinearFit> {
    weighted_lasso_with(points, targets, weights, nu, &LassoConfig::default()).map(|f| f.fit)
}

pub fn weighted_lasso_with(
    points: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    nu: f64,
    cfg: &LassoConfig,
) -> Result<LassoFit> {
    let n = points.len();
    if n == 0 || targets.len() != n || weights.len() != n {
        return Err(Error::invalid(
            "lasso inputs must be nonempty and equally long",
        ));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("lasso weights must be nonnegative"));
    }
    let w_sum: f64 = weights.iter().sum();
    if !(w_sum > 0.0) {
        return Err(Error::invalid("lasso weights are all zero"));
    }
    if !(nu >= 0.0) {
        return Err(Error::invalid(format!("nu must be >= 0, got {nu}")));
    }
    let m = points[0].len();

    // The intercept is unpenalized, so centering by weighted means is exact.
    let mut x_bar = vec![0.0; m];
    let mut y_bar = 0.0;
    for ((p, y), w) in points.iter().zip(targets).zip(weights) {
        for (acc, v) in x_bar.iter_mut().zip(p) {
            *acc += w * v;
        }
        y_bar += w * y;
    }
    x_bar.iter_mut().for_each(|v| *v /= w_sum);
    y_bar /= w_sum;

    // column-major centered design
    let cols: Vec<Vec<f64>> = (0..m)
        .map(|j| points.iter().map(|p| p[j] - x_bar[j]).collect())
        .collect();
    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().zip(weights).map(|(v, w)| w * v * v).sum())
        .collect();
    let mut resid: Vec<f64> = targets.iter().map(|y| y - y_bar).collect();
    let mut beta = vec![0.0; m];

    let objective = |resid: &[f64], beta: &[f64]| {
        0.5 * resid
            .iter()
            .zip(weights)
            .map(|(r, w)| w * r * r)
            .sum::<f64>()
            + nu * beta.iter().map(|b| b.abs()).sum::<f64>()
    };

    let mut trace = Vec::new();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..m {
            if norms[j] == 0.0 {
                continue;
            }
            let col = &cols[j];
            let rho: f64 = col
                .iter()
                .zip(&resid)
                .zip(weights)
                .map(|((x, r), w)| w * x * r)
                .sum::<f64>()
                + norms[j] * beta[j];
            let new = soft(rho, nu) / norms[j];
            let step = new - beta[j];
            if step != 0.0 {
                for (r, x) in resid.iter_mut().zip(col) {
                    *r -= step * x;
                }
                beta[j] = new;
            }
            max_change = max_change.max(step.abs());
        }
        trace.push(objective(&resid, &beta));
        if max_change < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps });
    }
    let intercept = y_bar - beta.iter().zip(&x_bar).map(|(b, x)| b * x).sum::<f64>();
    let residual_rms = rms_residual(points, targets, &beta, intercept);
    Ok(LassoFit {
        fit: LinearFit {
            slope: beta,
            intercept,
            residual_rms,
        },
        sweeps,
        objective_trace: trace,
    })
}
