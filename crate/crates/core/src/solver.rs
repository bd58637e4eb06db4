//! The likelihood-compensation solver.
//!
//! Finds the input correction `δ` minimizing
//!
//! ```text
//! J(δ) + ν‖δ‖₁,   J(δ) = (1/N) Σ_t [y_t − f(x_t + δ)]² / (2σ_t²) + (λ/2)‖δ‖₂²
//! ```
//!
//! by proximal gradient steps. The gradient of `f` is never available, so at
//! every iteration each sample's `∂f/∂x` at `x_t + δ` is replaced by the
//! slope of a ridge fit to fresh Gaussian vicinity draws
//! ([`crate::surrogate::ridge_gradient`]). The learning rate decays
//! geometrically. All of this runs in standardized coordinates; the returned
//! `δ` is converted back to original feature units.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, StandardizedModel};
use crate::seed::{derive_seed, rng_from};
use crate::surrogate::{ridge_gradient, sample_vicinity, LinearFit};
use crate::types::{AttributionResult, Dataset, Diagnostics, LcHyperParams, Method, Standardizer};

const STREAM_INIT: u64 = 0;
const STREAM_GRADIENT: u64 = 1;

/// Half-width of the uniform distribution `δ` starts from.
pub const INIT_SCALE: f64 = 1e-3;

/// Proximal operator of `threshold·‖·‖₁`.
pub fn soft_threshold(phi: &[f64], threshold: f64) -> Vec<f64> {
    debug_assert!(threshold >= 0.0);
    phi.iter()
        .map(|&p| {
            if p > threshold {
                p - threshold
            } else if p < -threshold {
                p + threshold
            } else {
                0.0
            }
        })
        .collect()
}

/// Gradient step on the smooth part:
/// `φ = (1 − κλ)δ + κ (1/N) Σ_t (r_t / σ_t²) β_t`.
pub fn phi_update(
    delta_old: &[f64],
    gradients: &[LinearFit],
    residuals: &[f64],
    sigma2: &[f64],
    kappa: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    let n = gradients.len();
    if n == 0 {
        return Err(Error::invalid("phi update needs at least one sample"));
    }
    if residuals.len() != n || sigma2.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if residuals.len() != n {
                residuals.len()
            } else {
                sigma2.len()
            },
        });
    }
    let m = delta_old.len();
    let mut g = vec![0.0; m];
    for ((fit, r), s2) in gradients.iter().zip(residuals).zip(sigma2) {
        if fit.slope.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: fit.slope.len(),
            });
        }
        let coef = r / (n as f64 * s2);
        for (acc, b) in g.iter_mut().zip(&fit.slope) {
            *acc += b * coef;
        }
    }
    let shrink = 1.0 - kappa * lambda;
    Ok(delta_old
        .iter()
        .zip(&g)
        .map(|(d, gi)| shrink * d + kappa * gi)
        .collect())
}

fn shifted(x: &[f64], delta: &[f64]) -> Vec<f64> {
    x.iter().zip(delta).map(|(a, d)| a + d).collect()
}

/// `y_t − f(x_t + δ)` for every sample.
fn residuals_at(model: &dyn Model, data: &Dataset, delta: &[f64]) -> Result<Vec<f64>> {
    let points: Vec<Vec<f64>> = data
        .samples()
        .iter()
        .map(|s| shifted(&s.x, delta))
        .collect();
    let f = model.query_batch(&points)?;
    Ok(data
        .samples()
        .iter()
        .zip(f)
        .map(|(s, fx)| s.y - fx)
        .collect())
}

fn objective_from(residuals: &[f64], sigma2: &[f64], delta: &[f64], lambda: f64, nu: f64) -> f64 {
    let n = residuals.len() as f64;
    let fit: f64 = residuals
        .iter()
        .zip(sigma2)
        .map(|(r, s2)| r * r / (2.0 * s2))
        .sum::<f64>()
        / n;
    let l2: f64 = delta.iter().map(|d| d * d).sum();
    let l1: f64 = delta.iter().map(|d| d.abs()).sum();
    fit + 0.5 * lambda * l2 + nu * l1
}

/// The batch likelihood-compensation objective at `δ`, in the coordinates
/// `data` and `model` share.
pub fn lc_objective(
    model: &dyn Model,
    data: &Dataset,
    sigma2: &[f64],
    delta: &[f64],
    lambda: f64,
    nu: f64,
) -> Result<f64> {
    check_inputs(data, sigma2, delta.len())?;
    let r = residuals_at(model, data, delta)?;
    Ok(objective_from(&r, sigma2, delta, lambda, nu))
}

fn check_inputs(data: &Dataset, sigma2: &[f64], m: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    if sigma2.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: sigma2.len(),
        });
    }
    if sigma2.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::invalid("sigma2 entries must be positive"));
    }
    if let Some(s) = data.samples().iter().find(|s| s.dim() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: s.dim(),
        });
    }
    Ok(())
}

/// Snapshot after one iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    /// Current `δ` in standardized units.
    pub delta: Vec<f64>,
    /// Learning rate for the next iteration, `κ₀·decay^iteration`.
    pub kappa: f64,
    pub iteration: usize,
    pub objective: f64,
    /// `‖δ_new − δ_old‖₂` of the step that produced this state.
    pub step_norm: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LcSolution {
    /// `δ` in original feature units, with diagnostics.
    pub result: AttributionResult,
    pub delta_standardized: Vec<f64>,
    pub history: Vec<SolverState>,
}

pub struct LcSolver<'a> {
    model: StandardizedModel<'a>,
    data: Dataset,
    sigma2: &'a [f64],
    params: &'a LcHyperParams,
    standardizer: &'a Standardizer,
    initial: Option<Vec<f64>>,
}

impl<'a> LcSolver<'a> {
    pub fn new(
        model: &'a dyn Model,
        data: &Dataset,
        sigma2: &'a [f64],
        params: &'a LcHyperParams,
        standardizer: &'a Standardizer,
    ) -> Result<Self> {
        let m = standardizer.dim();
        check_inputs(data, sigma2, m)?;
        params.validate(m)?;
        if let Some(d) = model.dim() {
            if d != m {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: m,
                });
            }
        }
        Ok(LcSolver {
            model: StandardizedModel::new(model, standardizer),
            data: standardizer.standardize_dataset(data),
            sigma2,
            params,
            standardizer,
            initial: None,
        })
    }

    /// Starts from `delta` (standardized units) instead of a random point near 0.
    pub fn with_initial_delta(mut self, delta: Vec<f64>) -> Result<Self> {
        if delta.len() != self.standardizer.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.standardizer.dim(),
                got: delta.len(),
            });
        }
        self.initial = Some(delta);
        Ok(self)
    }

    fn initial_delta(&self) -> Vec<f64> {
        if let Some(d) = &self.initial {
            return d.clone();
        }
        let mut rng = rng_from(derive_seed(self.params.seed, &[STREAM_INIT]));
        (0..self.standardizer.dim())
            .map(|_| rng.random_range(-INIT_SCALE..INIT_SCALE))
            .collect()
    }

    pub fn run(&self) -> Result<LcSolution> {
        let p = self.params;
        let model: &dyn Model = &self.model;
        let samples = self.data.samples();

        let mut delta = self.initial_delta();
        let mut residuals = residuals_at(model, &self.data, &delta)?;
        let mut objective = objective_from(&residuals, self.sigma2, &delta, p.lambda, p.nu);
        let mut best = (objective, delta.clone());
        let mut kappa = p.kappa0;
        let mut small_steps = 0;
        let mut converged = false;
        let mut history = Vec::new();

        for it in 0..p.max_iter {
            let mut fits = Vec::with_capacity(samples.len());
            for (t, s) in samples.iter().enumerate() {
                let center = shifted(&s.x, &delta);
                let seed = derive_seed(p.seed, &[STREAM_GRADIENT, it as u64, t as u64]);
                let vicinity = sample_vicinity(model, &center, &p.eta, p.n_s, seed)?;
                let fit = ridge_gradient(&vicinity, p.epsilon).map_err(|e| match e {
                    Error::SingularSystem if center.iter().any(|c| !c.is_finite()) => {
                        Error::Diverged { iteration: it }
                    }
                    other => other,
                })?;
                fits.push(fit);
            }
            let phi = phi_update(&delta, &fits, &residuals, self.sigma2, kappa, p.lambda)?;
            let next = soft_threshold(&phi, kappa * p.nu);
            let step_norm = next
                .iter()
                .zip(&delta)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if next.iter().any(|d| !d.is_finite()) {
                return Err(Error::Diverged { iteration: it + 1 });
            }
            delta = next;
            residuals = residuals_at(model, &self.data, &delta)?;
            objective = objective_from(&residuals, self.sigma2, &delta, p.lambda, p.nu);
            if !objective.is_finite() {
                return Err(Error::Diverged { iteration: it + 1 });
            }
            if objective < best.0 {
                best = (objective, delta.clone());
            }
            kappa = p.kappa0 * p.kappa_decay.powi(it as i32 + 1);

            if step_norm < p.delta_tol {
                small_steps += 1;
            } else {
                small_steps = 0;
            }
            converged = small_steps >= p.patience;
            history.push(SolverState {
                delta: delta.clone(),
                kappa,
                iteration: it + 1,
                objective,
                step_norm,
                converged,
            });
            if converged {
                break;
            }
        }

        let (objective, delta) = if converged { (objective, delta) } else { best };
        if !converged {
            log::debug!(
                "LC solver hit max_iter = {}; returning the best iterate",
                p.max_iter
            );
        }
        let result = AttributionResult {
            method: Method::Lc,
            scores: self.standardizer.scale_delta(&delta),
            sample_ids: samples.iter().map(|s| s.id.clone()).collect(),
            diagnostics: Diagnostics {
                iterations: history.len(),
                objective: Some(objective),
                converged,
            },
        };
        Ok(LcSolution {
            result,
            delta_standardized: delta,
            history,
        })
    }
}

/// Solves for one `δ` shared by every sample of `data`. Not converging is
/// not an error: the best iterate is returned with `converged = false`.
pub fn solve_lc(
    model: &dyn Model,
    data: &Dataset,
    sigma2: &[f64],
    params: &LcHyperParams,
    standardizer: &Standardizer,
) -> Result<AttributionResult> {
    Ok(LcSolver::new(model, data, sigma2, params, standardizer)?
        .run()?
        .result)
}
