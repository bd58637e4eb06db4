//! Comparison methods: per-feature Z-scores, and LIME / Shapley values
//! applied to the deviation `f − y` instead of `f`.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::seed::{derive_seed, rng_from};
use crate::stats::kernel_weight;
use crate::surrogate::{sample_vicinity, weighted_lasso};
use crate::types::{fit_standardizer, AttributionResult, Dataset, Diagnostics, Method, Sample};

/// `(x_i − m_i)/σ_i` with mean and sample std over `data`.
pub fn z_score(data: &Dataset, sample: &Sample) -> Result<AttributionResult> {
    if data.len() < 2 {
        return Err(Error::invalid("Z-score needs at least 2 reference samples"));
    }
    if sample.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: sample.dim(),
        });
    }
    let st = fit_standardizer(data)?;
    Ok(AttributionResult {
        method: Method::Z,
        scores: st.standardize(&sample.x),
        sample_ids: vec![sample.id.clone()],
        diagnostics: Diagnostics {
            iterations: 0,
            objective: None,
            converged: true,
        },
    })
}

/// Kernel-weighted lasso on vicinity draws around `x_t`, fit to `f − y_t`.
/// The slope is the score.
pub fn lime_plus(
    model: &dyn Model,
    sample: &Sample,
    nu: f64,
    eta: &[f64],
    n_s: usize,
    seed: u64,
) -> Result<AttributionResult> {
    let vicinity = sample_vicinity(model, &sample.x, eta, n_s, seed)?;
    let weights: Vec<f64> = vicinity
        .points
        .iter()
        .map(|p| kernel_weight(p, &sample.x, eta))
        .collect();
    // y_t only shifts the intercept, so the fit runs on f itself and the
    // slope never touches y_t.
    let fit = weighted_lasso(&vicinity.points, &vicinity.values, &weights, nu)?;
    Ok(AttributionResult {
        method: Method::LimePlus,
        scores: fit.slope,
        sample_ids: vec![sample.id.clone()],
        diagnostics: Diagnostics {
            iterations: 0,
            objective: None,
            converged: true,
        },
    })
}

/// Measure used to fill in "absent" features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BackgroundDistribution {
    /// Rows of a reference dataset. With `sample_count = None` every row is
    /// used once; otherwise that many rows are drawn with replacement.
    Empirical {
        rows: Vec<Vec<f64>>,
        sample_count: Option<usize>,
    },
    UniformBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
        sample_count: usize,
    },
}

pub const DEFAULT_BACKGROUND_DRAWS: usize = 256;

impl BackgroundDistribution {
    pub fn empirical(data: &Dataset) -> Self {
        BackgroundDistribution::Empirical {
            rows: data.samples().iter().map(|s| s.x.clone()).collect(),
            sample_count: None,
        }
    }

    pub fn uniform_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite())
        {
            return Err(Error::invalid(
                "box bounds must be finite with lower < upper",
            ));
        }
        Ok(BackgroundDistribution::UniformBox {
            lower,
            upper,
            sample_count: DEFAULT_BACKGROUND_DRAWS,
        })
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            BackgroundDistribution::Empirical { rows, .. } => rows.first().map(Vec::len),
            BackgroundDistribution::UniformBox { lower, .. } => Some(lower.len()),
        }
    }

    /// The fixed set of background points shared by every coalition.
    pub fn draws(&self, seed: u64) -> Result<Vec<Vec<f64>>> {
        let mut rng = rng_from(seed);
        match self {
            BackgroundDistribution::Empirical { rows, sample_count } => {
                if rows.is_empty() {
                    return Err(Error::EmptyBackground);
                }
                Ok(match sample_count {
                    None => rows.clone(),
                    Some(k) => (0..*k)
                        .map(|_| rows[rng.random_range(0..rows.len())].clone())
                        .collect(),
                })
            }
            BackgroundDistribution::UniformBox {
                lower,
                upper,
                sample_count,
            } => {
                if *sample_count == 0 {
                    return Err(Error::EmptyBackground);
                }
                Ok((0..*sample_count)
                    .map(|_| {
                        lower
                            .iter()
                            .zip(upper)
                            .map(|(l, u)| rng.random_range(*l..*u))
                            .collect()
                    })
                    .collect())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ShapleyMode {
    Exact,
    MonteCarlo { permutations: usize },
}

pub const MAX_EXACT_FEATURES: usize = 20;

type Coalition = Vec<u64>;

fn coalition_empty(m: usize) -> Coalition {
    vec![0; m.div_ceil(64).max(1)]
}

fn contains(c: &Coalition, i: usize) -> bool {
    c[i / 64] >> (i % 64) & 1 == 1
}

fn insert(c: &mut Coalition, i: usize) {
    c[i / 64] |= 1 << (i % 64);
}

/// Value function of the coalition game behind SV+.
///
/// `value(S) = mean_k f(x with features in S from x_t, others from b_k) − y_t`
/// over a fixed set of background draws `b_k`. Marginal contributions are
/// computed on the un-shifted mean, since `y_t` cancels in every difference.
pub struct ShapleyGame<'a> {
    model: &'a dyn Model,
    x_t: Vec<f64>,
    y_t: f64,
    background: Vec<Vec<f64>>,
    cache: HashMap<Coalition, f64>,
}

impl<'a> ShapleyGame<'a> {
    pub fn new(
        model: &'a dyn Model,
        sample: &Sample,
        background: &BackgroundDistribution,
        seed: u64,
    ) -> Result<Self> {
        let draws = background.draws(seed)?;
        if let Some(bad) = draws.iter().find(|b| b.len() != sample.dim()) {
            return Err(Error::DimensionMismatch {
                expected: sample.dim(),
                got: bad.len(),
            });
        }
        Ok(ShapleyGame {
            model,
            x_t: sample.x.clone(),
            y_t: sample.y,
            background: draws,
            cache: HashMap::new(),
        })
    }

    pub fn players(&self) -> usize {
        self.x_t.len()
    }

    /// Mean model output with `members` fixed at `x_t`.
    fn mean_output(&mut self, members: &Coalition) -> Result<f64> {
        if let Some(v) = self.cache.get(members) {
            return Ok(*v);
        }
        let points: Vec<Vec<f64>> = self
            .background
            .iter()
            .map(|b| {
                (0..self.x_t.len())
                    .map(|i| {
                        if contains(members, i) {
                            self.x_t[i]
                        } else {
                            b[i]
                        }
                    })
                    .collect()
            })
            .collect();
        let f = self.model.query_batch(&points)?;
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        self.cache.insert(members.clone(), mean);
        Ok(mean)
    }

    /// `value(S)` for the coalition given by feature indices.
    pub fn value(&mut self, members: &[usize]) -> Result<f64> {
        let mut c = coalition_empty(self.players());
        for &i in members {
            insert(&mut c, i);
        }
        Ok(self.mean_output(&c)? - self.y_t)
    }

    /// Shapley values by full enumeration of coalitions.
    pub fn exact(&mut self) -> Result<Vec<f64>> {
        let m = self.players();
        if m > MAX_EXACT_FEATURES {
            return Err(Error::ExactTooLarge { features: m });
        }
        let full = 1usize << m;
        let mut values = vec![0.0; full];
        for (mask, v) in values.iter_mut().enumerate() {
            let c = vec![mask as u64];
            *v = self.mean_output(&c)?;
        }
        // weight(|S|) = |S|! (M − |S| − 1)! / M!
        let mut weight = vec![0.0; m];
        for (s, w) in weight.iter_mut().enumerate() {
            *w = 1.0 / (m as f64 * binomial(m - 1, s));
        }
        let mut phi = vec![0.0; m];
        for (mask, v) in values.iter().enumerate() {
            let size = mask.count_ones() as usize;
            for (i, p) in phi.iter_mut().enumerate() {
                if mask & (1 << i) == 0 {
                    *p += weight[size] * (values[mask | (1 << i)] - v);
                }
            }
        }
        Ok(phi)
    }

    /// Average marginal contributions over random feature orderings.
    pub fn monte_carlo(&mut self, permutations: usize, seed: u64) -> Result<Vec<f64>> {
        if permutations == 0 {
            return Err(Error::invalid(
                "Monte Carlo Shapley needs at least one permutation",
            ));
        }
        let m = self.players();
        let mut rng = rng_from(seed);
        let mut order: Vec<usize> = (0..m).collect();
        let mut phi = vec![0.0; m];
        for _ in 0..permutations {
            order.shuffle(&mut rng);
            let mut c = coalition_empty(m);
            let mut prev = self.mean_output(&c)?;
            for &i in &order {
                insert(&mut c, i);
                let cur = self.mean_output(&c)?;
                phi[i] += cur - prev;
                prev = cur;
            }
        }
        phi.iter_mut().for_each(|p| *p /= permutations as f64);
        Ok(phi)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley values of each feature for the deviation `f − y_t`.
pub fn sv_plus(
    model: &dyn Model,
    sample: &Sample,
    background: &BackgroundDistribution,
    mode: ShapleyMode,
    seed: u64,
) -> Result<AttributionResult> {
    if let ShapleyMode::Exact = mode {
        if sample.dim() > MAX_EXACT_FEATURES {
            return Err(Error::ExactTooLarge {
                features: sample.dim(),
            });
        }
    }
    let mut game = ShapleyGame::new(model, sample, background, derive_seed(seed, &[0]))?;
    let (scores, iterations) = match mode {
        ShapleyMode::Exact => (game.exact()?, 1usize << sample.dim()),
        ShapleyMode::MonteCarlo { permutations } => (
            game.monte_carlo(permutations, derive_seed(seed, &[1]))?,
            permutations,
        ),
    };
    Ok(AttributionResult {
        method: Method::SvPlus,
        scores,
        sample_ids: vec![sample.id.clone()],
        diagnostics: Diagnostics {
            iterations,
            objective: None,
            converged: true,
        },
    })
}
