//! Detection and attribution over an ingested dataset.

use std::path::Path;
use std::time::{Duration, Instant};

use lcattr_core::seed::derive_seed;
use lcattr_core::{
    anomaly_score, estimate_variances, fit_standardizer_with, lime_plus, solve_lc, sv_plus,
    z_score, AttributionResult, BackgroundDistribution, Dataset, Diagnostics, Method, Model,
    ModelHandle, Sample, ShapleyMode, SigmaMode, StandardizedModel, Standardizer, VarianceConfig,
};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{
    BackgroundSpec, RunConfig, SigmaSpec, AUTO_EXACT_MAX_FEATURES, DEFAULT_SV_PERMUTATIONS,
};
use crate::ingest::{ingest_csv, IngestError, IngestOptions};
use crate::report::{AnomalySummary, GroupRecord, Metadata, Report, SampleRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_MODEL_FAILURE: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Ingest(#[from] IngestError),

    #[error("{stage}: {source}")]
    Core {
        stage: &'static str,
        #[source]
        source: lcattr_core::Error,
    },

    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Core { source, .. } if source.is_model_failure() => EXIT_MODEL_FAILURE,
            _ => EXIT_VALIDATION,
        }
    }
}

fn stage(stage: &'static str) -> impl FnOnce(lcattr_core::Error) -> RunError {
    move |source| RunError::Core { stage, source }
}

/// A finished run. The report is complete even when `exit_code` is nonzero;
/// failed records carry their error messages.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub exit_code: i32,
}

/// Reads the data, resolves the model spec and runs every requested method.
pub fn run(config: &RunConfig) -> Result<RunOutcome, RunError> {
    config.validate().map_err(RunError::Config)?;
    let data = ingest_csv(
        &config.data,
        &IngestOptions {
            target: config.target.clone(),
            group_by: config.group_by.clone(),
            id_column: config.id_column.clone(),
        },
    )?;
    let timeout = Duration::from_secs_f64(config.model_timeout_secs);
    let model = ModelHandle::parse_with_timeout(&config.model, timeout).map_err(stage("model"))?;
    run_with(config, &data, &model)
}

/// Same as [`run`] with the data and model supplied by the caller.
pub fn run_with(
    config: &RunConfig,
    data: &Dataset,
    model: &dyn Model,
) -> Result<RunOutcome, RunError> {
    let start = Instant::now();
    config.validate().map_err(RunError::Config)?;
    let m = data.dim();
    let n = data.len();
    let mut resolved = config.clone();
    resolved.lc.eta = vec![config.eta; m];
    resolved.lc.validate(m).map_err(stage("config"))?;
    let params = &resolved.lc;
    let grouped = config.group_by.is_some();

    let standardizer = if config.standardize {
        fit_standardizer_with(data, config.floor_constant).map_err(stage("standardize"))?
    } else {
        Standardizer::identity(m)
    };

    let xs: Vec<Vec<f64>> = data.samples().iter().map(|s| s.x.clone()).collect();
    let predictions = model.query_batch(&xs).map_err(stage("predict"))?;
    let sigma_mode = match config.sigma2 {
        SigmaSpec::LeaveOneOut => SigmaMode::LeaveOneOut,
        SigmaSpec::Constant(v) => SigmaMode::Constant(v),
    };
    let variances = estimate_variances(
        model,
        data,
        &standardizer,
        &params.eta,
        &sigma_mode,
        &VarianceConfig::default(),
    )
    .map_err(stage("variance"))?;
    let anomaly = anomaly_score(data, &predictions, &variances.sigma2, config.threshold)
        .map_err(stage("outlier score"))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Config(format!("cannot build worker pool: {e}")))?;

    let ctx = Context {
        config,
        params,
        data,
        model,
        standardizer: &standardizer,
        sigma2: &variances.sigma2,
        background: background(config, data)?,
        shapley: shapley_mode(config, m),
    };

    let per_sample: Vec<Method> = config
        .methods
        .iter()
        .copied()
        .filter(|&mth| !(grouped && mth == Method::Lc))
        .collect();
    let sample_results: Vec<Vec<(Method, lcattr_core::Result<AttributionResult>)>> =
        pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| {
                    per_sample
                        .iter()
                        .map(|&mth| (mth, ctx.sample_task(mth, i)))
                        .collect()
                })
                .collect()
        });

    let mut model_failed = false;
    let mut samples = Vec::with_capacity(n);
    for (i, results) in sample_results.into_iter().enumerate() {
        let s = &data.samples()[i];
        let mut rec = SampleRecord {
            id: s.id.clone(),
            group: s.group_key.clone(),
            target: s.y,
            prediction: predictions[i],
            sigma2: variances.sigma2[i],
            outlier_score: anomaly.per_sample_score[i],
            flagged: anomaly.flagged.contains(&s.id),
            ..Default::default()
        };
        for (mth, res) in results {
            match res {
                Ok(r) => {
                    rec.scores.insert(mth, r.scores);
                    rec.diagnostics.insert(mth, r.diagnostics);
                }
                Err(e) => {
                    model_failed |= e.is_model_failure();
                    log::warn!("sample {}: {mth} failed: {e}", s.id);
                    rec.errors.insert(mth, e.to_string());
                }
            }
        }
        samples.push(rec);
    }

    let mut groups = Vec::new();
    if grouped {
        let partition = data.groups();
        let lc_results: Vec<Option<lcattr_core::Result<AttributionResult>>> = pool.install(|| {
            partition
                .par_iter()
                .enumerate()
                .map(|(g, (_, members))| {
                    config
                        .methods
                        .contains(&Method::Lc)
                        .then(|| ctx.group_lc(g, members))
                })
                .collect()
        });
        for ((key, members), lc) in partition.iter().zip(lc_results) {
            let mut rec = aggregate_group(key, members, &samples, &per_sample);
            if let Some(res) = lc {
                match res {
                    Ok(r) => {
                        rec.scores.insert(Method::Lc, r.scores);
                        rec.diagnostics.insert(Method::Lc, r.diagnostics);
                    }
                    Err(e) => {
                        model_failed |= e.is_model_failure();
                        log::warn!("group {key}: lc failed: {e}");
                        rec.errors.insert(Method::Lc, e.to_string());
                    }
                }
            }
            groups.push(rec);
        }
    }

    let fallbacks = variances
        .fallbacks
        .iter()
        .map(|&t| data.samples()[t].id.clone())
        .collect();
    let report = Report {
        feature_names: data.feature_names().to_vec(),
        methods: config.methods.clone(),
        grouped,
        samples,
        groups,
        anomaly: AnomalySummary {
            aggregate_score: anomaly.aggregate_score,
            threshold: anomaly.threshold,
            flagged: anomaly.flagged,
        },
        metadata: Metadata {
            config: resolved.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            variance_fallbacks: fallbacks,
            wall_time_ms: start.elapsed().as_millis() as u64,
        },
    };

    let exit_code = if model_failed {
        EXIT_MODEL_FAILURE
    } else if config.strict && (report.has_unconverged() || !report.failures().is_empty()) {
        EXIT_NO_CONVERGENCE
    } else {
        EXIT_OK
    };
    Ok(RunOutcome { report, exit_code })
}

pub fn write_report(report: &Report, path: &Path) -> Result<(), RunError> {
    std::fs::write(path, report.to_json()).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })
}

struct Context<'a> {
    config: &'a RunConfig,
    params: &'a lcattr_core::LcHyperParams,
    data: &'a Dataset,
    model: &'a dyn Model,
    standardizer: &'a Standardizer,
    sigma2: &'a [f64],
    background: BackgroundDistribution,
    shapley: ShapleyMode,
}

impl Context<'_> {
    fn seed(&self, method: Method, task: usize) -> u64 {
        let tag = Method::ALL
            .iter()
            .position(|m| *m == method)
            .expect("known method") as u64;
        derive_seed(self.params.seed, &[tag, task as u64])
    }

    fn sample_task(&self, method: Method, i: usize) -> lcattr_core::Result<AttributionResult> {
        let s = &self.data.samples()[i];
        let seed = self.seed(method, i);
        match method {
            Method::Z => z_score(self.data, s),
            Method::LimePlus => {
                // fit in standardized space so the kernel width is unit-free,
                // then report the slope per original unit
                let g = StandardizedModel::new(self.model, self.standardizer);
                let z = Sample::new(s.id.clone(), self.standardizer.standardize(&s.x), s.y);
                let mut r = lime_plus(
                    &g,
                    &z,
                    self.config.lime_nu,
                    &self.params.eta,
                    self.params.n_s,
                    seed,
                )?;
                for (b, sd) in r.scores.iter_mut().zip(self.standardizer.stds()) {
                    *b /= sd;
                }
                Ok(r)
            }
            Method::SvPlus => sv_plus(self.model, s, &self.background, self.shapley, seed),
            Method::Lc => {
                let mut p = self.params.clone();
                p.seed = seed;
                solve_lc(
                    self.model,
                    &Dataset::single(s.clone()),
                    &self.sigma2[i..=i],
                    &p,
                    self.standardizer,
                )
            }
        }
    }

    fn group_lc(&self, g: usize, members: &[usize]) -> lcattr_core::Result<AttributionResult> {
        let mut p = self.params.clone();
        // group tasks live in their own seed stream
        p.seed = derive_seed(self.params.seed, &[u64::MAX, g as u64]);
        let sigma2: Vec<f64> = members.iter().map(|&i| self.sigma2[i]).collect();
        solve_lc(
            self.model,
            &self.data.select(members),
            &sigma2,
            &p,
            self.standardizer,
        )
    }
}

fn background(config: &RunConfig, data: &Dataset) -> Result<BackgroundDistribution, RunError> {
    let m = data.dim();
    Ok(match config.background {
        BackgroundSpec::Data => {
            let rows: Vec<Vec<f64>> = data.samples().iter().map(|s| s.x.clone()).collect();
            let sample_count = (rows.len() > config.sv_draws).then_some(config.sv_draws);
            BackgroundDistribution::Empirical { rows, sample_count }
        }
        BackgroundSpec::Box { lower, upper } => {
            match BackgroundDistribution::uniform_box(vec![lower; m], vec![upper; m])
                .map_err(stage("background"))?
            {
                BackgroundDistribution::UniformBox { lower, upper, .. } => {
                    BackgroundDistribution::UniformBox {
                        lower,
                        upper,
                        sample_count: config.sv_draws,
                    }
                }
                other => other,
            }
        }
    })
}

fn shapley_mode(config: &RunConfig, m: usize) -> ShapleyMode {
    match config.sv_permutations {
        Some(permutations) => ShapleyMode::MonteCarlo { permutations },
        None if m <= AUTO_EXACT_MAX_FEATURES => ShapleyMode::Exact,
        None => ShapleyMode::MonteCarlo {
            permutations: DEFAULT_SV_PERMUTATIONS,
        },
    }
}

/// Group-level baseline scores: mean |z| for Z-score, |mean β| for LIME+ and
/// mean φ for SV+. A method that failed on any member is reported as failed
/// for the group.
fn aggregate_group(
    key: &str,
    members: &[usize],
    samples: &[SampleRecord],
    methods: &[Method],
) -> GroupRecord {
    let recs: Vec<&SampleRecord> = members.iter().map(|&i| &samples[i]).collect();
    let k = recs.len() as f64;
    let mut out = GroupRecord {
        group: key.to_string(),
        sample_ids: recs.iter().map(|r| r.id.clone()).collect(),
        outlier_score: recs.iter().map(|r| r.outlier_score).sum::<f64>() / k,
        ..Default::default()
    };
    for &mth in methods {
        let failed = recs.iter().filter(|r| r.errors.contains_key(&mth)).count();
        if failed > 0 {
            out.errors
                .insert(mth, format!("{failed} of {} members failed", recs.len()));
            continue;
        }
        let m = recs[0].scores[&mth].len();
        let mean = |map: fn(f64) -> f64| -> Vec<f64> {
            (0..m)
                .map(|j| recs.iter().map(|r| map(r.scores[&mth][j])).sum::<f64>() / k)
                .collect()
        };
        let scores = match mth {
            Method::Z => mean(f64::abs),
            Method::LimePlus => mean(|v| v).into_iter().map(f64::abs).collect(),
            _ => mean(|v| v),
        };
        out.scores.insert(mth, scores);
        out.diagnostics.insert(
            mth,
            Diagnostics {
                iterations: recs.len(),
                objective: None,
                converged: true,
            },
        );
    }
    out
}
