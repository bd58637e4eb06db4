//! Anomaly attribution for black-box regression models.
//!
//! Given query access to a deterministic regressor `f(x)` and a test set,
//! this crate scores how anomalous the predictions are (Gaussian negative
//! log-likelihood with a locally estimated variance) and attributes the
//! deviation to input variables. The main method, likelihood compensation,
//! finds the correction `δ` to the inputs that best explains the observed
//! targets under an elastic-net prior; Z-score, LIME+ and SV+ baselines are
//! included for comparison.
//!
//! ```
//! use lcattr_core::{solve_lc, BuiltinModel, Dataset, LcHyperParams, Sample, Standardizer};
//!
//! let model = BuiltinModel::linear(vec![2.0, -3.0], 0.0);
//! let data = Dataset::single(Sample::new("t", vec![0.0, 0.0], 1.0));
//! let mut params = LcHyperParams::for_dim(2);
//! params.nu = 0.0;
//! params.n_s = 200;
//! let delta = solve_lc(&model, &data, &[1.0], &params, &Standardizer::identity(2)).unwrap();
//! assert!(delta.scores[0] > 0.0 && delta.scores[1] < 0.0);
//! ```

pub mod baselines;
pub mod error;
pub mod model;
pub mod seed;
pub mod solver;
pub mod stats;
pub mod surrogate;
pub mod types;

pub use baselines::{
    lime_plus, sv_plus, z_score, BackgroundDistribution, ShapleyGame, ShapleyMode,
    DEFAULT_BACKGROUND_DRAWS, MAX_EXACT_FEATURES,
};
pub use error::{Error, Result};
pub use model::{
    mexican_hat, BuiltinModel, ExternalModel, FnModel, Model, ModelHandle, ModelKind,
    StandardizedModel,
};
pub use solver::{
    lc_objective, phi_update, soft_threshold, solve_lc, LcSolution, LcSolver, SolverState,
};
pub use stats::{
    anomaly_score, estimate_variances, kernel_weight, local_variance, outlier_score,
    weighted_residual_variance, AnomalyReport, LocalVariance, SigmaMode, VarianceConfig,
    VarianceEstimate, SIGMA2_FLOOR,
};
pub use surrogate::{
    ridge_gradient, sample_vicinity, weighted_lasso, weighted_lasso_with, LassoConfig, LassoFit,
    LinearFit, VicinitySample,
};
pub use types::{
    fit_standardizer, fit_standardizer_with, validate_dataset, AttributionResult, Dataset,
    Diagnostics, LcHyperParams, Method, Sample, Standardizer, ValidationIssue, ValidationReport,
};
