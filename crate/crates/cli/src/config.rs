//! Run configuration shared by the binary and the library entry points.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use lcattr_core::{LcHyperParams, Method};
use serde::{Deserialize, Serialize};

/// How the per-sample observation variance is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSpec {
    LeaveOneOut,
    Constant(f64),
}

impl FromStr for SigmaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("loo") {
            return Ok(SigmaSpec::LeaveOneOut);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(SigmaSpec::Constant(v)),
            _ => Err(format!("expected `loo` or a positive number, got `{s}`")),
        }
    }
}

impl fmt::Display for SigmaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaSpec::LeaveOneOut => f.write_str("loo"),
            SigmaSpec::Constant(v) => write!(f, "{v}"),
        }
    }
}

/// Background measure for SV+, in original feature units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundSpec {
    /// The ingested rows themselves.
    Data,
    /// Uniform box with the same bounds on every axis.
    Box { lower: f64, upper: f64 },
}

impl FromStr for BackgroundSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "data" {
            return Ok(BackgroundSpec::Data);
        }
        let bounds = s
            .strip_prefix("box:")
            .ok_or_else(|| format!("expected `data` or `box:LO,HI`, got `{s}`"))?;
        let parts: Vec<&str> = bounds.split(',').collect();
        let parse = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad box bound `{p}`"))
        };
        match parts[..] {
            [lo, hi] => {
                let (lower, upper) = (parse(lo)?, parse(hi)?);
                if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
                    return Err(format!(
                        "box bounds must be finite with LO < HI, got `{bounds}`"
                    ));
                }
                Ok(BackgroundSpec::Box { lower, upper })
            }
            _ => Err(format!("expected `box:LO,HI`, got `{s}`")),
        }
    }
}

impl fmt::Display for BackgroundSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackgroundSpec::Data => f.write_str("data"),
            BackgroundSpec::Box { lower, upper } => write!(f, "box:{lower},{upper}"),
        }
    }
}

/// Exact enumeration below this many features when `--sv-permutations` is unset.
pub const AUTO_EXACT_MAX_FEATURES: usize = 12;
pub const DEFAULT_SV_PERMUTATIONS: usize = 2000;
pub const DEFAULT_LIME_NU: f64 = 0.005;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: String,
    pub data: PathBuf,
    pub target: String,
    pub group_by: Option<String>,
    pub id_column: Option<String>,
    pub methods: Vec<Method>,
    pub lc: LcHyperParams,
    /// Isotropic kernel and vicinity width in standardized units.
    pub eta: f64,
    pub lime_nu: f64,
    pub background: BackgroundSpec,
    pub sv_draws: usize,
    /// `None` picks exact enumeration for small M, else Monte Carlo.
    pub sv_permutations: Option<usize>,
    pub sigma2: SigmaSpec,
    pub threshold: Option<f64>,
    pub standardize: bool,
    pub floor_constant: bool,
    pub strict: bool,
    pub jobs: Option<usize>,
    pub model_timeout_secs: f64,
}

impl RunConfig {
    /// Defaults for everything except the required inputs.
    pub fn new(
        model: impl Into<String>,
        data: impl Into<PathBuf>,
        target: impl Into<String>,
    ) -> Self {
        RunConfig {
            model: model.into(),
            data: data.into(),
            target: target.into(),
            group_by: None,
            id_column: None,
            methods: vec![Method::Lc],
            // dimension is fixed up once the data is read
            lc: LcHyperParams::for_dim(0),
            eta: 1.0,
            lime_nu: DEFAULT_LIME_NU,
            background: BackgroundSpec::Data,
            sv_draws: lcattr_core::DEFAULT_BACKGROUND_DRAWS,
            sv_permutations: None,
            sigma2: SigmaSpec::LeaveOneOut,
            threshold: None,
            standardize: true,
            floor_constant: false,
            strict: false,
            jobs: None,
            model_timeout_secs: lcattr_core::model::DEFAULT_TIMEOUT.as_secs_f64(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.methods.is_empty() {
            return Err("at least one method is required".into());
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.lime_nu >= 0.0) {
            return Err(format!("lime nu must be >= 0, got {}", self.lime_nu));
        }
        if self.sv_draws == 0 {
            return Err("sv draws must be positive".into());
        }
        if self.sv_permutations == Some(0) {
            return Err("sv permutations must be positive".into());
        }
        if let Some(t) = self.threshold {
            if t.is_nan() {
                return Err("threshold must be a number".into());
            }
        }
        if !(self.model_timeout_secs > 0.0) {
            return Err("model timeout must be positive".into());
        }
        Ok(())
    }
}

/// Parses a comma-separated method list, keeping first occurrences in order.
pub fn parse_methods(s: &str) -> Result<Vec<Method>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let m: Method = part.parse().map_err(|e| format!("{e}"))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err("no methods given".into());
    }
    Ok(out)
}
