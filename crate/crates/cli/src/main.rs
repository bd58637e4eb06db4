use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lcattr_cli::experiment::{self, MexicanHatParams};
use lcattr_cli::run::{EXIT_MODEL_FAILURE, EXIT_VALIDATION};
use lcattr_cli::{
    emit_plot_series, parse_methods, BackgroundSpec, PlotKind, Report, RunConfig, SigmaSpec,
};
use lcattr_core::{model::protocol, Method, ModelHandle};

#[derive(Parser)]
#[command(
    name = "lcattr",
    version,
    about = "Anomaly attribution for black-box regression models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score samples and attribute their deviations to input features
    Run(RunArgs),
    /// Turn a report into a CSV series for plotting
    Plot {
        #[arg(long)]
        report: PathBuf,
        /// heatmap or timeline
        #[arg(long, default_value = "heatmap")]
        kind: PlotKind,
        /// Defaults to standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in experiment and print its data as CSV
    Experiment {
        #[command(subcommand)]
        which: Experiment,
    },
    /// Serve a built-in model over the JSON-lines protocol on stdin/stdout
    Serve {
        #[arg(long)]
        model: String,
    },
}

#[derive(Subcommand)]
enum Experiment {
    /// LC correction at (1, 0) as a function of the observed target
    MexicanHat {
        #[arg(long, default_value_t = -0.1)]
        y_min: f64,
        #[arg(long, default_value_t = 0.5)]
        y_max: f64,
        #[arg(long, default_value_t = 31)]
        points: usize,
        #[arg(long, default_value_t = 0.01)]
        lambda: f64,
        #[arg(long, default_value_t = 0.0)]
        nu: f64,
        #[arg(long, default_value_t = 0.05)]
        sigma2: f64,
        #[arg(long, env = "LCATTR_SEED", default_value_t = 0)]
        seed: u64,
        /// Add a brute-force grid solution per point
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `builtin:mexican_hat`, `builtin:linear?w=..&b=..`, `builtin:step?..` or `exec:<command>`
    #[arg(long)]
    model: String,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: String,
    /// Attribute per group of rows sharing this column's value
    #[arg(long)]
    group_by: Option<String>,
    /// Column with sample ids; row numbers otherwise
    #[arg(long)]
    id_column: Option<String>,
    /// Comma-separated subset of lc,z,lime+,sv+
    #[arg(long, default_value = "lc", value_parser = parse_methods)]
    methods: std::vec::Vec<Method>,
    /// ℓ1 strength of LC
    #[arg(long, default_value_t = 0.1)]
    nu: f64,
    /// ℓ2 strength of LC
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Initial learning rate of LC
    #[arg(long, default_value_t = 0.1)]
    kappa: f64,
    #[arg(long, default_value_t = 0.98)]
    kappa_decay: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, env = "LCATTR_SEED", default_value_t = 0)]
    seed: u64,
    /// `loo` or a positive constant
    #[arg(long, default_value = "loo")]
    sigma2: SigmaSpec,
    /// SV+ background: `data` or `box:LO,HI`
    #[arg(long, default_value = "data")]
    background: BackgroundSpec,
    /// Outlier-score threshold for flagging (`inf` flags nothing)
    #[arg(long)]
    threshold: Option<f64>,
    /// Report path; standard output when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 3 when any solve fails to converge
    #[arg(long)]
    strict: bool,
    /// ℓ1 strength of LIME+
    #[arg(long, default_value_t = lcattr_cli::config::DEFAULT_LIME_NU)]
    lime_nu: f64,
    /// Vicinity draws per gradient estimate and per LIME+ fit
    #[arg(long, default_value_t = 1000)]
    n_s: usize,
    /// Kernel and vicinity variance in standardized units
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Background points per SV+ coalition
    #[arg(long, default_value_t = lcattr_core::DEFAULT_BACKGROUND_DRAWS)]
    sv_draws: usize,
    /// Monte Carlo permutations for SV+; exact enumeration for small inputs when unset
    #[arg(long)]
    sv_permutations: Option<usize>,
    /// Worker threads; all cores when unset
    #[arg(long)]
    jobs: Option<usize>,
    /// Work on raw feature units instead of standardizing
    #[arg(long)]
    no_standardize: bool,
    /// Give constant columns a tiny scale instead of rejecting them
    #[arg(long)]
    floor_constant: bool,
    /// Seconds to wait for each external model reply
    #[arg(long, default_value_t = 30.0)]
    model_timeout: f64,
}

impl RunArgs {
    fn into_config(self) -> (RunConfig, Option<PathBuf>) {
        let mut c = RunConfig::new(self.model, self.data, self.target);
        c.group_by = self.group_by;
        c.id_column = self.id_column;
        c.methods = self.methods;
        c.lc.nu = self.nu;
        c.lc.lambda = self.lambda;
        c.lc.kappa0 = self.kappa;
        c.lc.kappa_decay = self.kappa_decay;
        c.lc.max_iter = self.max_iter;
        c.lc.seed = self.seed;
        c.lc.n_s = self.n_s;
        c.eta = self.eta;
        c.lime_nu = self.lime_nu;
        c.background = self.background;
        c.sv_draws = self.sv_draws;
        c.sv_permutations = self.sv_permutations;
        c.sigma2 = self.sigma2;
        c.threshold = self.threshold;
        c.standardize = !self.no_standardize;
        c.floor_constant = self.floor_constant;
        c.strict = self.strict;
        c.jobs = self.jobs;
        c.model_timeout_secs = self.model_timeout;
        (c, self.out)
    }
}

fn output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run_command(args: RunArgs) -> ExitCode {
    let (config, out) = args.into_config();
    match lcattr_cli::run(&config) {
        Ok(outcome) => {
            let written = match &out {
                Some(p) => {
                    lcattr_cli::write_report(&outcome.report, p).map_err(anyhow::Error::from)
                }
                None => io::stdout()
                    .write_all(outcome.report.to_json().as_bytes())
                    .map_err(anyhow::Error::from),
            };
            if let Err(e) = written {
                eprintln!("error: {e:#}");
                return ExitCode::from(EXIT_VALIDATION as u8);
            }
            for (record, method, msg) in outcome.report.failures() {
                eprintln!("warning: {record}: {method}: {msg}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn plot_command(report: PathBuf, kind: PlotKind, out: Option<PathBuf>) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&report)
        .with_context(|| format!("cannot read {}", report.display()))?;
    let report = Report::from_json(&text).context("not a valid report")?;
    emit_plot_series(&report, kind, output(out.as_ref())?)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => return run_command(args),
        Command::Plot { report, kind, out } => plot_command(report, kind, out),
        Command::Experiment {
            which:
                Experiment::MexicanHat {
                    y_min,
                    y_max,
                    points,
                    lambda,
                    nu,
                    sigma2,
                    seed,
                    oracle,
                    out,
                },
        } => {
            let mut p = MexicanHatParams::default();
            p.lc.lambda = lambda;
            p.lc.nu = nu;
            p.lc.seed = seed;
            p.sigma2 = sigma2;
            p.oracle = oracle;
            experiment::experiment_mexican_hat(&experiment::linspace(y_min, y_max, points), &p)
                .map_err(anyhow::Error::from)
                .and_then(|pts| Ok(experiment::write_curve(&pts, output(out.as_ref())?)?))
        }
        Command::Serve { model } => match ModelHandle::parse(&model) {
            Ok(handle) => {
                protocol::serve(handle.as_model(), io::stdin().lock(), io::stdout().lock())
                    .map_err(anyhow::Error::from)
            }
            Err(e) => Err(anyhow::Error::from(e)),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let model_failure = e
                .downcast_ref::<lcattr_core::Error>()
                .is_some_and(lcattr_core::Error::is_model_failure);
            ExitCode::from(if model_failure {
                EXIT_MODEL_FAILURE
            } else {
                EXIT_VALIDATION
            } as u8)
        }
    }
}
