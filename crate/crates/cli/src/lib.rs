//! `rcm` command-line front end: train, predict, critical-parameter queries,
//! parameter sweeps and the verification suites.

pub mod ingest;
pub mod persist;
pub mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use rcm_core::model::{
    evaluate, family_eta_max, kappa_from_rate, predict, summarize_eta_max, train_with_builder,
    EtaMaxSummary, ParamValue, SolveOptions,
};
use rcm_core::solver_convex::{eta_sweep, EtaMaxStatus};
use rcm_core::solver_nonconvex::{InitialDirection, LocalSearchConfig};
use rcm_core::{BiasMethod, FamilyBuilder, FamilyKind, Label, Param, RcmError, TrainConfig};

use crate::persist::{trace_json, ModelFile};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: wrong number of fields or non-numeric value")]
    Format { line: usize },
    #[error("line {line}: label must be +1, 1 or -1")]
    Label { line: usize },
    #[error("invalid model file: {0}")]
    Model(String),
    #[error(transparent)]
    Core(#[from] RcmError),
    #[error("{failed} verification check(s) failed")]
    VerifyFailed { failed: usize },
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Format { .. } | CliError::Label { .. } | CliError::Model(_) => 4,
            CliError::Core(e) => match e {
                RcmError::EmptyClass(_) => 5,
                RcmError::InfeasibleRch { .. }
                | RcmError::InvalidParameter(_)
                | RcmError::InvalidRate(_) => 6,
                RcmError::DimensionMismatch { .. } => 7,
                _ => 8,
            },
            CliError::VerifyFailed { .. } => 9,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rcm", version, about = "Robust linear classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier and write the model file.
    Train(TrainArgs),
    /// Predict labels for a CSV file with a trained model.
    Predict(PredictArgs),
    /// Print the critical parameter (ν_min, κ_max or ζ_max) of a family.
    EtaMax(FamilyArgs),
    /// Optimal value along a grid of the family parameter, as CSV.
    Sweep(SweepArgs),
    /// Run the verification suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Ch,
    Rch,
    Ellipsoid,
    Fda,
}

impl From<FamilyArg> for FamilyKind {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Ch => FamilyKind::ConvexHull,
            FamilyArg::Rch => FamilyKind::ReducedConvexHull,
            FamilyArg::Ellipsoid => FamilyKind::Ellipsoid,
            FamilyArg::Fda => FamilyKind::Fda,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BiasArg {
    Midpoint,
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    /// Normalized difference of the set centers.
    Mean,
    /// Random unit vector drawn from `--seed`.
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    /// Training CSV: label (+1, 1, -1) then features.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Covariance ridge, relative to trace(cov)/d of each class.
    #[arg(long, default_value_t = 1e-6)]
    pub ridge: f64,
    /// Nearest-point tolerance and bisection width.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Outer-step threshold of the local search.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Iteration cap for the local search.
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial direction of the local search.
    #[arg(long, value_enum, default_value_t = InitArg::Mean)]
    pub init: InitArg,
}

impl FamilyArgs {
    fn solve_options(&self) -> Result<SolveOptions, CliError> {
        if !(self.tol > 0.0) || !(self.eps > 0.0) || !(self.ridge >= 0.0) {
            return Err(CliError::Usage("--tol and --eps must be > 0, --ridge >= 0".into()));
        }
        Ok(SolveOptions {
            tol: self.tol,
            local: LocalSearchConfig {
                epsilon: self.eps,
                max_outer: self.max_iter,
                initial: match self.init {
                    InitArg::Mean => InitialDirection::MeanDifference,
                    InitArg::Random => InitialDirection::RandomSeeded(self.seed),
                },
                ..LocalSearchConfig::default()
            },
            ..SolveOptions::default()
        })
    }

    fn builder(&self) -> Result<FamilyBuilder, CliError> {
        let data = ingest::ingest_csv(&self.data)?;
        Ok(FamilyBuilder::from_dataset(self.family.into(), &data, self.ridge)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: FamilyArgs,
    /// Family parameter (ν, κ or ζ) or `auto` for the critical value.
    #[arg(long)]
    pub param: Option<String>,
    #[arg(long)]
    pub kappa_plus: Option<f64>,
    #[arg(long)]
    pub kappa_minus: Option<f64>,
    /// Acceptable misclassification rate of the positive class.
    #[arg(long)]
    pub rate_plus: Option<f64>,
    #[arg(long)]
    pub rate_minus: Option<f64>,
    #[arg(long, value_enum, default_value_t = BiasArg::Midpoint)]
    pub bias: BiasArg,
    /// Model file to write.
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    /// Optional JSON trace of the local search.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with features, optionally preceded by a label column.
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV of labels; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: FamilyArgs,
    /// Number of grid points.
    #[arg(long, default_value_t = 11)]
    pub grid: usize,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Base seed of the random instances.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn emit(out: Option<&Path>, contents: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, contents),
        None => stdout.write_all(contents.as_bytes()).map_err(|e| CliError::Io {
            path: "<stdout>".into(),
            message: e.to_string(),
        }),
    }
}

fn fmt_param(p: ParamValue) -> String {
    match p {
        ParamValue::None => "none".into(),
        ParamValue::Scalar(v) => format!("{v}"),
        ParamValue::KappaPair(a, b) => format!("({a},{b})"),
    }
}

fn fmt_eta_max(e: EtaMaxSummary) -> String {
    match e {
        EtaMaxSummary::Found(v) => format!("{v}"),
        EtaMaxSummary::NeverIntersects => "never_intersects".into(),
        EtaMaxSummary::AlwaysIntersects => "always_intersects".into(),
    }
}

/// Resolves `--param`, `--kappa-*` and `--rate-*` into one parameter.
pub fn resolve_param(args: &TrainArgs) -> Result<Param, CliError> {
    let family: FamilyKind = args.common.family.into();
    let kappas = (args.kappa_plus, args.kappa_minus);
    let rates = (args.rate_plus, args.rate_minus);
    let has_kappa = kappas.0.is_some() || kappas.1.is_some();
    let has_rate = rates.0.is_some() || rates.1.is_some();
    if (has_kappa || has_rate) && family != FamilyKind::Ellipsoid {
        return Err(CliError::Usage(
            "--kappa-* and --rate-* apply to the ellipsoid family only".into(),
        ));
    }
    let sources = usize::from(args.param.is_some()) + usize::from(has_kappa) + usize::from(has_rate);
    if sources > 1 {
        return Err(CliError::Usage(
            "give exactly one of --param, --kappa-plus/--kappa-minus, --rate-plus/--rate-minus"
                .into(),
        ));
    }
    if has_kappa {
        return match kappas {
            (Some(p), Some(m)) => Ok(Param::KappaPair(p, m)),
            _ => Err(CliError::Usage("--kappa-plus and --kappa-minus go together".into())),
        };
    }
    if has_rate {
        return match rates {
            (Some(p), Some(m)) => Ok(Param::KappaPair(kappa_from_rate(p)?, kappa_from_rate(m)?)),
            _ => Err(CliError::Usage("--rate-plus and --rate-minus go together".into())),
        };
    }
    match args.param.as_deref() {
        None | Some("auto") => Ok(Param::Auto),
        Some(s) => s
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Param::Value)
            .ok_or_else(|| CliError::Usage(format!("--param {s:?} is not a number or auto"))),
    }
}

pub fn run_train(args: &TrainArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let param = resolve_param(args)?;
    let cfg = TrainConfig {
        ridge: args.common.ridge,
        bias: match args.bias {
            BiasArg::Midpoint => BiasMethod::Midpoint,
            BiasArg::Threshold => BiasMethod::Threshold,
        },
        solve: args.common.solve_options()?,
    };
    let data = ingest::ingest_csv(&args.common.data)?;
    let builder = FamilyBuilder::from_dataset(args.common.family.into(), &data, cfg.ridge)?;
    let model = train_with_builder(&data, &builder, param, &cfg)?;
    let metrics = evaluate(&model, &data)?;

    write_file(&args.out, &ModelFile::from_model(&model).to_json())?;
    if let Some(t) = &args.trace {
        write_file(t, &trace_json(model.trace.as_ref()))?;
    }
    writeln!(
        stdout,
        "family={} param={} eta_max={} regime={} g_value={} train_error={}",
        model.family.name(),
        fmt_param(model.param),
        fmt_eta_max(model.eta_max),
        model.regime.name(),
        model.g_value,
        metrics.error_rate
    )
    .map_err(|e| CliError::Io {
        path: "<stdout>".into(),
        message: e.to_string(),
    })
}

pub fn run_predict(args: &PredictArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.model).map_err(|e| CliError::Io {
        path: args.model.display().to_string(),
        message: e.to_string(),
    })?;
    let model = ModelFile::parse(&text)?.to_model()?;
    let table = ingest::read_table(&args.data, model.dim())?;
    let mut out = String::new();
    let mut errors = 0;
    for (i, x) in table.points.iter().enumerate() {
        let y = predict(&model, x)?;
        if table.labels.as_ref().is_some_and(|l| l[i] != y) {
            errors += 1;
        }
        out.push_str(match y {
            Label::Positive => "1\n",
            Label::Negative => "-1\n",
        });
    }
    emit(args.out.as_deref(), &out, stdout)?;
    if args.out.is_some() {
        let mut line = format!("predicted={}", table.points.len());
        if table.labels.is_some() && !table.points.is_empty() {
            line.push_str(&format!(" error_rate={}", errors as f64 / table.points.len() as f64));
        }
        line.push('\n');
        emit(None, &line, stdout)?;
    }
    Ok(())
}

pub fn run_eta_max(args: &FamilyArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let opts = args.solve_options()?;
    let builder = args.builder()?;
    let em = family_eta_max(&builder, opts.tol)?;
    let kind = builder.kind();
    let name = match kind {
        FamilyKind::ReducedConvexHull => "nu_min",
        FamilyKind::Ellipsoid => "kappa_max",
        FamilyKind::Fda => "zeta_max",
        FamilyKind::ConvexHull => "eta_max",
    };
    let line = format!("{name}={}\n", fmt_eta_max(summarize_eta_max(&builder, &em)));
    emit(None, &line, stdout)
}

/// Normalized-η grid for a sweep: the admissible range for the reduced
/// hull, otherwise `[0, 2·η_max]` (or `[0, 1]` without a finite η_max).
pub fn sweep_grid(builder: &FamilyBuilder, n: usize, tol: f64) -> Result<Vec<f64>, CliError> {
    if n < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    let hi = match builder.eta_upper() {
        Some(u) => u,
        None => {
            let em = family_eta_max(builder, tol)?;
            match em.status {
                EtaMaxStatus::Found if em.eta_max > 0.0 => 2.0 * em.eta_max,
                _ => 1.0,
            }
        }
    };
    Ok((0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect())
}

pub fn run_sweep(args: &SweepArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let opts = args.common.solve_options()?;
    let builder = args.common.builder()?;
    let grid = sweep_grid(&builder, args.grid, opts.tol)?;
    let rows = eta_sweep(&builder, &grid, &opts)?;
    let mut out = format!("eta,{},value\n", builder.kind().param_name());
    for (eta, value) in rows {
        out.push_str(&format!("{eta},{},{value}\n", builder.native_from_eta(eta)));
    }
    emit(args.out.as_deref(), &out, stdout)
}

pub fn run_verify(args: &VerifyArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let results = verify::run_all(args.seed);
    let mut failed = 0;
    let mut text = String::new();
    for r in &results {
        if !r.passed {
            failed += 1;
        }
        text.push_str(&r.line());
        text.push('\n');
    }
    text.push_str(&format!(
        "passed {}/{}\n",
        results.len() - failed,
        results.len()
    ));
    emit(None, &text, stdout)?;
    if failed > 0 {
        return Err(CliError::VerifyFailed { failed });
    }
    Ok(())
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(a) => run_train(a, stdout),
        Command::Predict(a) => run_predict(a, stdout),
        Command::EtaMax(a) => run_eta_max(a, stdout),
        Command::Sweep(a) => run_sweep(a, stdout),
        Command::Verify(a) => run_verify(a, stdout),
    }
}
