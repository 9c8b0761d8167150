//! `hwr`: fit, evaluate and analyse transformed wavelet regression models.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use hwr_core::density::{Density, DomainKind, Transform1D};
use hwr_core::experiment::{
    run_convergence, run_table1, run_two_stage, two_stage_model, ExperimentConfig, ExperimentError, LevelRange,
    SubsetPolicy, Table1Config, TwoStageConfig,
};
use hwr_core::kde::BandwidthMethod;
use hwr_core::lsqr::LsqrOptions;
use hwr_core::regression::{assemble, fit, rmse, EtaPolicy, FitOptions, RegressionError, RegressionModel, Storage, TransformPlan};
use hwr_core::sensitivity::{gsi, SensitivityError};
use hwr_core::spectrum::condition_number;
use hwr_core::IndexSet;
use log::info;
use serde::de::DeserializeOwned;
use serde::Deserialize;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// A failure with the exit code it maps to.
enum Failure {
    Config(anyhow::Error),
    Numeric(anyhow::Error),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e:#}"),
            Failure::Numeric(e) => write!(f, "numeric failure: {e:#}"),
        }
    }
}

fn config(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Regression(r) => r.into(),
            e if e.is_config() => Failure::Config(e.into()),
            e => Failure::Numeric(e.into()),
        }
    }
}

fn classify_regression(r: &RegressionError, err: anyhow::Error) -> Failure {
    match r {
        RegressionError::Basis(_) | RegressionError::Shape(_) | RegressionError::Format(_) => Failure::Config(err),
        _ => Failure::Numeric(err),
    }
}

impl From<RegressionError> for Failure {
    fn from(e: RegressionError) -> Self {
        let err = anyhow!("{e}");
        classify_regression(&e, err)
    }
}

impl From<SensitivityError> for Failure {
    fn from(e: SensitivityError) -> Self {
        match e {
            SensitivityError::Basis(_) | SensitivityError::ConstantTerm => Failure::Config(e.into()),
            _ => Failure::Numeric(e.into()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

#[derive(Parser)]
#[command(name = "hwr", version, about = "Transformed hyperbolic wavelet regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a headered CSV of samples and function values.
    Fit(FitArgs),
    /// Evaluate a saved model at the points of a CSV file.
    Predict(PredictArgs),
    /// Run a convergence sweep over wavelet levels.
    Converge(ConvergeArgs),
    /// Extremal eigenvalues of the restricted Gram matrix.
    Table1(Table1Args),
    /// Sensitivity-based term selection followed by a refit.
    TwoStage(TwoStageArgs),
    /// Sensitivity indices of a saved model.
    Gsi(GsiArgs),
}

/// Transform of one input column in a fit configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum FitDim {
    Kde {
        kde: BandwidthMethod,
        #[serde(default = "real_line")]
        domain: DomainKind,
    },
    Known(Density),
}

fn real_line() -> DomainKind {
    DomainKind::RealLine
}

fn target_column() -> String {
    "f".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitConfig {
    order: u32,
    level: u32,
    #[serde(default)]
    subsets: SubsetPolicy,
    /// Maximal level per term order, overriding `level`.
    #[serde(default)]
    order_levels: BTreeMap<usize, u32>,
    dims: Vec<FitDim>,
    #[serde(default)]
    eta: EtaPolicy,
    #[serde(default)]
    storage: Storage,
    #[serde(default)]
    lsqr_tol: Option<f64>,
    #[serde(default = "target_column")]
    target: String,
}

#[derive(Args)]
struct FitArgs {
    /// TOML or JSON fit configuration.
    #[arg(long)]
    config: PathBuf,
    /// Headered CSV with one column per input and the target column.
    #[arg(long)]
    data: PathBuf,
    /// Where to write the model JSON.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    level: Option<u32>,
    /// Explicit ANOVA terms, e.g. "{1};{3};{1,5}".
    #[arg(long)]
    terms: Option<String>,
    #[arg(long)]
    target: Option<String>,
    /// Also estimate the condition number of the design matrix.
    #[arg(long)]
    condition: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Headered CSV; every column except `--target` is an input.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Column with true values; reported RMSE when present.
    #[arg(long, default_value = "f")]
    target: String,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long)]
    config: PathBuf,
    /// Level range as `min:max`.
    #[arg(long, value_parser = parse_range)]
    levels: Option<LevelRange>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    oversampling: Option<f64>,
    #[arg(long)]
    condition: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Table1Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<u32>>,
    #[arg(long, value_parser = parse_range)]
    levels: Option<LevelRange>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TwoStageArgs {
    /// Defaults to the eight-dimensional benchmark when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Summary CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stage-one sensitivity indices of every seed.
    #[arg(long)]
    gsi_out: Option<PathBuf>,
    /// Refitted model of the first seed.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args)]
struct GsiArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.03)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<LevelRange, String> {
    let (a, b) = s.split_once(':').ok_or("expected min:max")?;
    let min = a.trim().parse().map_err(|e| format!("{e}"))?;
    let max = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok(LevelRange::new(min, max))
}

fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(config)?;
    let parsed = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text).map_err(anyhow::Error::from),
        _ => toml::from_str(&text).map_err(anyhow::Error::from),
    };
    parsed.with_context(|| format!("parsing {}", path.display())).map_err(config)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())).map_err(config),
        None => std::io::stdout().write_all(text.as_bytes()).context("writing output").map_err(config),
    }
}

/// Input rows and optional target column of a headered CSV.
fn read_table(path: &Path, target: &str) -> CliResult<(Vec<String>, Vec<Vec<f64>>, Option<Vec<f64>>)> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display())).map_err(config)?;
    let headers: Vec<String> = reader.headers().map_err(|e| config(anyhow!(e)))?.iter().map(str::to_string).collect();
    let t = headers.iter().position(|h| h == target);
    let inputs: Vec<String> = headers.iter().enumerate().filter(|(i, _)| Some(*i) != t).map(|(_, h)| h.clone()).collect();
    let mut ys = Vec::new();
    let mut f = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| config(anyhow!(e)))?;
        let mut row = Vec::with_capacity(inputs.len());
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| config(anyhow!("row {}: '{field}' is not a number", line + 2)))?;
            if Some(i) == t {
                f.push(v);
            } else {
                row.push(v);
            }
        }
        ys.push(row);
    }
    Ok((inputs, ys, t.map(|_| f)))
}

fn run_fit(args: FitArgs) -> CliResult<()> {
    let mut cfg: FitConfig = load(&args.config)?;
    if let Some(m) = args.order {
        cfg.order = m;
    }
    if let Some(n) = args.level {
        cfg.level = n;
    }
    if let Some(t) = args.target {
        cfg.target = t;
    }
    if let Some(terms) = &args.terms {
        let parsed = terms
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse())
            .collect::<Result<Vec<_>, _>>()
            .map_err(config)?;
        cfg.subsets = SubsetPolicy::Explicit { terms: parsed };
    }
    let (_, ys, f) = read_table(&args.data, &cfg.target)?;
    let f = f.ok_or_else(|| config(anyhow!("data has no '{}' column", cfg.target)))?;
    let d = cfg.dims.len();
    let subsets = cfg.subsets.subsets(d)?;
    let idx = IndexSet::with_order_levels(d, &subsets, &cfg.order_levels, cfg.level).map_err(config)?;
    let plan: Vec<TransformPlan> = cfg
        .dims
        .iter()
        .map(|dim| match dim {
            FitDim::Known(density) => TransformPlan::Known(Transform1D::new(density.clone())),
            FitDim::Kde { kde, domain } => TransformPlan::Kde {
                bandwidth: *kde,
                domain: *domain,
            },
        })
        .collect();
    let mut opts = FitOptions::new(cfg.order);
    opts.eta = cfg.eta;
    opts.storage = cfg.storage;
    if let Some(tol) = cfg.lsqr_tol {
        opts.lsqr = LsqrOptions { tol, max_iter: None };
    }
    let model = fit(&ys, &f, &plan, idx, &opts)?;
    let s = &model.solver;
    eprintln!(
        "fitted {} coefficients from {} samples: {} LSQR iterations ({:?}), residual {:.3e}, relative {:.3e}",
        s.cols,
        s.rows,
        s.iterations,
        s.stop,
        s.residual_norm,
        s.residual_norm / s.rhs_norm.max(f64::MIN_POSITIVE)
    );
    if args.condition {
        let a = assemble(&model.coords(&ys)?, model.index_set(), model.kernel());
        let c = condition_number(&a, 1e-8);
        eprintln!("condition number {:.4} (sigma_min {:.4e}, sigma_max {:.4e})", c.condition, c.sigma_min, c.sigma_max);
    }
    let json = model.to_json()?;
    fs::write(&args.out, json).with_context(|| format!("writing {}", args.out.display())).map_err(config)
}

fn load_model(path: &Path) -> CliResult<RegressionModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(config)?;
    RegressionModel::from_json(&text).map_err(|e| config(anyhow!("{}: {e}", path.display())))
}

fn run_predict(args: PredictArgs) -> CliResult<()> {
    let model = load_model(&args.model)?;
    let (inputs, ys, truth) = read_table(&args.data, &args.target)?;
    let pred = model.predict(&ys)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = inputs.clone();
    header.push("prediction".into());
    w.write_record(&header).map_err(|e| config(anyhow!(e)))?;
    for (y, p) in ys.iter().zip(&pred) {
        let mut rec: Vec<String> = y.iter().map(|v| v.to_string()).collect();
        rec.push(p.to_string());
        w.write_record(&rec).map_err(|e| config(anyhow!(e)))?;
    }
    let bytes = w.into_inner().map_err(|e| config(anyhow!("{e}")))?;
    if let Some(t) = truth {
        if let Some(e) = rmse(&pred, &t) {
            eprintln!("rmse {e:.6e} over {} points", t.len());
        }
    }
    emit(args.out.as_deref(), &String::from_utf8_lossy(&bytes))
}

fn run_converge(args: ConvergeArgs) -> CliResult<()> {
    let mut cfg: ExperimentConfig = load(&args.config)?;
    if let Some(l) = args.levels {
        cfg.levels = l;
        cfg.slope_window = None;
    }
    if let Some(s) = args.seeds {
        cfg.seeds = s;
    }
    if let Some(m) = args.order {
        cfg.order = m;
    }
    if let Some(c) = args.oversampling {
        cfg.oversampling = c;
    }
    cfg.condition |= args.condition;
    let table = run_convergence(&cfg)?;
    let w = table.window;
    eprintln!("slope over levels {}..={}: {:.3} (median of {} seeds)", w.min, w.max, table.slope, table.seed_slopes.len());
    if let Some(c) = table.max_condition() {
        eprintln!("largest condition number {c:.3}");
    }
    emit(args.out.as_deref(), &table.to_csv())
}

fn run_table1_cmd(args: Table1Args) -> CliResult<()> {
    let mut cfg: Table1Config = match &args.config {
        Some(p) => load(p)?,
        None => Table1Config::default(),
    };
    if let Some(o) = args.orders {
        cfg.orders = o;
    }
    if let Some(l) = args.levels {
        cfg.levels = l;
    }
    let table = run_table1(&cfg)?;
    emit(args.out.as_deref(), &table.to_csv())
}

fn run_two_stage_cmd(args: TwoStageArgs) -> CliResult<()> {
    let mut cfg: TwoStageConfig = match &args.config {
        Some(p) => load(p)?,
        None => TwoStageConfig::default(),
    };
    if let Some(s) = args.seeds {
        cfg.seeds = s;
    }
    if let Some(m) = args.samples {
        cfg.samples = m;
    }
    if let Some(t) = args.threshold {
        cfg.threshold = t;
    }
    let report = run_two_stage(&cfg)?;
    for r in &report.runs {
        let set: Vec<String> = r.active_set.iter().map(ToString::to_string).collect();
        eprintln!(
            "seed {}: rmse {:.4} -> {:.4}, active set {}",
            r.seed,
            r.stage1_rmse,
            r.stage2_rmse,
            set.join(" ")
        );
    }
    eprintln!("median rmse reduction {:.1}%", 100.0 * report.median_improvement());
    if let Some(p) = &args.gsi_out {
        emit(Some(p), &report.gsi_csv())?;
    }
    if let Some(p) = &args.model_out {
        let (_, model) = two_stage_model(&cfg, cfg.seeds[0])?;
        emit(Some(p), &model.to_json()?)?;
    }
    emit(args.out.as_deref(), &report.to_csv())
}

fn run_gsi(args: GsiArgs) -> CliResult<()> {
    let model = load_model(&args.model)?;
    let report = gsi(&model, args.threshold)?;
    let set: Vec<String> = report.active_set.iter().map(ToString::to_string).collect();
    eprintln!("total variance {:.6e}; active set {}", report.total_variance, set.join(" "));
    emit(args.out.as_deref(), &report.to_csv())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Predict(a) => run_predict(a),
        Command::Converge(a) => run_converge(a),
        Command::Table1(a) => run_table1_cmd(a),
        Command::TwoStage(a) => run_two_stage_cmd(a),
        Command::Gsi(a) => run_gsi(a),
    };
    match result {
        Ok(()) => {
            info!("done");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(match f {
                Failure::Config(_) => EXIT_CONFIG,
                Failure::Numeric(_) => EXIT_NUMERIC,
            })
        }
    }
}
