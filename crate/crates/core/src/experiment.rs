//! Experiment harness: test functions, sampling rules, convergence sweeps,
//! extremal-eigenvalue tables and the two-stage sensitivity pipeline.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::density::{default_eta, Density, DensityError, ProductTransform, Transform1D};
use crate::kde::BandwidthMethod;
use crate::lsqr::LsqrOptions;
use crate::regression::{assemble, fit, gram_restricted, rmse, EtaPolicy, FitOptions, RegressionError, RegressionModel, Storage, TransformPlan};
use crate::sensitivity::{gsi, SensitivityError, SensitivityReport};
use crate::spectrum::condition_number;
use crate::wavelet::{BasisError, IndexSet, Subset};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
}

impl ExperimentError {
    /// Whether the failure comes from the configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, ExperimentError::Config(_) | ExperimentError::Basis(_))
    }
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

/// Test functions with closed-form evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `exp(-‖y‖²)`.
    Gauss,
    /// `Π (y_i - 1/2)³ (y_i + 1/2)³`.
    Interval,
    /// `Π y_i³`.
    Cube,
    /// `exp(Σ y_i)`.
    Exp,
    /// Eight-dimensional sum of smooth, kinked and interacting terms; the
    /// `y_6` term is `30 y_6³ (1 - y_6)²`.
    F8,
}

impl TestFunction {
    pub const ALL: [TestFunction; 5] = [Self::Gauss, Self::Interval, Self::Cube, Self::Exp, Self::F8];

    pub fn name(self) -> &'static str {
        match self {
            Self::Gauss => "gauss",
            Self::Interval => "interval",
            Self::Cube => "cube",
            Self::Exp => "exp",
            Self::F8 => "f8",
        }
    }

    /// Required dimension, if the function is not defined for every `d`.
    pub fn fixed_dim(self) -> Option<usize> {
        match self {
            Self::F8 => Some(8),
            _ => None,
        }
    }

    pub fn eval(self, y: &[f64]) -> f64 {
        match self {
            Self::Gauss => (-y.iter().map(|v| v * v).sum::<f64>()).exp(),
            Self::Interval => y.iter().map(|v| ((v - 0.5) * (v + 0.5)).powi(3)).product(),
            Self::Cube => y.iter().map(|v| v.powi(3)).product(),
            Self::Exp => y.iter().sum::<f64>().exp(),
            Self::F8 => {
                0.2 * y[0] * y[0]
                    + 0.5 * (2.0 * std::f64::consts::PI * y[2]).cos()
                    + (-y[3] * y[3]).exp()
                    + y[4].sqrt()
                    + 30.0 * y[5].powi(3) * (1.0 - y[5]).powi(2)
                    + 0.5 * (4.0 * y[6] - 2.0).abs()
                    + 5.0 * (-y[0] * y[0] - y[4] * y[4]).exp()
            }
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestFunction {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| config_err(format!("unknown test function '{s}'")))
    }
}

/// One input dimension: the density samples are drawn from, and optionally a
/// kernel density estimate replacing it in the transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSpec {
    #[serde(flatten)]
    pub density: Density,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kde: Option<BandwidthMethod>,
}

impl DimSpec {
    pub fn known(density: Density) -> Self {
        Self { density, kde: None }
    }

    pub fn estimated(density: Density, method: BandwidthMethod) -> Self {
        Self {
            density,
            kde: Some(method),
        }
    }

    pub fn plan(&self) -> TransformPlan {
        match self.kde {
            None => TransformPlan::Known(Transform1D::new(self.density.clone())),
            Some(bandwidth) => TransformPlan::Kde {
                bandwidth,
                domain: self.density.domain(),
            },
        }
    }
}

/// Which ANOVA terms enter the index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SubsetPolicy {
    /// Every subset of `{1, …, d}`.
    #[default]
    Full,
    /// Subsets with at most `nu` elements.
    Order { nu: usize },
    /// An explicit list; the empty set is added if missing.
    Explicit { terms: Vec<Subset> },
}

impl SubsetPolicy {
    pub fn subsets(&self, d: usize) -> Result<Vec<Subset>, ExperimentError> {
        Ok(match self {
            SubsetPolicy::Full => Subset::all_up_to(d, d),
            SubsetPolicy::Order { nu } => {
                if *nu == 0 || *nu > d {
                    return Err(config_err(format!("order {nu} must lie in 1..={d}")));
                }
                Subset::all_up_to(d, *nu)
            }
            SubsetPolicy::Explicit { terms } => {
                let mut t = terms.clone();
                if !t.iter().any(Subset::is_empty) {
                    t.push(Subset::empty());
                }
                t
            }
        })
    }
}

fn one() -> f64 {
    1.0
}

fn three() -> usize {
    3
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

/// Inclusive level range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelRange {
    pub min: u32,
    pub max: u32,
}

impl LevelRange {
    pub fn new(min: u32, max: u32) -> Self {
        Self { min, max }
    }

    pub fn iter(self) -> impl Iterator<Item = u32> {
        self.min..=self.max
    }

    /// The upper half of the range; the middle level is included when the
    /// count is odd.
    pub fn upper_half(self) -> LevelRange {
        let count = self.max - self.min + 1;
        LevelRange::new(self.min + count / 2, self.max)
    }

    fn contains(self, n: u32) -> bool {
        (self.min..=self.max).contains(&n)
    }
}

/// Configuration of a convergence sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub function: TestFunction,
    pub dims: Vec<DimSpec>,
    pub order: u32,
    pub levels: LevelRange,
    #[serde(default)]
    pub subsets: SubsetPolicy,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// `c` in `M = ⌈c N log₂ N⌉`.
    #[serde(default = "one")]
    pub oversampling: f64,
    /// Fixed sample count overriding the oversampling rule.
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default = "three")]
    pub test_multiplier: usize,
    #[serde(default)]
    pub eta: EtaPolicy,
    #[serde(default)]
    pub storage: Storage,
    #[serde(default)]
    pub lsqr_tol: Option<f64>,
    /// Levels used for the slope fit; the upper half of `levels` by default.
    #[serde(default)]
    pub slope_window: Option<LevelRange>,
    /// Also estimate the condition number of every design matrix.
    #[serde(default)]
    pub condition: bool,
}

impl ExperimentConfig {
    /// One-dimensional sweep with known density and default settings.
    pub fn new(function: TestFunction, dims: Vec<DimSpec>, order: u32, levels: LevelRange) -> Self {
        Self {
            function,
            dims,
            order,
            levels,
            subsets: SubsetPolicy::Full,
            seeds: default_seeds(),
            oversampling: 1.0,
            samples: None,
            test_multiplier: 3,
            eta: EtaPolicy::PerTerm,
            storage: Storage::Explicit,
            lsqr_tol: None,
            slope_window: None,
            condition: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let d = self.dim();
        if d == 0 {
            return Err(config_err("at least one dimension is required"));
        }
        if let Some(fd) = self.function.fixed_dim() {
            if fd != d {
                return Err(config_err(format!("{} needs {fd} dimensions, {d} given", self.function)));
            }
        }
        if self.order == 0 {
            return Err(config_err("wavelet order must be positive"));
        }
        if self.levels.min > self.levels.max {
            return Err(config_err("level range is empty"));
        }
        if let Some(w) = self.slope_window {
            if w.min > w.max || !self.levels.contains(w.min) || !self.levels.contains(w.max) {
                return Err(config_err("slope window must lie inside the level range"));
            }
        }
        if self.seeds.is_empty() {
            return Err(config_err("at least one seed is required"));
        }
        if !(self.oversampling > 0.0) {
            return Err(config_err("oversampling constant must be positive"));
        }
        if self.test_multiplier == 0 || self.samples == Some(0) {
            return Err(config_err("sample counts must be positive"));
        }
        if let Some(t) = self.lsqr_tol {
            if !(t > 0.0) {
                return Err(config_err("LSQR tolerance must be positive"));
            }
        }
        self.subsets.subsets(d)?;
        Ok(())
    }

    pub fn slope_window(&self) -> LevelRange {
        self.slope_window.unwrap_or_else(|| self.levels.upper_half())
    }

    pub fn index_set(&self, n: u32) -> Result<IndexSet, ExperimentError> {
        Ok(IndexSet::new(self.dim(), n, &self.subsets.subsets(self.dim())?)?)
    }

    pub fn fit_options(&self) -> FitOptions {
        let mut o = FitOptions::new(self.order);
        o.eta = self.eta;
        o.storage = self.storage;
        if let Some(t) = self.lsqr_tol {
            o.lsqr = LsqrOptions { tol: t, max_iter: None };
        }
        o
    }

    pub fn sampler(&self) -> ProductTransform {
        ProductTransform::new(self.dims.iter().map(|s| Transform1D::new(s.density.clone())).collect())
    }

    pub fn plan(&self) -> Vec<TransformPlan> {
        self.dims.iter().map(DimSpec::plan).collect()
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Hex SHA-256 of the JSON serialization.
pub fn config_hash<C: Serialize>(config: &C) -> String {
    let json = serde_json::to_string(config).expect("configuration serializes");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// `⌈c N log₂ N⌉`, at least `N`.
pub fn sample_count(basis_size: usize, oversampling: f64) -> usize {
    let n = basis_size as f64;
    ((oversampling * n * n.log2()).ceil() as usize).max(basis_size)
}

/// Training and test draws come from separate stream families of one seed.
pub fn draw(
    sampler: &ProductTransform,
    function: TestFunction,
    count: usize,
    seed: u64,
    family: u32,
) -> Result<(Vec<Vec<f64>>, Vec<f64>), ExperimentError> {
    let ys = sampler.sample_family(count, seed, family)?;
    let f = ys.iter().map(|y| function.eval(y)).collect();
    Ok((ys, f))
}

const TRAIN: u32 = 0;
const TEST: u32 = 1;

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Least-squares slope of `log₂ e` against `n`.
pub fn fit_slope(points: &[(u32, f64)]) -> f64 {
    let k = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let mx = points.iter().map(|p| p.0 as f64).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1.log2()).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 as f64 - mx) * (p.1.log2() - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub seed: u64,
    pub n: u32,
    pub basis_size: usize,
    pub samples: usize,
    pub rmse: f64,
    pub iterations: usize,
    pub condition: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub config_hash: String,
    pub version: String,
    pub window: LevelRange,
    /// Rows sorted by level, then seed.
    pub rows: Vec<ConvergenceRow>,
    /// Slope over the window for each seed, in seed order.
    pub seed_slopes: Vec<(u64, f64)>,
    /// Median of the per-seed slopes.
    pub slope: f64,
}

impl ConvergenceTable {
    /// Median RMSE over seeds at level `n`.
    pub fn median_rmse(&self, n: u32) -> Option<f64> {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.n == n).map(|r| r.rmse).collect();
        (!v.is_empty()).then(|| median(&v))
    }

    pub fn max_condition(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.condition).reduce(f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,seed,basis_size,samples,rmse,iterations,condition,window_slope,config_hash,version\n");
        for r in &self.rows {
            let cond = r.condition.map(|c| format!("{c:.6e}")).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{:.6e},{},{},{:.4},{},{}\n",
                r.n, r.seed, r.basis_size, r.samples, r.rmse, r.iterations, cond, self.slope, self.config_hash, self.version
            ));
        }
        s
    }
}

fn run_cell(cfg: &ExperimentConfig, n: u32, seed: u64) -> Result<ConvergenceRow, ExperimentError> {
    let idx = cfg.index_set(n)?;
    let basis_size = idx.len();
    let m = cfg.samples.unwrap_or_else(|| sample_count(basis_size, cfg.oversampling));
    let sampler = cfg.sampler();
    let (ys, f) = draw(&sampler, cfg.function, m, seed, TRAIN)?;
    let (yt, ft) = draw(&sampler, cfg.function, cfg.test_multiplier * m, seed, TEST)?;
    let model = fit(&ys, &f, &cfg.plan(), idx, &cfg.fit_options())?;
    let condition = if cfg.condition {
        let coords = model.coords(&ys)?;
        let a = assemble(&coords, model.index_set(), model.kernel());
        Some(condition_number(&a, 1e-8).condition)
    } else {
        None
    };
    let p = model.predict(&yt)?;
    Ok(ConvergenceRow {
        seed,
        n,
        basis_size,
        samples: m,
        rmse: rmse(&p, &ft).expect("non-empty test set"),
        iterations: model.solver.iterations,
        condition,
    })
}

/// Fits every `(seed, level)` cell and fits slopes over the window.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceTable, ExperimentError> {
    cfg.validate()?;
    let cells: Vec<(u32, u64)> = cfg
        .levels
        .iter()
        .flat_map(|n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let mut rows = cells
        .par_iter()
        .map(|&(n, s)| run_cell(cfg, n, s))
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by_key(|r| (r.n, r.seed));
    let window = cfg.slope_window();
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let seed_slopes: Vec<(u64, f64)> = seeds
        .iter()
        .map(|&s| {
            let pts: Vec<(u32, f64)> = rows
                .iter()
                .filter(|r| r.seed == s && window.contains(r.n))
                .map(|r| (r.n, r.rmse))
                .collect();
            (s, fit_slope(&pts))
        })
        .collect();
    let slope = median(&seed_slopes.iter().map(|p| p.1).collect::<Vec<_>>());
    Ok(ConvergenceTable {
        config_hash: cfg.hash(),
        version: VERSION.to_string(),
        window,
        rows,
        seed_slopes,
        slope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Config {
    pub orders: Vec<u32>,
    pub levels: LevelRange,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            orders: vec![2, 3],
            levels: LevelRange::new(2, 7),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub m: u32,
    /// `None` for the full-torus Gram.
    pub n: Option<u32>,
    pub eta: f64,
    pub mu_min: f64,
    pub mu_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub config_hash: String,
    pub version: String,
    pub rows: Vec<Table1Row>,
}

impl Table1 {
    pub fn get(&self, m: u32, n: Option<u32>) -> Option<&Table1Row> {
        self.rows.iter().find(|r| r.m == m && r.n == n)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,n,eta,mu_min,mu_max,config_hash,version\n");
        for r in &self.rows {
            let n = r.n.map(|n| n.to_string()).unwrap_or_else(|| "torus".into());
            s.push_str(&format!(
                "{},{},{:.6e},{:.6},{:.6},{},{}\n",
                r.m, n, r.eta, r.mu_min, r.mu_max, self.config_hash, self.version
            ));
        }
        s
    }
}

/// Extremal eigenvalues of the Gram matrix restricted to `[-1/2 + η, 1/2]`,
/// plus the full-torus column computed at the finest level.
pub fn run_table1(cfg: &Table1Config) -> Result<Table1, ExperimentError> {
    if cfg.orders.iter().any(|&m| m < 1) || cfg.levels.min > cfg.levels.max {
        return Err(config_err("orders must be positive and the level range non-empty"));
    }
    let mut cells: Vec<(u32, Option<u32>)> = Vec::new();
    for &m in &cfg.orders {
        cells.extend(cfg.levels.iter().map(|n| (m, Some(n))));
        cells.push((m, None));
    }
    let rows = cells
        .par_iter()
        .map(|&(m, n)| {
            let (level, eta) = match n {
                Some(n) => (n, default_eta(m, n, 1)),
                None => (cfg.levels.max, 0.0),
            };
            let g = gram_restricted(m, level, eta)?;
            Ok(Table1Row {
                m,
                n,
                eta,
                mu_min: g.mu_min,
                mu_max: g.mu_max,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(Table1 {
        config_hash: config_hash(cfg),
        version: VERSION.to_string(),
        rows,
    })
}

/// The two-stage pipeline: a low-level fit of all terms up to order `nu`,
/// sensitivity-based term selection, and a refit on the selected terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageConfig {
    pub function: TestFunction,
    pub dims: Vec<DimSpec>,
    pub order: u32,
    pub nu: usize,
    pub samples: usize,
    #[serde(default = "three")]
    pub test_multiplier: usize,
    pub stage1_level: u32,
    /// Stage-two maximal level per term order.
    pub stage2_levels: BTreeMap<usize, u32>,
    pub threshold: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

impl Default for TwoStageConfig {
    fn default() -> Self {
        let dpi = Some(BandwidthMethod::Dpi);
        let dims = [
            Density::Normal,
            Density::Laplace,
            Density::Cauchy,
            Density::GaussMixture,
            Density::Exponential,
            Density::Uniform,
            Density::Beta { alpha: 0.5 },
            Density::Uniform,
        ]
        .into_iter()
        .map(|density| DimSpec { density, kde: dpi })
        .collect();
        Self {
            function: TestFunction::F8,
            dims,
            order: 2,
            nu: 2,
            samples: 1000,
            test_multiplier: 3,
            stage1_level: 2,
            stage2_levels: BTreeMap::from([(1, 5), (2, 3)]),
            threshold: 0.03,
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

impl TwoStageConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let d = self.dims.len();
        if d == 0 {
            return Err(config_err("at least one dimension is required"));
        }
        if let Some(fd) = self.function.fixed_dim() {
            if fd != d {
                return Err(config_err(format!("{} needs {fd} dimensions, {d} given", self.function)));
            }
        }
        if self.order == 0 || self.nu == 0 || self.nu > d {
            return Err(config_err("order must be positive and nu in 1..=d"));
        }
        if self.samples == 0 || self.test_multiplier == 0 || self.seeds.is_empty() {
            return Err(config_err("sample counts and seed list must be non-empty"));
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(config_err("threshold must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub seed: u64,
    pub stage1_rmse: f64,
    pub stage2_rmse: f64,
    pub stage1_size: usize,
    pub stage2_size: usize,
    pub active_set: Vec<Subset>,
    pub sensitivity: SensitivityReport,
}

impl StageOutcome {
    /// Relative RMSE reduction of stage two.
    pub fn improvement(&self) -> f64 {
        1.0 - self.stage2_rmse / self.stage1_rmse
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageReport {
    pub config_hash: String,
    pub version: String,
    pub runs: Vec<StageOutcome>,
}

impl TwoStageReport {
    pub fn median_improvement(&self) -> f64 {
        median(&self.runs.iter().map(StageOutcome::improvement).collect::<Vec<_>>())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("seed,stage1_rmse,stage2_rmse,stage1_size,stage2_size,active_set,config_hash,version\n");
        for r in &self.runs {
            let set: Vec<String> = r.active_set.iter().map(ToString::to_string).collect();
            s.push_str(&format!(
                "{},{:.6e},{:.6e},{},{},\"{}\",{},{}\n",
                r.seed,
                r.stage1_rmse,
                r.stage2_rmse,
                r.stage1_size,
                r.stage2_size,
                set.join(" "),
                self.config_hash,
                self.version
            ));
        }
        s
    }

    /// Stage-one sensitivity indices of every run, with a leading seed column.
    pub fn gsi_csv(&self) -> String {
        let mut s = String::from("seed,u,variance,gsi,active\n");
        for r in &self.runs {
            for line in r.sensitivity.to_csv().lines().skip(1) {
                s.push_str(&format!("{},{line}\n", r.seed));
            }
        }
        s
    }
}

fn two_stage_seed(cfg: &TwoStageConfig, seed: u64) -> Result<(StageOutcome, RegressionModel), ExperimentError> {
    let d = cfg.dims.len();
    let sampler = ProductTransform::new(cfg.dims.iter().map(|s| Transform1D::new(s.density.clone())).collect());
    let plan: Vec<TransformPlan> = cfg.dims.iter().map(DimSpec::plan).collect();
    let (ys, f) = draw(&sampler, cfg.function, cfg.samples, seed, TRAIN)?;
    let (yt, ft) = draw(&sampler, cfg.function, cfg.test_multiplier * cfg.samples, seed, TEST)?;
    let opts = FitOptions::new(cfg.order);

    let idx1 = IndexSet::full(d, cfg.stage1_level, cfg.nu)?;
    let stage1_size = idx1.len();
    let m1 = fit(&ys, &f, &plan, idx1, &opts)?;
    let stage1_rmse = rmse(&m1.predict(&yt)?, &ft).expect("non-empty test set");
    let sensitivity = gsi(&m1, cfg.threshold)?;
    let active_set = sensitivity.active_set.clone();

    let idx2 = IndexSet::with_order_levels(d, &active_set, &cfg.stage2_levels, cfg.stage1_level)?;
    let stage2_size = idx2.len();
    let m2 = fit(&ys, &f, &plan, idx2, &opts)?;
    let stage2_rmse = rmse(&m2.predict(&yt)?, &ft).expect("non-empty test set");
    Ok((
        StageOutcome {
            seed,
            stage1_rmse,
            stage2_rmse,
            stage1_size,
            stage2_size,
            active_set,
            sensitivity,
        },
        m2,
    ))
}

/// Runs the pipeline for every seed; outcomes are in seed order.
pub fn run_two_stage(cfg: &TwoStageConfig) -> Result<TwoStageReport, ExperimentError> {
    cfg.validate()?;
    let mut runs = cfg
        .seeds
        .par_iter()
        .map(|&s| two_stage_seed(cfg, s).map(|r| r.0))
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by_key(|r| r.seed);
    Ok(TwoStageReport {
        config_hash: config_hash(cfg),
        version: VERSION.to_string(),
        runs,
    })
}

/// The pipeline for one seed, returning the refitted model as well.
pub fn two_stage_model(cfg: &TwoStageConfig, seed: u64) -> Result<(StageOutcome, RegressionModel), ExperimentError> {
    cfg.validate()?;
    two_stage_seed(cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn upper_half_windows() {
        assert_eq!(LevelRange::new(3, 8).upper_half(), LevelRange::new(6, 8));
        assert_eq!(LevelRange::new(2, 9).upper_half(), LevelRange::new(6, 9));
        assert_eq!(LevelRange::new(2, 8).upper_half(), LevelRange::new(5, 8));
        assert_eq!(LevelRange::new(4, 4).upper_half(), LevelRange::new(4, 4));
    }

    #[test]
    fn slope_of_exact_power() {
        let pts: Vec<(u32, f64)> = (3..8).map(|n| (n, 5.0 * 2f64.powf(-2.5 * n as f64))).collect();
        assert_relative_eq!(fit_slope(&pts), -2.5, epsilon = 1e-12);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn function_values() {
        assert_relative_eq!(TestFunction::Gauss.eval(&[1.0, 0.0]), (-1.0f64).exp());
        assert_eq!(TestFunction::Interval.eval(&[0.5]), 0.0);
        assert_eq!(TestFunction::Cube.eval(&[2.0, -1.0]), -8.0);
        let y = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.5, 0.3];
        // 0.5 + 1 + 0 + 0 + 0 + 5
        assert_relative_eq!(TestFunction::F8.eval(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.3]), 6.5 + 30.0 / 32.0, epsilon = 1e-12);
        assert_relative_eq!(TestFunction::F8.eval(&y), 6.5, epsilon = 1e-12);
        assert_eq!("f8".parse::<TestFunction>().unwrap(), TestFunction::F8);
        assert!("sin".parse::<TestFunction>().is_err());
    }

    #[test]
    fn sample_counts() {
        assert_eq!(sample_count(16, 1.0), 64);
        assert_eq!(sample_count(1, 1.0), 1);
        assert_eq!(sample_count(8, 2.0), 48);
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::new(TestFunction::F8, vec![DimSpec::known(Density::Normal)], 2, LevelRange::new(2, 4));
        assert!(cfg.validate().unwrap_err().is_config());
        cfg.function = TestFunction::Gauss;
        assert!(cfg.validate().is_ok());
        cfg.slope_window = Some(LevelRange::new(3, 6));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_round_trip_and_hash() {
        let cfg = TwoStageConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: TwoStageConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(config_hash(&back), config_hash(&cfg));
        assert_eq!(config_hash(&cfg).len(), 64);
    }
}
