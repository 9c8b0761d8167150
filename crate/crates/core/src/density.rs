//! One-dimensional densities and their CDF transforms onto `[-1/2, 1/2]`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("point {0} lies outside the density's domain")]
    Domain(f64),
    #[error("value {0} lies outside the transform's range")]
    Range(f64),
    #[error("invalid density parameter: {0}")]
    Parameter(String),
    #[error("tabulated density: {0}")]
    Table(String),
    #[error("root finding did not converge for target {0}")]
    NoConvergence(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Torus,
    RealLine,
    UnitInterval,
}

/// Piecewise-linear density read from `(y, ρ(y))` pairs; the CDF is the exact
/// piecewise-quadratic integral, normalized to total mass one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedDensity {
    pub domain: DomainKind,
    ys: Vec<f64>,
    rho: Vec<f64>,
    cum: Vec<f64>,
}

impl TabulatedDensity {
    pub fn new(domain: DomainKind, ys: Vec<f64>, rho: Vec<f64>) -> Result<Self, DensityError> {
        if ys.len() < 2 || ys.len() != rho.len() {
            return Err(DensityError::Table("need at least two (y, rho) rows".into()));
        }
        if ys.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DensityError::Table("y values must be strictly increasing".into()));
        }
        if rho.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(DensityError::Table("density values must be finite and nonnegative".into()));
        }
        if domain == DomainKind::UnitInterval && (ys[0] < 0.0 || ys[ys.len() - 1] > 1.0) {
            return Err(DensityError::Table("unit-interval table must lie inside [0, 1]".into()));
        }
        let mut cum = vec![0.0];
        for i in 1..ys.len() {
            let area = 0.5 * (rho[i - 1] + rho[i]) * (ys[i] - ys[i - 1]);
            cum.push(cum[i - 1] + area);
        }
        let total = cum[cum.len() - 1];
        if total <= 0.0 {
            return Err(DensityError::Table("density has zero mass".into()));
        }
        let rho = rho.into_iter().map(|r| r / total).collect();
        let cum = cum.into_iter().map(|c| c / total).collect();
        Ok(Self { domain, ys, rho, cum })
    }

    /// Reads a headered two-column CSV `y,rho`.
    pub fn from_csv(domain: DomainKind, path: &Path) -> Result<Self, DensityError> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| DensityError::Table(e.to_string()))?;
        let mut ys = Vec::new();
        let mut rho = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| DensityError::Table(e.to_string()))?;
            let parse = |i: usize| -> Result<f64, DensityError> {
                rec.get(i)
                    .ok_or_else(|| DensityError::Table("expected two columns".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| DensityError::Table(e.to_string()))
            };
            ys.push(parse(0)?);
            rho.push(parse(1)?);
        }
        Self::new(domain, ys, rho)
    }

    fn bounds(&self) -> (f64, f64) {
        (self.ys[0], self.ys[self.ys.len() - 1])
    }

    fn cell(&self, y: f64) -> usize {
        (self.ys.partition_point(|t| *t <= y).max(1) - 1).min(self.ys.len() - 2)
    }

    fn pdf(&self, y: f64) -> f64 {
        let (a, b) = self.bounds();
        if y < a || y > b {
            return 0.0;
        }
        let i = self.cell(y);
        let t = (y - self.ys[i]) / (self.ys[i + 1] - self.ys[i]);
        self.rho[i] + t * (self.rho[i + 1] - self.rho[i])
    }

    fn cdf(&self, y: f64) -> f64 {
        let (a, b) = self.bounds();
        if y <= a {
            return 0.0;
        }
        if y >= b {
            return 1.0;
        }
        let i = self.cell(y);
        let h = y - self.ys[i];
        let slope = (self.rho[i + 1] - self.rho[i]) / (self.ys[i + 1] - self.ys[i]);
        (self.cum[i] + self.rho[i] * h + 0.5 * slope * h * h).min(1.0)
    }
}

/// Built-in densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Density {
    /// Standard normal on the real line.
    Normal,
    /// Standard Cauchy on the real line.
    Cauchy,
    /// Laplace density `(1/8) e^{-|y-2|/4}`.
    Laplace,
    /// Symmetric Beta density on `[0, 1]`.
    Beta { alpha: f64 },
    /// Exponential density `(1/2) e^{-y/2}` on `y > 0`.
    Exponential,
    /// Equal-weight mixture of `N(-2, 1.2²)` and `N(3, 2.5²)`.
    GaussMixture,
    /// Uniform on `[0, 1]`.
    Uniform,
    /// Uniform on the torus `[-1/2, 1/2)`.
    TorusUniform,
    Tabulated(TabulatedDensity),
}

fn normal_cdf(y: f64) -> f64 {
    0.5 * erfc(-y * FRAC_1_SQRT_2)
}

fn normal_pdf(y: f64) -> f64 {
    (-0.5 * y * y).exp() / (2.0 * PI).sqrt()
}

const MIX: [(f64, f64); 2] = [(-2.0, 1.2), (3.0, 2.5)];

impl Density {
    pub fn beta(alpha: f64) -> Result<Self, DensityError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(DensityError::Parameter(format!("beta alpha must be positive, got {alpha}")));
        }
        Ok(Density::Beta { alpha })
    }

    pub fn domain(&self) -> DomainKind {
        match self {
            Density::Normal
            | Density::Cauchy
            | Density::Laplace
            | Density::Exponential
            | Density::GaussMixture => DomainKind::RealLine,
            Density::Beta { .. } | Density::Uniform => DomainKind::UnitInterval,
            Density::TorusUniform => DomainKind::Torus,
            Density::Tabulated(t) => t.domain,
        }
    }

    /// Closed interval of admissible inputs.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Density::Exponential => (0.0, f64::INFINITY),
            Density::Beta { .. } | Density::Uniform => (0.0, 1.0),
            Density::TorusUniform => (-0.5, 0.5),
            Density::Tabulated(t) => t.bounds(),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        let (lo, hi) = self.support();
        if y < lo || y > hi {
            return 0.0;
        }
        match self {
            Density::Normal => normal_pdf(y),
            Density::Cauchy => 1.0 / (PI * (1.0 + y * y)),
            Density::Laplace => 0.125 * (-(y - 2.0).abs() / 4.0).exp(),
            Density::Beta { alpha } => {
                let a = *alpha;
                if (a - 1.0).abs() < f64::EPSILON {
                    return 1.0;
                }
                let ln_norm = ln_gamma(2.0 * a) - 2.0 * ln_gamma(a);
                (ln_norm + (a - 1.0) * (y.ln() + (1.0 - y).ln())).exp()
            }
            Density::Exponential => 0.5 * (-0.5 * y).exp(),
            Density::GaussMixture => MIX
                .iter()
                .map(|(mu, s)| 0.5 * normal_pdf((y - mu) / s) / s)
                .sum(),
            Density::Uniform | Density::TorusUniform => 1.0,
            Density::Tabulated(t) => t.pdf(y),
        }
    }

    /// Probability mass left of `y`.
    pub fn cdf(&self, y: f64) -> f64 {
        let (lo, hi) = self.support();
        if y <= lo {
            return 0.0;
        }
        if y >= hi {
            return 1.0;
        }
        match self {
            Density::Normal => normal_cdf(y),
            Density::Cauchy => 0.5 + y.atan() / PI,
            Density::Laplace => {
                let z = y - 2.0;
                0.5 + 0.5 * z.signum() * (1.0 - (-z.abs() / 4.0).exp())
            }
            Density::Beta { alpha } => beta_cdf(*alpha, y),
            Density::Exponential => -(-0.5 * y).exp_m1(),
            Density::GaussMixture => MIX.iter().map(|(mu, s)| 0.5 * normal_cdf((y - mu) / s)).sum(),
            Density::Uniform => y,
            Density::TorusUniform => y + 0.5,
            Density::Tabulated(t) => t.cdf(y),
        }
    }

    /// Inverse of [`Density::cdf`] for `p` in `(0, 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64, DensityError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(DensityError::Range(p - 0.5));
        }
        let (lo, hi) = self.support();
        if p == 0.0 && lo.is_finite() {
            return Ok(lo);
        }
        if p == 1.0 && hi.is_finite() {
            return Ok(hi);
        }
        let guess = match self {
            Density::Normal => Some(-SQRT_2 * erfc_inv(2.0 * p)),
            Density::Cauchy => Some((PI * (p - 0.5)).tan()),
            Density::Laplace => {
                let q = p - 0.5;
                Some(2.0 - 4.0 * q.signum() * (-2.0 * q.abs()).ln_1p())
            }
            Density::Exponential => Some(-2.0 * (-p).ln_1p()),
            Density::Uniform => Some(p),
            Density::TorusUniform => Some(p - 0.5),
            Density::Beta { alpha } if (*alpha - 0.5).abs() < f64::EPSILON => {
                Some((0.5 * PI * p).sin().powi(2))
            }
            Density::Beta { alpha } if (*alpha - 1.0).abs() < f64::EPSILON => Some(p),
            _ => None,
        };
        if let Some(y) = guess {
            if y.is_finite() {
                return Ok(y.clamp(lo, hi));
            }
            return Err(DensityError::Range(p - 0.5));
        }
        let (a, b) = bracket(|y| self.cdf(y), p, lo, hi)?;
        solve_increasing(|y| self.cdf(y), |y| self.pdf(y), p, a, b, 1e-15, 200)
    }
}

fn beta_cdf(alpha: f64, y: f64) -> f64 {
    if (alpha - 0.5).abs() < f64::EPSILON {
        2.0 / PI * y.sqrt().asin()
    } else if (alpha - 1.0).abs() < f64::EPSILON {
        y
    } else if (alpha - 2.0).abs() < f64::EPSILON {
        y * y * (3.0 - 2.0 * y)
    } else if (alpha - 3.0).abs() < f64::EPSILON {
        y * y * y * (10.0 - 15.0 * y + 6.0 * y * y)
    } else {
        beta_reg(alpha, alpha, y)
    }
}

/// Finds `[a, b]` with `f(a) <= target <= f(b)` inside `[lo, hi]`.
pub(crate) fn bracket(
    f: impl Fn(f64) -> f64,
    target: f64,
    lo: f64,
    hi: f64,
) -> Result<(f64, f64), DensityError> {
    let mut a = if lo.is_finite() { lo } else { -1.0f64.min(hi - 1.0) };
    let mut b = if hi.is_finite() { hi } else { 1.0f64.max(lo + 1.0) };
    let mut step = (b - a).max(1.0);
    for _ in 0..200 {
        let fa = f(a);
        let fb = f(b);
        if fa <= target && target <= fb {
            return Ok((a, b));
        }
        if fa > target {
            if lo.is_finite() && a <= lo {
                return Ok((lo, lo));
            }
            a = (a - step).max(lo);
        }
        if fb < target {
            if hi.is_finite() && b >= hi {
                return Ok((hi, hi));
            }
            b = (b + step).min(hi);
        }
        step *= 2.0;
    }
    Err(DensityError::NoConvergence(target))
}

/// Safeguarded Newton iteration for an increasing `f` on a bracket: Newton
/// steps are accepted while they stay inside the shrinking bracket, otherwise
/// the interval is bisected.
pub(crate) fn solve_increasing(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    target: f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64, DensityError> {
    if a == b {
        return Ok(a);
    }
    let mut y = 0.5 * (a + b);
    for _ in 0..max_iter {
        let r = f(y) - target;
        if r.abs() <= tol {
            return Ok(y);
        }
        if r < 0.0 {
            a = y;
        } else {
            b = y;
        }
        if b - a <= 4.0 * f64::EPSILON * y.abs().max(f64::MIN_POSITIVE) {
            return Ok(y);
        }
        let d = df(y);
        let newton = y - r / d;
        y = if d > 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    let r = f(y) - target;
    if r.abs() <= tol.max(1e-12) {
        Ok(y)
    } else {
        Err(DensityError::NoConvergence(target))
    }
}

/// `(m-1) / 2^{⌈n/d⌉+1}`.
pub fn default_eta(m: u32, n: u32, d: usize) -> f64 {
    let d = d.max(1) as u32;
    let e = n.div_ceil(d) + 1;
    (m.saturating_sub(1)) as f64 / 2f64.powi(e as i32)
}

/// Density together with its transform onto the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transform1D {
    pub density: Density,
    /// Extension parameter; only meaningful on the unit interval.
    #[serde(default)]
    pub eta: f64,
}

/// Half-open distance within which real-line inputs at `±1/2` are pulled inside.
const EDGE_CLAMP: f64 = 1e-15;

impl Transform1D {
    pub fn new(density: Density) -> Self {
        Self { density, eta: 0.0 }
    }

    pub fn with_eta(density: Density, eta: f64) -> Result<Self, DensityError> {
        if !(0.0..1.0).contains(&eta) {
            return Err(DensityError::Parameter(format!("eta must lie in [0, 1), got {eta}")));
        }
        Ok(Self { density, eta })
    }

    pub fn domain(&self) -> DomainKind {
        self.density.domain()
    }

    fn effective_eta(&self, eta: f64) -> f64 {
        if self.domain() == DomainKind::UnitInterval {
            eta
        } else {
            0.0
        }
    }

    /// `d/dy` of the transform at the stored `eta`.
    pub fn pdf(&self, y: f64) -> f64 {
        (1.0 - self.effective_eta(self.eta)) * self.density.pdf(y)
    }

    pub fn transform(&self, y: f64) -> Result<f64, DensityError> {
        self.transform_eta(y, self.eta)
    }

    /// Transform with an explicit extension parameter (ignored off the unit interval).
    pub fn transform_eta(&self, y: f64, eta: f64) -> Result<f64, DensityError> {
        let (lo, hi) = self.density.support();
        if !(y >= lo && y <= hi) || (self.domain() == DomainKind::Torus && y >= hi) {
            return Err(DensityError::Domain(y));
        }
        let eta = self.effective_eta(eta);
        let x = eta + (1.0 - eta) * self.density.cdf(y) - 0.5;
        Ok(x.clamp(-0.5 + eta, 0.5))
    }

    pub fn inverse(&self, x: f64) -> Result<f64, DensityError> {
        self.inverse_eta(x, self.eta)
    }

    pub fn inverse_eta(&self, x: f64, eta: f64) -> Result<f64, DensityError> {
        let eta = self.effective_eta(eta);
        let lower = -0.5 + eta;
        let mut x = x;
        match self.domain() {
            DomainKind::RealLine => {
                if x <= -0.5 && x > -0.5 - EDGE_CLAMP {
                    x = (-0.5f64).next_up();
                } else if x >= 0.5 && x < 0.5 + EDGE_CLAMP {
                    x = 0.5f64.next_down();
                }
                if !(x > -0.5 && x < 0.5) {
                    return Err(DensityError::Range(x));
                }
            }
            DomainKind::UnitInterval => {
                if !(x >= lower - EDGE_CLAMP && x <= 0.5 + EDGE_CLAMP) {
                    return Err(DensityError::Range(x));
                }
                x = x.clamp(lower, 0.5);
            }
            DomainKind::Torus => {
                if !(-0.5..0.5).contains(&x) {
                    return Err(DensityError::Range(x));
                }
            }
        }
        let mut p = ((x - lower) / (1.0 - eta)).clamp(0.0, 1.0);
        if self.domain() == DomainKind::RealLine {
            p = p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
        }
        self.density.quantile(p)
    }

    /// `count` i.i.d. draws via inverse-CDF sampling.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<f64>, DensityError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_with(&self.density, count, &mut rng)
    }
}

/// Uniform variate strictly inside `(0, 1)`.
pub(crate) fn open_unit(rng: &mut impl Rng) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

fn sample_with(density: &Density, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, DensityError> {
    (0..count)
        .map(|_| density.quantile(open_unit(rng)))
        .collect()
}

/// Componentwise product of one-dimensional transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductTransform {
    pub components: Vec<Transform1D>,
}

impl ProductTransform {
    pub fn new(components: Vec<Transform1D>) -> Self {
        Self { components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn pdf(&self, y: &[f64]) -> f64 {
        self.components.iter().zip(y).map(|(t, &v)| t.density.pdf(v)).product()
    }

    pub fn transform(&self, y: &[f64]) -> Result<Vec<f64>, DensityError> {
        self.components.iter().zip(y).map(|(t, &v)| t.transform(v)).collect()
    }

    pub fn inverse(&self, x: &[f64]) -> Result<Vec<f64>, DensityError> {
        self.components.iter().zip(x).map(|(t, &v)| t.inverse(v)).collect()
    }

    /// Row-major `count × d` sample. Each coordinate uses its own ChaCha
    /// stream so adding dimensions leaves earlier columns unchanged.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>, DensityError> {
        self.sample_family(count, seed, 0)
    }

    /// Like [`sample`](Self::sample) but from stream family `family`; distinct
    /// families never share a ChaCha stream for the same seed.
    pub fn sample_family(&self, count: usize, seed: u64, family: u32) -> Result<Vec<Vec<f64>>, DensityError> {
        let columns = self
            .components
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((family as u64) << 32) | i as u64);
                sample_with(&t.density, count, &mut rng)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((0..count)
            .map(|r| columns.iter().map(|c| c[r]).collect())
            .collect())
    }
}
