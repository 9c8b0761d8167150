//! Kernel density estimates used as data-driven transforms, with
//! rule-of-thumb and direct plug-in bandwidth selection.

use std::f64::consts::PI;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{solve_increasing, DensityError, DomainKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KdeError {
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("all samples are identical")]
    Degenerate,
    #[error("non-finite sample value")]
    NonFinite,
    #[error("sample {0} lies outside [0, 1]")]
    OutsideUnitInterval(f64),
    #[error("kernel density transforms are not defined on the torus")]
    TorusDomain,
    #[error("derivative order {0} is not available for this kernel")]
    DerivativeOrder(u32),
    #[error(transparent)]
    Density(#[from] DensityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// Standard normal density.
    Gaussian,
    /// Cardinal B-spline of order three, supported on `[-3/2, 3/2]`.
    BSpline3,
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Probabilists' Hermite polynomial `He_r(z)`.
fn hermite(r: u32, z: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, z);
    if r == 0 {
        return prev;
    }
    for n in 1..r {
        let next = z * cur - n as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

impl Kernel {
    pub fn pdf(self, z: f64) -> f64 {
        match self {
            Kernel::Gaussian => INV_SQRT_2PI * (-0.5 * z * z).exp(),
            Kernel::BSpline3 => {
                let a = z.abs();
                if a < 0.5 {
                    0.75 - z * z
                } else if a < 1.5 {
                    0.5 * (1.5 - a) * (1.5 - a)
                } else {
                    0.0
                }
            }
        }
    }

    /// Antiderivative `K(z) = ∫_{-∞}^z k`.
    pub fn cdf(self, z: f64) -> f64 {
        match self {
            Kernel::Gaussian => 0.5 * statrs::function::erf::erfc(-z * std::f64::consts::FRAC_1_SQRT_2),
            Kernel::BSpline3 => {
                if z <= -1.5 {
                    0.0
                } else if z < -0.5 {
                    (z + 1.5).powi(3) / 6.0
                } else if z < 0.5 {
                    1.0 / 6.0 + 0.75 * (z + 0.5) - (z * z * z + 0.125) / 3.0
                } else if z < 1.5 {
                    1.0 - (1.5 - z).powi(3) / 6.0
                } else {
                    1.0
                }
            }
        }
    }

    /// `k^{(r)}(z)`; the B-spline kernel only has derivatives up to order two.
    pub fn derivative(self, r: u32, z: f64) -> Result<f64, KdeError> {
        match self {
            Kernel::Gaussian => {
                let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                Ok(sign * hermite(r, z) * self.pdf(z))
            }
            Kernel::BSpline3 => match r {
                0 => Ok(self.pdf(z)),
                1 => {
                    let a = z.abs();
                    Ok(if a < 0.5 {
                        -2.0 * z
                    } else if a < 1.5 {
                        -z.signum() * (1.5 - a)
                    } else {
                        0.0
                    })
                }
                2 => {
                    let a = z.abs();
                    Ok(if a < 0.5 {
                        -2.0
                    } else if a < 1.5 {
                        1.0
                    } else {
                        0.0
                    })
                }
                _ => Err(KdeError::DerivativeOrder(r)),
            },
        }
    }

    /// `∫ k²`.
    pub fn l2_norm_sq(self) -> f64 {
        match self {
            Kernel::Gaussian => 1.0 / (2.0 * PI.sqrt()),
            Kernel::BSpline3 => 11.0 / 20.0,
        }
    }

    /// `∫ z² k(z) dz`.
    pub fn second_moment(self) -> f64 {
        match self {
            Kernel::Gaussian => 1.0,
            Kernel::BSpline3 => 0.25,
        }
    }

    /// Half-width beyond which the kernel (and all of its derivatives) is
    /// zero in double precision.
    pub fn reach(self) -> f64 {
        match self {
            Kernel::Gaussian => 40.0,
            Kernel::BSpline3 => 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method", content = "value")]
pub enum BandwidthMethod {
    Rot,
    Dpi,
    Fixed(f64),
}

/// Selected bandwidth with the method that produced it and any warning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthChoice {
    pub sigma: f64,
    pub method: BandwidthMethod,
    pub warning: Option<String>,
}

fn check_samples(ys: &[f64], needed: usize) -> Result<(), KdeError> {
    if ys.len() < needed {
        return Err(KdeError::TooFewSamples {
            needed,
            found: ys.len(),
        });
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(KdeError::NonFinite);
    }
    Ok(())
}

/// Unbiased sample standard deviation.
pub fn sample_std(ys: &[f64]) -> f64 {
    let m = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / m;
    let ss: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    (ss / (m - 1.0)).sqrt()
}

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn iqr(ys: &[f64]) -> f64 {
    let mut s = ys.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)
}

/// `min{std, IQR/1.34}`, falling back to the standard deviation when the
/// interquartile range vanishes.
pub fn robust_scale(ys: &[f64]) -> Result<f64, KdeError> {
    let sd = sample_std(ys);
    if !(sd > 0.0) {
        return Err(KdeError::Degenerate);
    }
    let r = iqr(ys) / 1.34;
    Ok(if r > 0.0 { sd.min(r) } else { sd })
}

pub fn bandwidth_rot(ys: &[f64]) -> Result<f64, KdeError> {
    check_samples(ys, 2)?;
    let s = robust_scale(ys)?;
    Ok(1.06 * s * (ys.len() as f64).powf(-0.2))
}

/// Chunk length of the parallel double sum; fixed so the reduction order
/// does not depend on the thread count.
const PAIR_CHUNK: usize = 64;

/// `(1/(M² g^{r+1})) Σ_i Σ_j k^{(r)}((y_i - y_j)/g)` for the Gaussian kernel,
/// diagonal included.
pub fn psi_r_hat(ys: &[f64], g: f64, r: u32) -> Result<f64, KdeError> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(KdeError::InvalidBandwidth(g));
    }
    check_samples(ys, 1)?;
    let kernel = Kernel::Gaussian;
    let mut s = ys.to_vec();
    s.sort_by(f64::total_cmp);
    let reach = kernel.reach() * g;
    let m = s.len();
    let partials: Vec<f64> = (0..m)
        .collect::<Vec<_>>()
        .par_chunks(PAIR_CHUNK)
        .map(|chunk| {
            let mut acc = 0.0;
            for &i in chunk {
                for j in (i + 1)..m {
                    let d = s[j] - s[i];
                    if d > reach {
                        break;
                    }
                    acc += kernel.derivative(r, d / g).unwrap_or(0.0);
                }
            }
            acc
        })
        .collect();
    let off: f64 = partials.iter().sum();
    let diag = m as f64 * kernel.derivative(r, 0.0)?;
    let mf = m as f64;
    Ok((diag + 2.0 * off) / (mf * mf * g.powi(r as i32 + 1)))
}

/// Two-stage direct plug-in bandwidth for the Gaussian kernel. Falls back to
/// the rule of thumb when a plug-in estimate has the wrong sign.
pub fn bandwidth_dpi(ys: &[f64]) -> Result<BandwidthChoice, KdeError> {
    check_samples(ys, 4)?;
    let kernel = Kernel::Gaussian;
    let m = ys.len() as f64;
    let s = robust_scale(ys)?;
    let mu2 = kernel.second_moment();
    let psi8 = 105.0 / (32.0 * PI.sqrt() * s.powi(9));
    let k6 = kernel.derivative(6, 0.0)?;
    let g1 = (-2.0 * k6 / (mu2 * psi8 * m)).powf(1.0 / 9.0);
    let psi6 = psi_r_hat(ys, g1, 6)?;
    let fallback = |reason: String| -> Result<BandwidthChoice, KdeError> {
        warn!("{reason}; using the rule-of-thumb bandwidth");
        Ok(BandwidthChoice {
            sigma: bandwidth_rot(ys)?,
            method: BandwidthMethod::Rot,
            warning: Some(reason),
        })
    };
    if !(psi6 < 0.0) {
        return fallback(format!("plug-in estimate psi6 = {psi6} is not negative"));
    }
    let k4 = kernel.derivative(4, 0.0)?;
    let g2 = (-2.0 * k4 / (mu2 * psi6 * m)).powf(1.0 / 7.0);
    let psi4 = psi_r_hat(ys, g2, 4)?;
    if !(psi4 > 0.0) {
        return fallback(format!("plug-in estimate psi4 = {psi4} is not positive"));
    }
    let sigma = (kernel.l2_norm_sq() / (mu2 * mu2 * psi4 * m)).powf(0.2);
    Ok(BandwidthChoice {
        sigma,
        method: BandwidthMethod::Dpi,
        warning: None,
    })
}

/// Data-driven transform `Ρ̂(y) = (1/M) Σ K((y - s)/σ) - 1/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedTransform {
    samples: Vec<f64>,
    sigma: f64,
    kernel: Kernel,
    domain: DomainKind,
    /// `[ω_1, ω_2]` on the unit interval; unbounded on the real line.
    omega: Option<(f64, f64)>,
}

impl EstimatedTransform {
    pub fn new(samples: &[f64], sigma: f64, kernel: Kernel, domain: DomainKind) -> Result<Self, KdeError> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(KdeError::InvalidBandwidth(sigma));
        }
        check_samples(samples, 1)?;
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let (lo, hi) = (s[0], s[s.len() - 1]);
        let omega = match domain {
            DomainKind::Torus => return Err(KdeError::TorusDomain),
            DomainKind::RealLine => None,
            DomainKind::UnitInterval => {
                if lo < 0.0 {
                    return Err(KdeError::OutsideUnitInterval(lo));
                }
                if hi > 1.0 {
                    return Err(KdeError::OutsideUnitInterval(hi));
                }
                let half = kernel.reach() * sigma;
                Some(((lo - half).min(0.0), (hi + half).max(1.0)))
            }
        };
        Ok(Self {
            samples: s,
            sigma,
            kernel,
            domain,
            omega,
        })
    }

    /// Estimate with the bandwidth rule requested; the kernel is Gaussian on
    /// the real line and the order-three B-spline on `[0, 1]`.
    pub fn fit(samples: &[f64], domain: DomainKind, method: BandwidthMethod) -> Result<(Self, BandwidthChoice), KdeError> {
        let kernel = match domain {
            DomainKind::UnitInterval => Kernel::BSpline3,
            _ => Kernel::Gaussian,
        };
        let choice = match method {
            BandwidthMethod::Rot => BandwidthChoice {
                sigma: bandwidth_rot(samples)?,
                method,
                warning: None,
            },
            BandwidthMethod::Fixed(s) => BandwidthChoice {
                sigma: s,
                method,
                warning: None,
            },
            BandwidthMethod::Dpi if kernel == Kernel::Gaussian => bandwidth_dpi(samples)?,
            BandwidthMethod::Dpi => {
                let reason = "direct plug-in is not available on [0, 1]".to_string();
                warn!("{reason}; using the rule-of-thumb bandwidth");
                BandwidthChoice {
                    sigma: bandwidth_rot(samples)?,
                    method: BandwidthMethod::Rot,
                    warning: Some(reason),
                }
            }
        };
        let est = Self::new(samples, choice.sigma, kernel, domain)?;
        Ok((est, choice))
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Interval `[ω_1, ω_2]` carrying the estimated density on `[0, 1]`;
    /// unbounded on the real line.
    pub fn effective_support(&self) -> (f64, f64) {
        self.omega.unwrap_or((f64::NEG_INFINITY, f64::INFINITY))
    }

    /// Range of samples that can contribute at `y`, plus the count left of it.
    fn window(&self, y: f64) -> (usize, usize) {
        let reach = self.kernel.reach() * self.sigma;
        let a = self.samples.partition_point(|s| *s < y - reach);
        let b = self.samples.partition_point(|s| *s <= y + reach);
        (a, b)
    }

    pub fn pdf(&self, y: f64) -> f64 {
        let (a, b) = self.window(y);
        let sum: f64 = self.samples[a..b]
            .iter()
            .map(|s| self.kernel.pdf((y - s) / self.sigma))
            .sum();
        sum / (self.sigma * self.samples.len() as f64)
    }

    fn mass_below(&self, y: f64) -> f64 {
        let (a, b) = self.window(y);
        let inner: f64 = self.samples[a..b]
            .iter()
            .map(|s| self.kernel.cdf((y - s) / self.sigma))
            .sum();
        (a as f64 + inner) / self.samples.len() as f64
    }

    pub fn transform(&self, y: f64) -> Result<f64, KdeError> {
        let (lo, hi) = self.effective_support();
        if !y.is_finite() || y < lo || y > hi {
            return Err(DensityError::Domain(y).into());
        }
        Ok(self.mass_below(y) - 0.5)
    }

    pub fn inverse(&self, x: f64) -> Result<f64, KdeError> {
        let open = self.kernel == Kernel::Gaussian;
        let valid = if open { x > -0.5 && x < 0.5 } else { (-0.5..=0.5).contains(&x) };
        if !valid {
            return Err(DensityError::Range(x).into());
        }
        let reach = self.kernel.reach() * self.sigma;
        let (lo, hi) = match self.domain {
            DomainKind::UnitInterval => self.effective_support(),
            _ => (self.samples[0] - reach, self.samples[self.samples.len() - 1] + reach),
        };
        let target = x + 0.5;
        Ok(solve_increasing(|y| self.mass_below(y), |y| self.pdf(y), target, lo, hi, 1e-14, 400)?)
    }
}
