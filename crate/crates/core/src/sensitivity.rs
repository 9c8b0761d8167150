//! ANOVA term variances, global sensitivity indices and active-set selection
//! computed from fitted wavelet coefficients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regression::RegressionModel;
use crate::spline::{wavelet_autocorrelation, SplineError};
use crate::wavelet::{BasisError, Subset};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensitivityError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error("the constant term has no variance")]
    ConstantTerm,
    #[error("total variance is zero")]
    DegenerateFunction,
}

/// Same-level Gram matrices of the periodized wavelets, stored as the first
/// row of each circulant matrix.
#[derive(Debug, Clone)]
pub struct LevelGrams {
    autocorr: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl LevelGrams {
    pub fn new(m: u32) -> Result<Self, SensitivityError> {
        let autocorr = wavelet_autocorrelation(m as i64)?.iter().map(|v| v.to_f64()).collect();
        Ok(Self {
            autocorr,
            rows: Vec::new(),
        })
    }

    /// `⟨ψ^per_{j,0}, ψ^per_{j,r}⟩` for every `r` with a nonzero value.
    pub fn circulant_row(&self, j: u32) -> Vec<(usize, f64)> {
        let len = 1i64 << j;
        let reach = self.autocorr.len() as i64 - 1;
        let mut c = vec![0.0; len as usize];
        for s in -reach..=reach {
            c[s.rem_euclid(len) as usize] += self.autocorr[s.unsigned_abs() as usize];
        }
        c.into_iter().enumerate().filter(|(_, v)| *v != 0.0).collect()
    }

    fn ensure(&mut self, j: u32) {
        while self.rows.len() <= j as usize {
            let next = self.rows.len() as u32;
            self.rows.push(self.circulant_row(next));
        }
    }

    /// `aᵀ (G_{j_1} ⊗ … ⊗ G_{j_k}) a` for a coefficient tensor in row-major order.
    pub fn quadratic_form(&mut self, levels: &[u32], a: &[f64]) -> f64 {
        for &l in levels {
            self.ensure(l);
        }
        let mut v = a.to_vec();
        let mut tmp = vec![0.0; v.len()];
        // mode q has extent 2^{levels[q]} and stride 2^{levels[q+1..]}
        let mut stride = a.len();
        for &l in levels {
            let extent = 1usize << l;
            stride /= extent;
            let row = &self.rows[l as usize];
            for (i, t) in tmp.iter_mut().enumerate() {
                let k = (i / stride) % extent;
                let base = i - k * stride;
                *t = row
                    .iter()
                    .map(|&(r, c)| c * v[base + ((k + r) % extent) * stride])
                    .sum();
            }
            std::mem::swap(&mut v, &mut tmp);
        }
        a.iter().zip(&v).map(|(x, y)| x * y).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSensitivity {
    pub u: Subset,
    pub variance: f64,
    pub gsi: f64,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub constant: f64,
    pub total_variance: f64,
    pub threshold: f64,
    pub terms: Vec<TermSensitivity>,
    pub active_set: Vec<Subset>,
}

/// Variance of one ANOVA term of the fitted expansion on the torus.
pub fn term_variance(model: &RegressionModel, u: &Subset) -> Result<f64, SensitivityError> {
    if u.is_empty() {
        return Err(SensitivityError::ConstantTerm);
    }
    let term = model.index_set().term(u).map_err(SensitivityError::from)?;
    let mut grams = LevelGrams::new(model.order())?;
    let a = model.coefficients();
    Ok(term
        .blocks
        .iter()
        .map(|b| grams.quadratic_form(&b.levels, &a[b.offset..b.offset + b.len]))
        .sum())
}

/// Term variances and global sensitivity indices; terms with index above
/// `threshold` form the active set together with the empty set.
pub fn gsi(model: &RegressionModel, threshold: f64) -> Result<SensitivityReport, SensitivityError> {
    let grams = LevelGrams::new(model.order())?;
    let a = model.coefficients();
    let terms: Vec<_> = model
        .index_set()
        .terms()
        .iter()
        .filter(|t| !t.subset.is_empty())
        .collect();
    let variances: Vec<f64> = terms
        .par_iter()
        .map(|t| {
            let mut g = grams.clone();
            t.blocks
                .iter()
                .map(|b| g.quadratic_form(&b.levels, &a[b.offset..b.offset + b.len]))
                .sum()
        })
        .collect();
    let total: f64 = variances.iter().sum();
    if !(total > 0.0) {
        return Err(SensitivityError::DegenerateFunction);
    }
    let terms: Vec<TermSensitivity> = terms
        .iter()
        .zip(&variances)
        .map(|(t, &v)| {
            let s = v / total;
            TermSensitivity {
                u: t.subset.clone(),
                variance: v,
                gsi: s,
                active: s > threshold,
            }
        })
        .collect();
    let mut active_set = vec![Subset::empty()];
    active_set.extend(terms.iter().filter(|t| t.active).map(|t| t.u.clone()));
    Ok(SensitivityReport {
        constant: model.constant(),
        total_variance: total,
        threshold,
        terms,
        active_set,
    })
}

impl SensitivityReport {
    pub fn get(&self, u: &Subset) -> Option<&TermSensitivity> {
        self.terms.iter().find(|t| &t.u == u)
    }

    /// `{u : S(u) > eps} ∪ {∅}` for another threshold.
    pub fn active_set(&self, eps: f64) -> Vec<Subset> {
        let mut out = vec![Subset::empty()];
        out.extend(self.terms.iter().filter(|t| t.gsi > eps).map(|t| t.u.clone()));
        out
    }

    /// Smallest order `ν` whose terms carry at least `coverage` of the variance.
    pub fn effective_dimension(&self, coverage: f64) -> usize {
        let max_order = self.terms.iter().map(|t| t.u.len()).max().unwrap_or(0);
        for nu in 1..=max_order {
            let covered: f64 = self
                .terms
                .iter()
                .filter(|t| t.u.len() <= nu)
                .map(|t| t.variance)
                .sum();
            if covered >= coverage * self.total_variance * (1.0 - 1e-12) {
                return nu;
            }
        }
        max_order
    }

    /// Flat CSV with header `u,variance,gsi,active`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("u,variance,gsi,active\n");
        for t in &self.terms {
            s.push_str(&format!("\"{}\",{:e},{:e},{}\n", t.u, t.variance, t.gsi, t.active));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(vars: &[(&str, f64)]) -> SensitivityReport {
        let total: f64 = vars.iter().map(|v| v.1).sum();
        SensitivityReport {
            constant: 0.0,
            total_variance: total,
            threshold: 0.03,
            terms: vars
                .iter()
                .map(|(u, v)| TermSensitivity {
                    u: u.parse().unwrap(),
                    variance: *v,
                    gsi: v / total,
                    active: v / total > 0.03,
                })
                .collect(),
            active_set: Vec::new(),
        }
    }

    #[test]
    fn effective_dimension_cases() {
        let additive = report(&[("{1}", 1.0), ("{2}", 2.0), ("{1,2}", 0.0)]);
        assert_eq!(additive.effective_dimension(0.99), 1);
        let mixed = report(&[("{1}", 0.4), ("{2}", 0.3), ("{1,2}", 0.3)]);
        assert_eq!(mixed.effective_dimension(0.9), 2);
        let full = report(&[("{1}", 0.5), ("{2}", 0.4), ("{3}", 0.05), ("{1,2,3}", 0.05)]);
        assert_eq!(full.effective_dimension(1.0), 3);
    }

    #[test]
    fn thresholds() {
        let r = report(&[("{1}", 0.5), ("{2}", 0.02), ("{1,2}", 0.48)]);
        assert_eq!(r.active_set(0.0).len(), 4);
        assert_eq!(r.active_set(1.0), vec![Subset::empty()]);
        assert_eq!(r.active_set(0.03).len(), 3);
    }

    #[test]
    fn haar_level_grams() {
        // on level 0 every translate wraps onto k = 0: ⟨ψ^per_{0,0}, ψ^per_{0,0}⟩ = Σ_s a(s)
        let g = LevelGrams::new(1).unwrap();
        assert_eq!(g.circulant_row(0), vec![(0, 1.0)]);
        assert_eq!(g.circulant_row(3), vec![(0, 1.0)]);
    }
}
