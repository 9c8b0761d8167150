//! Design-matrix assembly, least-squares fitting, prediction and Gram
//! diagnostics for the transformed wavelet expansion.

use std::iter::Sum;

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::density::{default_eta, DensityError, DomainKind, Transform1D};
use crate::kde::{BandwidthChoice, BandwidthMethod, EstimatedTransform, KdeError};
use crate::lsqr::{lsqr, LsqrError, LsqrOptions, StopReason};
use crate::operator::{LinearOperator, SparseDesignMatrix, ROW_BLOCK};
use crate::quadrature::gauss_legendre;
use crate::wavelet::{Active, BasisError, IndexSet, IndexSetSpec, Subset, WaveletKernel};

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Kde(#[from] KdeError),
    #[error(transparent)]
    Lsqr(#[from] LsqrError),
    #[error("torus coordinate {0} lies outside [-1/2, 1/2)")]
    OutsideTorus(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite function value at sample {0}")]
    NonFinite(usize),
    #[error("model file: {0}")]
    Format(String),
}

/// Coordinate map of one input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DimTransform {
    Known(Transform1D),
    Estimated(EstimatedTransform),
}

impl DimTransform {
    pub fn domain(&self) -> DomainKind {
        match self {
            DimTransform::Known(t) => t.domain(),
            DimTransform::Estimated(e) => e.domain(),
        }
    }

    /// Whether the extension parameter changes this map.
    pub fn uses_eta(&self) -> bool {
        matches!(self, DimTransform::Known(t) if t.domain() == DomainKind::UnitInterval)
    }

    pub fn forward(&self, y: f64, eta: f64) -> Result<f64, RegressionError> {
        Ok(match self {
            DimTransform::Known(t) => t.transform_eta(y, eta)?,
            DimTransform::Estimated(e) => e.transform(y)?,
        })
    }

    pub fn inverse(&self, x: f64, eta: f64) -> Result<f64, RegressionError> {
        Ok(match self {
            DimTransform::Known(t) => t.inverse_eta(x, eta)?,
            DimTransform::Estimated(e) => e.inverse(x)?,
        })
    }
}

/// How each input dimension is mapped to the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformPlan {
    Known(Transform1D),
    Kde { bandwidth: BandwidthMethod, domain: DomainKind },
}

/// Extension parameter policy for unit-interval dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "policy", content = "value")]
pub enum EtaPolicy {
    /// `(m-1)/2^{⌈n_u/|u|⌉+1}` per term, with `n_u` the term's maximal level.
    #[default]
    PerTerm,
    Fixed(f64),
}

/// Torus coordinates of a sample set, one layer per distinct extension
/// parameter, with the layer each term reads from.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusCoords {
    rows: usize,
    d: usize,
    layers: Vec<Vec<f64>>,
    term_layer: Vec<usize>,
}

fn wrap_torus(x: f64) -> Result<f64, RegressionError> {
    if (-0.5..0.5).contains(&x) {
        Ok(x)
    } else if x == 0.5 {
        Ok(-0.5)
    } else {
        Err(RegressionError::OutsideTorus(x))
    }
}

impl TorusCoords {
    /// Points already on the torus, shared by every term.
    pub fn single(points: &[Vec<f64>], idx: &IndexSet) -> Result<Self, RegressionError> {
        let d = idx.dim();
        let mut layer = Vec::with_capacity(points.len() * d);
        for p in points {
            if p.len() != d {
                return Err(RegressionError::Shape(format!("point has {} coordinates, expected {d}", p.len())));
            }
            for &x in p {
                layer.push(wrap_torus(x)?);
            }
        }
        Ok(Self {
            rows: points.len(),
            d,
            layers: vec![layer],
            term_layer: vec![0; idx.terms().len()],
        })
    }

    /// Maps raw samples through the transforms with the per-term extension
    /// parameters.
    pub fn from_samples(
        ys: &[Vec<f64>],
        transforms: &[DimTransform],
        term_eta: &[f64],
        idx: &IndexSet,
    ) -> Result<Self, RegressionError> {
        let d = idx.dim();
        if transforms.len() != d {
            return Err(RegressionError::Shape(format!("{} transforms for dimension {d}", transforms.len())));
        }
        let mut etas: Vec<f64> = Vec::new();
        let term_layer: Vec<usize> = term_eta
            .iter()
            .map(|&e| match etas.iter().position(|&x| x == e) {
                Some(p) => p,
                None => {
                    etas.push(e);
                    etas.len() - 1
                }
            })
            .collect();
        let layers = etas
            .iter()
            .enumerate()
            .map(|(li, &eta)| {
                let rows: Result<Vec<Vec<f64>>, RegressionError> = ys
                    .par_iter()
                    .map(|y| {
                        if y.len() != d {
                            return Err(RegressionError::Shape(format!(
                                "sample has {} coordinates, expected {d}",
                                y.len()
                            )));
                        }
                        y.iter()
                            .zip(transforms)
                            .map(|(&v, t)| {
                                // layers other than the first only differ on eta-dependent maps
                                if li > 0 && !t.uses_eta() {
                                    return Ok(f64::NAN);
                                }
                                wrap_torus(t.forward(v, eta)?)
                            })
                            .collect()
                    })
                    .collect();
                rows.map(|r| r.concat())
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut out = Self {
            rows: ys.len(),
            d,
            layers,
            term_layer,
        };
        // fill eta-independent coordinates of secondary layers from the first
        for li in 1..out.layers.len() {
            for (i, t) in transforms.iter().enumerate() {
                if !t.uses_eta() {
                    for r in 0..out.rows {
                        let v = out.layers[0][r * d + i];
                        out.layers[li][r * d + i] = v;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Coordinates of row `r` as seen by term `t`.
    pub fn point(&self, r: usize, term: usize) -> &[f64] {
        let l = &self.layers[self.term_layer[term]];
        &l[r * self.d..(r + 1) * self.d]
    }
}

/// Nonzero entries of one design-matrix row, sorted by column.
pub fn design_row(
    coords: &TorusCoords,
    r: usize,
    idx: &IndexSet,
    kernel: &WaveletKernel,
) -> Vec<(u32, f64)> {
    let finest = idx.finest_level() as usize;
    let nlayers = coords.layers.len();
    // active[layer][coord][level]
    let mut active: Vec<Vec<Vec<Option<Active>>>> = vec![vec![vec![None; finest + 1]; coords.d]; nlayers];
    let mut row: Vec<(u32, f64)> = Vec::new();
    for (ti, term) in idx.terms().iter().enumerate() {
        if term.subset.is_empty() {
            row.push((term.offset as u32, 1.0));
            continue;
        }
        let layer = coords.term_layer[ti];
        let x = coords.point(r, ti);
        for block in &term.blocks {
            for (&c, &l) in term.subset.coords().iter().zip(&block.levels) {
                let slot = &mut active[layer][c][l as usize];
                if slot.is_none() {
                    let mut a = Active::new();
                    kernel.active(l as i32, x[c], &mut a);
                    *slot = Some(a);
                }
            }
            let lists: SmallVec<[&Active; 8]> = term
                .subset
                .coords()
                .iter()
                .zip(&block.levels)
                .map(|(&c, &l)| active[layer][c][l as usize].as_ref().expect("filled above"))
                .collect();
            if lists.iter().any(|a| a.is_empty()) {
                continue;
            }
            let mut pos: SmallVec<[usize; 8]> = SmallVec::from_elem(0, lists.len());
            loop {
                let mut col = 0usize;
                let mut val = 1.0;
                for (q, a) in lists.iter().enumerate() {
                    let (k, v) = a[pos[q]];
                    col = (col << block.levels[q]) | k as usize;
                    val *= v;
                }
                row.push(((block.offset + col) as u32, val));
                let mut q = lists.len();
                loop {
                    if q == 0 {
                        break;
                    }
                    q -= 1;
                    pos[q] += 1;
                    if pos[q] < lists[q].len() {
                        break;
                    }
                    pos[q] = 0;
                    if q == 0 {
                        q = usize::MAX;
                        break;
                    }
                }
                if q == usize::MAX {
                    break;
                }
            }
        }
    }
    row.sort_unstable_by_key(|e| e.0);
    row
}

/// Explicit sparse design matrix; rows are computed independently in parallel.
pub fn assemble(coords: &TorusCoords, idx: &IndexSet, kernel: &WaveletKernel) -> SparseDesignMatrix<f64> {
    let rows: Vec<Vec<(u32, f64)>> = (0..coords.rows)
        .into_par_iter()
        .map(|r| design_row(coords, r, idx, kernel))
        .collect();
    SparseDesignMatrix::from_rows(idx.len(), rows)
}

/// Design matrix that recomputes its rows on every product.
pub struct MatrixFreeDesign<'a> {
    pub coords: &'a TorusCoords,
    pub idx: &'a IndexSet,
    pub kernel: &'a WaveletKernel,
}

impl LinearOperator<f64> for MatrixFreeDesign<'_> {
    fn nrows(&self) -> usize {
        self.coords.rows
    }

    fn ncols(&self) -> usize {
        self.idx.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(r, yr)| {
            *yr = design_row(self.coords, r, self.idx, self.kernel)
                .iter()
                .map(|&(c, v)| v * x[c as usize])
                .sum();
        });
    }

    fn apply_transpose(&self, y: &[f64], x: &mut [f64]) {
        let m = self.coords.rows;
        let n = self.idx.len();
        let blocks: Vec<usize> = (0..m.div_ceil(ROW_BLOCK)).collect();
        let partials: Vec<Vec<f64>> = blocks
            .par_iter()
            .map(|&b| {
                let mut acc = vec![0.0; n];
                for r in (b * ROW_BLOCK)..((b + 1) * ROW_BLOCK).min(m) {
                    for (c, v) in design_row(self.coords, r, self.idx, self.kernel) {
                        acc[c as usize] += v * y[r];
                    }
                }
                acc
            })
            .collect();
        x.iter_mut().for_each(|v| *v = 0.0);
        for p in partials {
            for (xi, pi) in x.iter_mut().zip(p) {
                *xi += pi;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    #[default]
    Explicit,
    MatrixFree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub order: u32,
    pub eta: EtaPolicy,
    pub lsqr: LsqrOptions<f64>,
    pub storage: Storage,
}

impl FitOptions {
    pub fn new(order: u32) -> Self {
        Self {
            order,
            eta: EtaPolicy::PerTerm,
            lsqr: LsqrOptions::default(),
            storage: Storage::Explicit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub stop: StopReason,
    pub residual_norm: f64,
    pub normal_residual_norm: f64,
    pub rhs_norm: f64,
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
}

/// Fitted expansion `Σ_u Σ_{(j,k)} a_{j,k} ψ^per_{j,k}(Ρ_u(y_u))`.
#[derive(Debug, Clone)]
pub struct RegressionModel {
    order: u32,
    index_set: IndexSet,
    kernel: WaveletKernel,
    term_eta: Vec<f64>,
    transforms: Vec<DimTransform>,
    coefficients: Vec<f64>,
    pub solver: SolverStats,
    pub bandwidths: Vec<Option<BandwidthChoice>>,
    pub warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    order: u32,
    index_set: IndexSetSpec,
    term_eta: Vec<f64>,
    transforms: Vec<DimTransform>,
    coefficients: Vec<f64>,
    solver: SolverStats,
    #[serde(default)]
    bandwidths: Vec<Option<BandwidthChoice>>,
    #[serde(default)]
    warnings: Vec<String>,
}

/// Extension parameter of each term under `policy`.
pub fn term_etas(idx: &IndexSet, order: u32, policy: EtaPolicy) -> Vec<f64> {
    idx.terms()
        .iter()
        .map(|t| match policy {
            EtaPolicy::Fixed(e) => e,
            EtaPolicy::PerTerm if t.subset.is_empty() => 0.0,
            EtaPolicy::PerTerm => default_eta(order, t.max_level, t.subset.len()),
        })
        .collect()
}

/// Builds the coordinate maps of a fit, estimating densities where requested.
pub fn build_transforms(
    ys: &[Vec<f64>],
    plan: &[TransformPlan],
) -> Result<(Vec<DimTransform>, Vec<Option<BandwidthChoice>>), RegressionError> {
    let mut transforms = Vec::with_capacity(plan.len());
    let mut choices = Vec::with_capacity(plan.len());
    for (i, p) in plan.iter().enumerate() {
        match p {
            TransformPlan::Known(t) => {
                transforms.push(DimTransform::Known(t.clone()));
                choices.push(None);
            }
            TransformPlan::Kde { bandwidth, domain } => {
                let column: Vec<f64> = ys.iter().map(|y| y[i]).collect();
                let (est, choice) = EstimatedTransform::fit(&column, *domain, *bandwidth)?;
                transforms.push(DimTransform::Estimated(est));
                choices.push(Some(choice));
            }
        }
    }
    Ok((transforms, choices))
}

fn check_inputs(ys: &[Vec<f64>], f: &[f64], d: usize) -> Result<(), RegressionError> {
    if ys.len() != f.len() {
        return Err(RegressionError::Shape(format!("{} samples but {} values", ys.len(), f.len())));
    }
    if let Some(p) = f.iter().position(|v| !v.is_finite()) {
        return Err(RegressionError::NonFinite(p));
    }
    if let Some(y) = ys.iter().find(|y| y.len() != d) {
        return Err(RegressionError::Shape(format!("sample has {} coordinates, expected {d}", y.len())));
    }
    Ok(())
}

/// Fits with a transform plan (known densities or kernel estimates per dimension).
pub fn fit(
    ys: &[Vec<f64>],
    f: &[f64],
    plan: &[TransformPlan],
    idx: IndexSet,
    opts: &FitOptions,
) -> Result<RegressionModel, RegressionError> {
    check_inputs(ys, f, idx.dim())?;
    if plan.len() != idx.dim() {
        return Err(RegressionError::Shape(format!("{} transform entries for dimension {}", plan.len(), idx.dim())));
    }
    let (transforms, choices) = build_transforms(ys, plan)?;
    let mut model = fit_with_transforms(ys, f, transforms, idx, opts)?;
    for c in choices.iter().flatten() {
        if let Some(w) = &c.warning {
            model.warnings.push(w.clone());
        }
    }
    model.bandwidths = choices;
    Ok(model)
}

pub fn fit_with_transforms(
    ys: &[Vec<f64>],
    f: &[f64],
    transforms: Vec<DimTransform>,
    idx: IndexSet,
    opts: &FitOptions,
) -> Result<RegressionModel, RegressionError> {
    check_inputs(ys, f, idx.dim())?;
    let kernel = WaveletKernel::new(opts.order as i64)?;
    let term_eta = term_etas(&idx, opts.order, opts.eta);
    let coords = TorusCoords::from_samples(ys, &transforms, &term_eta, &idx)?;
    let mut warnings = Vec::new();
    let n = idx.len() as f64;
    let m = ys.len() as f64;
    if m < n * n.log2() {
        let w = format!(
            "only {} samples for {} basis functions; at least N log2 N = {:.0} are recommended",
            ys.len(),
            idx.len(),
            n * n.log2()
        );
        warn!("{w}");
        warnings.push(w);
    }
    let (outcome, nnz) = match opts.storage {
        Storage::Explicit => {
            let a = assemble(&coords, &idx, &kernel);
            (lsqr(&a, f, opts.lsqr)?, a.nnz())
        }
        Storage::MatrixFree => {
            let op = MatrixFreeDesign {
                coords: &coords,
                idx: &idx,
                kernel: &kernel,
            };
            (lsqr(&op, f, opts.lsqr)?, 0)
        }
    };
    if outcome.stop == StopReason::IterationLimit {
        let w = format!("LSQR stopped at the iteration limit ({})", outcome.iterations);
        warn!("{w}");
        warnings.push(w);
    }
    let rhs_norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(RegressionModel {
        order: opts.order,
        kernel,
        term_eta,
        transforms,
        solver: SolverStats {
            iterations: outcome.iterations,
            stop: outcome.stop,
            residual_norm: outcome.residual_norm,
            normal_residual_norm: outcome.normal_residual_norm,
            rhs_norm,
            rows: ys.len(),
            cols: idx.len(),
            nnz,
        },
        coefficients: outcome.x,
        index_set: idx,
        bandwidths: Vec::new(),
        warnings,
    })
}

impl RegressionModel {
    /// Model with given coefficients; used for synthetic expansions.
    pub fn from_parts(
        order: u32,
        index_set: IndexSet,
        transforms: Vec<DimTransform>,
        eta: EtaPolicy,
        coefficients: Vec<f64>,
    ) -> Result<Self, RegressionError> {
        if coefficients.len() != index_set.len() {
            return Err(RegressionError::Shape(format!(
                "{} coefficients for {} basis functions",
                coefficients.len(),
                index_set.len()
            )));
        }
        if transforms.len() != index_set.dim() {
            return Err(RegressionError::Shape("transform count differs from dimension".into()));
        }
        let kernel = WaveletKernel::new(order as i64)?;
        let term_eta = term_etas(&index_set, order, eta);
        Ok(Self {
            order,
            kernel,
            term_eta,
            transforms,
            solver: SolverStats {
                iterations: 0,
                stop: StopReason::ZeroRhs,
                residual_norm: 0.0,
                normal_residual_norm: 0.0,
                rhs_norm: 0.0,
                rows: 0,
                cols: index_set.len(),
                nnz: 0,
            },
            coefficients,
            index_set,
            bandwidths: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    pub fn kernel(&self) -> &WaveletKernel {
        &self.kernel
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn transforms(&self) -> &[DimTransform] {
        &self.transforms
    }

    pub fn term_eta(&self) -> &[f64] {
        &self.term_eta
    }

    /// Coefficient of the constant term.
    pub fn constant(&self) -> f64 {
        self.coefficients[0]
    }

    /// Coefficients of one ANOVA term.
    pub fn term_coefficients(&self, u: &Subset) -> Result<&[f64], RegressionError> {
        let t = self.index_set.term(u)?;
        Ok(&self.coefficients[t.offset..t.offset + t.len])
    }

    pub fn coords(&self, ys: &[Vec<f64>]) -> Result<TorusCoords, RegressionError> {
        TorusCoords::from_samples(ys, &self.transforms, &self.term_eta, &self.index_set)
    }

    pub fn predict(&self, ys: &[Vec<f64>]) -> Result<Vec<f64>, RegressionError> {
        let coords = self.coords(ys)?;
        Ok(self.predict_coords(&coords))
    }

    pub fn predict_one(&self, y: &[f64]) -> Result<f64, RegressionError> {
        Ok(self.predict(&[y.to_vec()])?[0])
    }

    pub fn predict_coords(&self, coords: &TorusCoords) -> Vec<f64> {
        (0..coords.rows())
            .into_par_iter()
            .map(|r| {
                design_row(coords, r, &self.index_set, &self.kernel)
                    .iter()
                    .map(|&(c, v)| v * self.coefficients[c as usize])
                    .sum()
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String, RegressionError> {
        let file = ModelFile {
            order: self.order,
            index_set: self.index_set.spec(),
            term_eta: self.term_eta.clone(),
            transforms: self.transforms.clone(),
            coefficients: self.coefficients.clone(),
            solver: self.solver.clone(),
            bandwidths: self.bandwidths.clone(),
            warnings: self.warnings.clone(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| RegressionError::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, RegressionError> {
        let file: ModelFile = serde_json::from_str(s).map_err(|e| RegressionError::Format(e.to_string()))?;
        let index_set = IndexSet::from_spec(&file.index_set)?;
        if file.coefficients.len() != index_set.len() || file.term_eta.len() != index_set.terms().len() {
            return Err(RegressionError::Format("coefficient or term count does not match the index set".into()));
        }
        if file.transforms.len() != index_set.dim() {
            return Err(RegressionError::Format("transform count does not match the dimension".into()));
        }
        Ok(Self {
            order: file.order,
            kernel: WaveletKernel::new(file.order as i64)?,
            index_set,
            term_eta: file.term_eta,
            transforms: file.transforms,
            coefficients: file.coefficients,
            solver: file.solver,
            bandwidths: file.bandwidths,
            warnings: file.warnings,
        })
    }
}

/// Root mean square of `a - b`.
pub fn rmse<T: num_traits::Float + Sum>(a: &[T], b: &[T]) -> Option<T> {
    if a.is_empty() || a.len() != b.len() {
        return None;
    }
    let n = T::from(a.len())?;
    let s: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    Some((s / n).sqrt())
}

/// Gram matrix of the one-dimensional basis up to level `n` (constant
/// included) on `[-1/2 + eta, 1/2]`, with its extremal eigenvalues.
#[derive(Debug, Clone)]
pub struct GramReport {
    pub matrix: DMatrix<f64>,
    pub mu_min: f64,
    pub mu_max: f64,
}

pub fn gram_restricted(m: u32, n: u32, eta: f64) -> Result<GramReport, RegressionError> {
    let idx = IndexSet::full(1, n, 1)?;
    let kernel = WaveletKernel::new(m as i64)?;
    let size = idx.len();
    // products are polynomials of degree 2m-2 between grid points of width 2^{-(n+1)}
    let h = 0.5f64.powi(n as i32 + 1);
    let a = -0.5 + eta;
    let mut breaks = vec![a];
    let mut t = -0.5 + ((eta / h).floor() + 1.0) * h;
    while t < 0.5 {
        breaks.push(t);
        t += h;
    }
    breaks.push(0.5);
    let (gx, gw) = gauss_legendre(m as usize + 1);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for w in breaks.windows(2) {
        let (l, r) = (w[0], w[1]);
        if r <= l {
            continue;
        }
        for (x, wt) in gx.iter().zip(&gw) {
            points.push(vec![0.5 * (l + r) + 0.5 * (r - l) * x]);
            weights.push(0.5 * (r - l) * wt);
        }
    }
    let coords = TorusCoords::single(&points, &idx)?;
    let mut g = DMatrix::<f64>::zeros(size, size);
    for (p, &w) in weights.iter().enumerate() {
        let row = design_row(&coords, p, &idx, &kernel);
        for &(i, vi) in &row {
            for &(j, vj) in &row {
                g[(i as usize, j as usize)] += w * vi * vj;
            }
        }
    }
    let g = 0.5 * (&g + g.transpose());
    let eig = SymmetricEigen::new(g.clone());
    let mu_min = eig.eigenvalues.min();
    let mu_max = eig.eigenvalues.max();
    Ok(GramReport {
        matrix: g,
        mu_min,
        mu_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Density;

    #[test]
    fn level_zero_design() {
        let idx = IndexSet::full(1, 0, 1).unwrap();
        let kernel = WaveletKernel::new(2).unwrap();
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![-0.5 + 0.1 * i as f64]).collect();
        let coords = TorusCoords::single(&pts, &idx).unwrap();
        let a = assemble(&coords, &idx, &kernel);
        assert_eq!(a.ncols(), 2);
        assert!((0..10).all(|r| a.get(r, 0) == 1.0));
    }

    #[test]
    fn haar_rows_have_one_entry_per_level() {
        let idx = IndexSet::full(1, 4, 1).unwrap();
        let kernel = WaveletKernel::new(1).unwrap();
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![-0.49 + 0.0197 * i as f64]).collect();
        let coords = TorusCoords::single(&pts, &idx).unwrap();
        for r in 0..50 {
            assert_eq!(design_row(&coords, r, &idx, &kernel).len(), 6);
        }
    }

    #[test]
    fn torus_range_enforced() {
        let idx = IndexSet::full(1, 1, 1).unwrap();
        assert!(TorusCoords::single(&[vec![0.7]], &idx).is_err());
        let c = TorusCoords::single(&[vec![0.5]], &idx).unwrap();
        assert_eq!(c.point(0, 0), &[-0.5]);
    }

    #[test]
    fn constant_fit() {
        let idx = IndexSet::full(1, 3, 1).unwrap();
        let t = Transform1D::new(Density::Normal);
        let ys = t.sample(200, 1).unwrap().into_iter().map(|v| vec![v]).collect::<Vec<_>>();
        let f = vec![2.5; ys.len()];
        let model = fit(&ys, &f, &[TransformPlan::Known(t)], idx, &FitOptions::new(2)).unwrap();
        assert!((model.constant() - 2.5).abs() < 1e-8);
        let p = model.predict(&[vec![0.3], vec![-1.7]]).unwrap();
        assert!(p.iter().all(|v| (v - 2.5).abs() < 1e-8));
    }

    #[test]
    fn rmse_basic() {
        assert_eq!(rmse(&[1.0, 1.0], &[3.0, 3.0]), Some(2.0));
        assert_eq!(rmse::<f64>(&[], &[]), None);
    }
}
