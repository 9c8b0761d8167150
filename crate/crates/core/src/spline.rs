//! Exact piecewise polynomials, cardinal B-splines, Chui-Wang wavelets and the
//! iterated antiderivative `Ψ_m` of the wavelet.
//!
//! A [`PiecewisePolynomial`] stores one polynomial per knot interval in the
//! shifted monomial basis `Σ c_i (x - t_l)^i` about the interval's left knot
//! `t_l`. Values are right-continuous: a point that falls exactly on a knot is
//! evaluated with the piece to its right, and the function vanishes for
//! `x >= last knot`.

use std::cmp::Ordering;

use serde::Serialize;
use thiserror::Error;

use crate::scalar::{binomial, Scalar};
use crate::Rational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("spline order must be at least 1, got {0}")]
    InvalidOrder(i64),
    #[error("knots must be strictly increasing")]
    NonIncreasingKnots,
    #[error("expected {expected} pieces for the given knots, got {found}")]
    PieceCount { expected: usize, found: usize },
    #[error("antiderivative does not vanish to the right of the support")]
    NonCompactAntiderivative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolynomial<T> {
    knots: Vec<T>,
    pieces: Vec<Vec<T>>,
}

/// JSON-friendly dump used for cross-implementation comparisons.
#[derive(Debug, Clone, Serialize)]
pub struct PolynomialDump {
    pub knots: Vec<String>,
    pub pieces: Vec<Vec<String>>,
}

impl<T: Scalar> PiecewisePolynomial<T> {
    pub fn new(knots: Vec<T>, pieces: Vec<Vec<T>>) -> Result<Self, SplineError> {
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SplineError::NonIncreasingKnots);
        }
        let expected = knots.len().saturating_sub(1);
        if pieces.len() != expected {
            return Err(SplineError::PieceCount {
                expected,
                found: pieces.len(),
            });
        }
        Ok(Self { knots, pieces })
    }

    pub fn zero() -> Self {
        Self {
            knots: Vec::new(),
            pieces: Vec::new(),
        }
    }

    /// The constant `c` on `[a, b)`.
    pub fn constant(a: T, b: T, c: T) -> Self {
        assert!(a < b, "empty interval");
        Self {
            knots: vec![a, b],
            pieces: vec![vec![c]],
        }
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn pieces(&self) -> &[Vec<T>] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.iter().all(|c| c.is_zero()))
    }

    /// Closed interval `[first knot, last knot]`, or `None` for the zero function.
    pub fn support(&self) -> Option<(T, T)> {
        match (self.knots.first(), self.knots.last()) {
            (Some(a), Some(b)) if self.knots.len() >= 2 => Some((a.clone(), b.clone())),
            _ => None,
        }
    }

    pub fn degree(&self) -> usize {
        self.pieces
            .iter()
            .map(|p| {
                p.iter()
                    .rposition(|c| !c.is_zero())
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    /// Index of the piece containing `x` under the right-continuous convention.
    pub fn locate(&self, x: &T) -> Option<usize> {
        if self.knots.len() < 2 || *x < self.knots[0] || *x >= self.knots[self.knots.len() - 1] {
            return None;
        }
        let idx = self.knots.partition_point(|t| t <= x);
        Some(idx - 1)
    }

    pub fn eval(&self, x: &T) -> T {
        match self.locate(x) {
            Some(i) => horner(&self.pieces[i], &(x.clone() - self.knots[i].clone())),
            None => T::zero(),
        }
    }

    /// Evaluates at a floating-point abscissa; knots and coefficients are
    /// converted at the leaf.
    pub fn eval_f64(&self, x: f64) -> f64 {
        if self.knots.len() < 2 {
            return 0.0;
        }
        let last = self.knots[self.knots.len() - 1].to_f64();
        if x < self.knots[0].to_f64() || x >= last {
            return 0.0;
        }
        let idx = self.knots.partition_point(|t| t.to_f64() <= x) - 1;
        let dx = x - self.knots[idx].to_f64();
        self.pieces[idx]
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * dx + c.to_f64())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> PiecewisePolynomial<U> {
        PiecewisePolynomial {
            knots: self.knots.iter().map(&f).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| p.iter().map(&f).collect())
                .collect(),
        }
    }

    pub fn to_f64(&self) -> PiecewisePolynomial<f64> {
        self.map(|c| c.to_f64())
    }

    pub fn dump(&self) -> PolynomialDump {
        PolynomialDump {
            knots: self.knots.iter().map(|k| k.to_string()).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| p.iter().map(|c| c.to_string()).collect())
                .collect(),
        }
    }

    /// Coefficients of the piece re-expanded about `left`, valid up to the next
    /// knot; empty outside the support.
    pub fn coefficients_at(&self, left: &T) -> Vec<T> {
        match self.locate(left) {
            Some(i) => shift_coeffs(&self.pieces[i], &(left.clone() - self.knots[i].clone())),
            None => Vec::new(),
        }
    }

    /// Representation on a grid that must contain every knot of `self` lying
    /// inside the grid's span.
    fn refine(&self, grid: &[T]) -> Vec<Vec<T>> {
        grid.windows(2).map(|w| self.coefficients_at(&w[0])).collect()
    }

    fn from_grid(grid: Vec<T>, pieces: Vec<Vec<T>>) -> Self {
        let mut out = Self {
            knots: grid,
            pieces,
        };
        out.trim();
        out
    }

    /// Drops vanishing pieces at both ends and trailing zero coefficients.
    fn trim(&mut self) {
        for p in &mut self.pieces {
            while p.last().is_some_and(|c| c.is_zero()) {
                p.pop();
            }
        }
        let first = self.pieces.iter().position(|p| !p.is_empty());
        let last = self.pieces.iter().rposition(|p| !p.is_empty());
        match (first, last) {
            (Some(f), Some(l)) => {
                self.pieces = self.pieces[f..=l].to_vec();
                self.knots = self.knots[f..=l + 1].to_vec();
            }
            _ => {
                self.knots.clear();
                self.pieces.clear();
            }
        }
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut out = self.map(|v| v.clone());
        for p in &mut out.pieces {
            for v in p.iter_mut() {
                *v = v.clone() * c.clone();
            }
        }
        out.trim();
        out
    }

    fn combine(&self, other: &Self, op: impl Fn(&[T], &[T]) -> Vec<T>) -> Self {
        let grid = merge_knots(&self.knots, &other.knots);
        if grid.len() < 2 {
            return Self::zero();
        }
        let a = self.refine(&grid);
        let b = other.refine(&grid);
        let pieces = a.iter().zip(&b).map(|(p, q)| op(p, q)).collect();
        Self::from_grid(grid, pieces)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |p, q| poly_add(p, q))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, |p, q| {
            let neg: Vec<T> = q.iter().map(|c| -c.clone()).collect();
            poly_add(p, &neg)
        })
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (Some((a0, a1)), Some((b0, b1))) = (self.support(), other.support()) else {
            return Self::zero();
        };
        let lo = if a0 > b0 { a0 } else { b0 };
        let hi = if a1 < b1 { a1 } else { b1 };
        if lo >= hi {
            return Self::zero();
        }
        let grid: Vec<T> = merge_knots(&self.knots, &other.knots)
            .into_iter()
            .filter(|t| *t >= lo && *t <= hi)
            .collect();
        let a = self.refine(&grid);
        let b = other.refine(&grid);
        let pieces = a.iter().zip(&b).map(|(p, q)| poly_mul(p, q)).collect();
        Self::from_grid(grid, pieces)
    }

    /// `x ↦ f(scale·x + shift)` for `scale > 0`.
    pub fn affine(&self, scale: &T, shift: &T) -> Self {
        assert!(*scale > T::zero(), "affine scale must be positive");
        let knots = self
            .knots
            .iter()
            .map(|t| (t.clone() - shift.clone()) / scale.clone())
            .collect();
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let mut s = T::one();
                p.iter()
                    .map(|c| {
                        let v = c.clone() * s.clone();
                        s = s.clone() * scale.clone();
                        v
                    })
                    .collect()
            })
            .collect();
        Self { knots, pieces }
    }

    /// The part of `f` on `[a, b)`.
    pub fn restrict(&self, a: &T, b: &T) -> Self {
        if a >= b {
            return Self::zero();
        }
        let mut grid: Vec<T> = self
            .knots
            .iter()
            .filter(|t| *t > a && *t < b)
            .cloned()
            .collect();
        grid.insert(0, a.clone());
        grid.push(b.clone());
        let pieces = self.refine(&grid);
        Self::from_grid(grid, pieces)
    }

    /// One-periodic wrap `Σ_l f(x + l)` restricted to `[left, left + 1)`.
    pub fn periodize(&self, left: &T) -> Self {
        let Some((s0, s1)) = self.support() else {
            return Self::zero();
        };
        let right = left.clone() + T::one();
        // f(x + l) is supported on [s0 - l, s1 - l]
        let l_min = (s0 - right.clone()).floor_i64();
        let l_max = (s1 - left.clone()).floor_i64() + 1;
        let mut acc = Self::zero();
        for l in l_min..=l_max {
            let shifted = self.affine(&T::one(), &T::from_i64(l));
            let part = shifted.restrict(left, &right);
            if !part.is_zero() {
                acc = acc.add(&part);
            }
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .skip(1)
                    .map(|(i, c)| c.clone() * T::from_i64(i as i64))
                    .collect()
            })
            .collect();
        Self::from_grid(self.knots.clone(), pieces)
    }

    /// Antiderivative `F(x) = ∫_{-∞}^x f` on the same knots, together with its
    /// constant value to the right of the support (the total integral).
    pub fn antiderivative(&self) -> (Self, T) {
        let mut acc = T::zero();
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for (i, p) in self.pieces.iter().enumerate() {
            let h = self.knots[i + 1].clone() - self.knots[i].clone();
            let mut q = Vec::with_capacity(p.len() + 1);
            q.push(acc.clone());
            for (k, c) in p.iter().enumerate() {
                q.push(c.clone() / T::from_i64(k as i64 + 1));
            }
            acc = horner(&q, &h);
            pieces.push(q);
        }
        let f = Self {
            knots: self.knots.clone(),
            pieces,
        };
        (f, acc)
    }

    /// Antiderivative that must vanish right of the support.
    pub fn antiderivative_compact(&self) -> Result<Self, SplineError> {
        let (f, tail) = self.antiderivative();
        if !tail.is_zero() {
            return Err(SplineError::NonCompactAntiderivative);
        }
        let mut f = f;
        f.trim();
        Ok(f)
    }

    pub fn integral(&self) -> T {
        self.antiderivative().1
    }

    /// `∫_a^b f`.
    pub fn integral_over(&self, a: &T, b: &T) -> T {
        match a.partial_cmp(b) {
            Some(Ordering::Less) => self.restrict(a, b).integral(),
            Some(Ordering::Greater) => -self.restrict(b, a).integral(),
            _ => T::zero(),
        }
    }

    /// `∫ f(x) x^β dx`, exact.
    pub fn moment(&self, beta: u32) -> T {
        let mut total = T::zero();
        for (i, p) in self.pieces.iter().enumerate() {
            let a = self.knots[i].clone();
            let h = self.knots[i + 1].clone() - a.clone();
            // x^β = Σ_r C(β,r) a^{β-r} y^r with y = x - a
            for (k, c) in p.iter().enumerate() {
                for r in 0..=beta {
                    let e = (k as u32) + r + 1;
                    let term = c.clone()
                        * binomial::<T>(beta, r)
                        * a.powi(beta - r)
                        * h.powi(e)
                        / T::from_i64(e as i64);
                    total = total + term;
                }
            }
        }
        total
    }

    /// Jumps `f^{(order)}(t+) - f^{(order)}(t-)` at every knot, treating the
    /// function as zero outside its support.
    pub fn derivative_jumps(&self, order: usize) -> Vec<T> {
        let mut d = self.clone();
        for _ in 0..order {
            d = Self {
                knots: d.knots.clone(),
                pieces: d
                    .pieces
                    .iter()
                    .map(|p| {
                        p.iter()
                            .enumerate()
                            .skip(1)
                            .map(|(i, c)| c.clone() * T::from_i64(i as i64))
                            .collect()
                    })
                    .collect(),
            };
        }
        let n = d.knots.len();
        (0..n)
            .map(|i| {
                let right = if i + 1 < n {
                    d.pieces[i].first().cloned().unwrap_or_else(T::zero)
                } else {
                    T::zero()
                };
                let left = if i > 0 {
                    let h = d.knots[i].clone() - d.knots[i - 1].clone();
                    horner(&d.pieces[i - 1], &h)
                } else {
                    T::zero()
                };
                right - left
            })
            .collect()
    }
}

impl PiecewisePolynomial<f64> {
    /// Maximum of `|f|` located through endpoint values and the zeros of
    /// `f'` on every piece.
    pub fn max_abs(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, p) in self.pieces.iter().enumerate() {
            let h = self.knots[i + 1] - self.knots[i];
            best = best.max(horner(p, &0.0).abs()).max(horner(p, &h).abs());
            let dp: Vec<f64> = p.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect();
            for r in real_roots_in(&dp, 0.0, h) {
                best = best.max(horner(p, &r).abs());
            }
        }
        best
    }
}

/// Roots of a small-degree polynomial on `[a, b]` by sign-change scanning and
/// bisection.
fn real_roots_in(p: &[f64], a: f64, b: f64) -> Vec<f64> {
    if p.len() < 2 {
        return Vec::new();
    }
    const STEPS: usize = 512;
    let mut roots = Vec::new();
    let step = (b - a) / STEPS as f64;
    let mut x0 = a;
    let mut f0 = horner(p, &x0);
    for s in 1..=STEPS {
        let x1 = a + step * s as f64;
        let f1 = horner(p, &x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            let (mut lo, mut hi, mut flo) = (x0, x1, f0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let fm = horner(p, &mid);
                if fm == 0.0 || hi - lo < 1e-16 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

pub(crate) fn horner<T: Scalar>(coeffs: &[T], x: &T) -> T {
    coeffs
        .iter()
        .rev()
        .fold(T::zero(), |acc, c| acc * x.clone() + c.clone())
}

/// Coefficients of `p(z + delta)` in `z`.
fn shift_coeffs<T: Scalar>(coeffs: &[T], delta: &T) -> Vec<T> {
    if delta.is_zero() {
        return coeffs.to_vec();
    }
    let n = coeffs.len();
    let mut out = vec![T::zero(); n];
    for (k, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate().take(k + 1) {
            let term = c.clone() * binomial::<T>(k as u32, i as u32) * delta.powi((k - i) as u32);
            *o = o.clone() + term;
        }
    }
    out
}

fn poly_add<T: Scalar>(p: &[T], q: &[T]) -> Vec<T> {
    let n = p.len().max(q.len());
    (0..n)
        .map(|i| {
            let a = p.get(i).cloned().unwrap_or_else(T::zero);
            let b = q.get(i).cloned().unwrap_or_else(T::zero);
            a + b
        })
        .collect()
}

fn poly_mul<T: Scalar>(p: &[T], q: &[T]) -> Vec<T> {
    if p.is_empty() || q.is_empty() {
        return Vec::new();
    }
    let mut out = vec![T::zero(); p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] = out[i + j].clone() + a.clone() * b.clone();
        }
    }
    out
}

fn merge_knots<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = if j >= b.len() || (i < a.len() && a[i] <= b[j]) {
            i += 1;
            a[i - 1].clone()
        } else {
            j += 1;
            b[j - 1].clone()
        };
        if out.last().is_none_or(|l| *l < next) {
            out.push(next);
        }
    }
    out
}

fn check_order(m: i64) -> Result<u32, SplineError> {
    if m < 1 {
        Err(SplineError::InvalidOrder(m))
    } else {
        Ok(m as u32)
    }
}

/// Cardinal B-spline `B_m`, centred at zero with support `[-m/2, m/2]`, built
/// by the moving-window recursion `B_m(x) = ∫_{x-1/2}^{x+1/2} B_{m-1}`.
pub fn bspline<T: Scalar>(m: i64) -> Result<PiecewisePolynomial<T>, SplineError> {
    let m = check_order(m)?;
    let half = T::from_ratio(1, 2);
    let mut b = PiecewisePolynomial::constant(-half.clone(), half.clone(), T::one());
    for _ in 1..m {
        b = window_integral(&b, &half);
    }
    Ok(b)
}

/// `g(x) = ∫_{x-h}^{x+h} f`.
fn window_integral<T: Scalar>(f: &PiecewisePolynomial<T>, h: &T) -> PiecewisePolynomial<T> {
    let (big_f, tail) = f.antiderivative();
    let mut grid: Vec<T> = f
        .knots
        .iter()
        .flat_map(|t| [t.clone() - h.clone(), t.clone() + h.clone()])
        .collect();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("ordered knots"));
    grid.dedup();
    let antideriv_at = |point: T| -> Vec<T> {
        match big_f.locate(&point) {
            Some(i) => shift_coeffs(&big_f.pieces[i], &(point - big_f.knots[i].clone())),
            None => {
                let (s0, _) = big_f.support().expect("non-empty support");
                if point < s0 {
                    Vec::new()
                } else {
                    vec![tail.clone()]
                }
            }
        }
    };
    let pieces = grid
        .windows(2)
        .map(|w| {
            let upper = antideriv_at(w[0].clone() + h.clone());
            let lower: Vec<T> = antideriv_at(w[0].clone() - h.clone())
                .into_iter()
                .map(|c| -c)
                .collect();
            poly_add(&upper, &lower)
        })
        .collect();
    PiecewisePolynomial::from_grid(grid, pieces)
}

/// Two-scale coefficients `q_0, …, q_{3m-2}` of the Chui-Wang wavelet of order `m`.
pub fn chui_wang_coefficients(m: i64) -> Result<Vec<Rational>, SplineError> {
    let m = check_order(m)? as i64;
    let b2m = bspline::<Rational>(2 * m)?;
    let denom = Rational::from_i64(1 << (m - 1));
    Ok((0..=3 * m - 2)
        .map(|n| {
            let s = (0..=m).fold(Rational::from_i64(0), |acc, k| {
                acc + binomial::<Rational>(m as u32, k as u32) * b2m.eval(&Rational::from_i64(n + 1 - k - m))
            });
            let sign = if n % 2 == 0 { 1 } else { -1 };
            Rational::from_i64(sign) * s / denom.clone()
        })
        .collect())
}

/// Chui-Wang wavelet `ψ(x) = Σ_n q_n B_m(2x - n - m/2)`, supported on `[0, 2m-1]`.
pub fn chui_wang_wavelet(m: i64) -> Result<PiecewisePolynomial<Rational>, SplineError> {
    let q = chui_wang_coefficients(m)?;
    let bm = bspline::<Rational>(m)?;
    let two = Rational::from_i64(2);
    let mut psi = PiecewisePolynomial::zero();
    for (n, qn) in q.iter().enumerate() {
        let shift = -(Rational::from_i64(n as i64) + Rational::from_ratio(m, 2));
        psi = psi.add(&bm.affine(&two, &shift).scale(qn));
    }
    Ok(psi)
}

/// `Ψ_m(x) = ∫_{-∞}^x ψ(t)(x-t)^{m-1}/(m-1)! dt`, obtained as the `m`-fold
/// antiderivative of the wavelet.
pub fn psi_m(m: i64) -> Result<PiecewisePolynomial<Rational>, SplineError> {
    let mut f = chui_wang_wavelet(m)?;
    for _ in 0..m {
        f = f.antiderivative_compact()?;
    }
    Ok(f)
}

/// Autocorrelation `a(s) = ∫ ψ(y) ψ(y - s) dy` at integer lags `s = 0, …, 2m-2`.
pub fn wavelet_autocorrelation(m: i64) -> Result<Vec<Rational>, SplineError> {
    let psi = chui_wang_wavelet(m)?;
    let one = Rational::from_i64(1);
    Ok((0..(2 * m - 1))
        .map(|s| psi.mul(&psi.affine(&one, &Rational::from_i64(-s))).integral())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn bspline_values() {
        let b1 = bspline::<Rational>(1).unwrap();
        assert_eq!(b1.eval(&r(0, 1)), r(1, 1));
        let b2 = bspline::<Rational>(2).unwrap();
        assert_eq!(b2.eval(&r(0, 1)), r(1, 1));
        assert_eq!(b2.eval(&r(1, 2)), r(1, 2));
        let b4 = bspline::<Rational>(4).unwrap();
        assert_eq!(b4.eval(&r(0, 1)), r(2, 3));
        assert_eq!(b4.eval(&r(1, 1)), r(1, 6));
        assert_eq!(b4.eval(&r(-1, 1)), r(1, 6));
        for m in 1..=6 {
            let b = bspline::<Rational>(m).unwrap();
            assert_eq!(b.eval(&r(m, 2)), r(0, 1));
            assert_eq!(b.eval(&(r(-m, 2) - r(1, 100))), r(0, 1));
            assert_eq!(b.support(), Some((r(-m, 2), r(m, 2))));
        }
    }

    #[test]
    fn invalid_order() {
        assert_eq!(bspline::<f64>(0), Err(SplineError::InvalidOrder(0)));
        assert!(chui_wang_wavelet(-1).is_err());
    }

    #[test]
    fn coefficient_tables() {
        assert_eq!(chui_wang_coefficients(1).unwrap(), vec![r(1, 1), r(-1, 1)]);
        assert_eq!(
            chui_wang_coefficients(2).unwrap(),
            vec![r(1, 12), r(-1, 2), r(5, 6), r(-1, 2), r(1, 12)]
        );
    }

    #[test]
    fn haar_case() {
        let psi = chui_wang_wavelet(1).unwrap();
        assert_eq!(psi.eval(&r(1, 4)), r(1, 1));
        assert_eq!(psi.eval(&r(3, 4)), r(-1, 1));
        assert_eq!(psi.eval(&r(0, 1)), r(1, 1));
        assert_eq!(psi.eval(&r(1, 1)), r(0, 1));
    }

    #[test]
    fn wavelet_support_and_grid() {
        for m in 1..=4 {
            let psi = chui_wang_wavelet(m).unwrap();
            let (a, b) = psi.support().unwrap();
            assert!(a >= r(0, 1) && b <= r(2 * m - 1, 1));
            assert_eq!(psi.degree(), (m - 1) as usize);
            for t in psi.knots() {
                assert!((t.clone() * r(2, 1)).is_integer());
            }
        }
    }

    #[test]
    fn window_integral_matches_quadrature() {
        // B_3 against midpoint quadrature of the recursion applied to B_2.
        let b2 = bspline::<f64>(2).unwrap();
        let b3 = bspline::<f64>(3).unwrap();
        for &x in &[-1.2, -0.3, 0.0, 0.41, 1.1] {
            let n = 20000;
            let h = 1.0 / n as f64;
            let q: f64 = (0..n).map(|i| b2.eval(&(x - 0.5 + (i as f64 + 0.5) * h)) * h).sum();
            assert!((q - b3.eval(&x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn restrict_and_periodize() {
        let b3 = bspline::<Rational>(3).unwrap();
        let p = b3.periodize(&r(-1, 2));
        // partition of unity of integer translates
        for x in [r(-1, 2), r(-1, 3), r(0, 1), r(1, 5), r(49, 100)] {
            assert_eq!(p.eval(&x), r(1, 1));
        }
        assert_eq!(b3.integral_over(&r(-3, 2), &r(0, 1)), r(1, 2));
        assert_eq!(b3.integral_over(&r(0, 1), &r(-3, 2)), r(-1, 2));
    }

    #[test]
    fn dump_is_serialisable() {
        let d = bspline::<Rational>(2).unwrap().dump();
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains("\"-1\""));
    }

    #[test]
    fn max_abs_of_hat() {
        let b2 = bspline::<f64>(2).unwrap();
        assert!((b2.max_abs() - 1.0).abs() < 1e-15);
        let b3 = bspline::<f64>(3).unwrap();
        assert!((b3.max_abs() - 0.75).abs() < 1e-12);
    }
}
