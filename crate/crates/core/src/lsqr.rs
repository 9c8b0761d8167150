//! LSQR for `min ‖A x - b‖₂` using only products with `A` and `Aᵀ`.

use std::iter::Sum;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operator::LinearOperator;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LsqrError {
    #[error("right-hand side has {found} entries, operator has {expected} rows")]
    Shape { expected: usize, found: usize },
    #[error("right-hand side contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `b = 0`, so `x = 0` is exact.
    ZeroRhs,
    /// `‖r‖ ≤ tol·‖b‖`, i.e. a consistent system was solved.
    Residual,
    /// `‖Aᵀr‖ / (‖A‖ ‖r‖)` fell below the tolerance.
    LeastSquares,
    /// The Krylov space is exhausted.
    Breakdown,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqrOptions<T> {
    pub tol: T,
    /// Defaults to `50·N` when `None`.
    pub max_iter: Option<usize>,
}

impl<T: Float> Default for LsqrOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::from(1e-10).expect("representable tolerance"),
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqrOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub stop: StopReason,
    /// `‖b - A x‖` estimate after the last iteration.
    pub residual_norm: T,
    /// `‖Aᵀ(b - A x)‖` estimate.
    pub normal_residual_norm: T,
    /// Residual estimate after each iteration, starting with `‖b‖`.
    pub history: Vec<T>,
    /// Frobenius-type estimate of `‖A‖` accumulated by the bidiagonalization.
    pub anorm: T,
}

fn norm<T: Float + Sum>(v: &[T]) -> T {
    v.iter().map(|&a| a * a).sum::<T>().sqrt()
}

fn scale<T: Float>(v: &mut [T], s: T) {
    v.iter_mut().for_each(|a| *a = *a * s);
}

pub fn lsqr<T, A>(a: &A, b: &[T], opts: LsqrOptions<T>) -> Result<LsqrOutcome<T>, LsqrError>
where
    T: Float + Sum + Send + Sync,
    A: LinearOperator<T> + ?Sized,
{
    let (m, n) = (a.nrows(), a.ncols());
    if b.len() != m {
        return Err(LsqrError::Shape {
            expected: m,
            found: b.len(),
        });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(LsqrError::NonFinite);
    }
    let max_iter = opts.max_iter.unwrap_or(50 * n.max(1));
    let tol = opts.tol;
    let mut x = vec![T::zero(); n];

    let mut u = b.to_vec();
    let bnorm = norm(&u);
    let mut out = LsqrOutcome {
        x: Vec::new(),
        iterations: 0,
        stop: StopReason::ZeroRhs,
        residual_norm: bnorm,
        normal_residual_norm: T::zero(),
        history: vec![bnorm],
        anorm: T::zero(),
    };
    if bnorm == T::zero() {
        out.x = x;
        return Ok(out);
    }
    scale(&mut u, bnorm.recip());
    let mut v = vec![T::zero(); n];
    a.apply_transpose(&u, &mut v);
    let mut alpha = norm(&v);
    if alpha == T::zero() {
        out.x = x;
        out.stop = StopReason::LeastSquares;
        return Ok(out);
    }
    scale(&mut v, alpha.recip());
    let mut w = v.clone();
    let mut phibar = bnorm;
    let mut rhobar = alpha;
    let mut anorm2 = T::zero();
    let mut au = vec![T::zero(); m];
    let mut atv = vec![T::zero(); n];
    out.stop = StopReason::IterationLimit;

    for itn in 1..=max_iter {
        a.apply(&v, &mut au);
        for (ui, ai) in u.iter_mut().zip(&au) {
            *ui = *ai - alpha * *ui;
        }
        let beta = norm(&u);
        if beta > T::zero() {
            scale(&mut u, beta.recip());
        }
        anorm2 = anorm2 + alpha * alpha + beta * beta;
        a.apply_transpose(&u, &mut atv);
        for (vi, ai) in v.iter_mut().zip(&atv) {
            *vi = *ai - beta * *vi;
        }
        let alpha_next = norm(&v);
        if alpha_next > T::zero() {
            scale(&mut v, alpha_next.recip());
        }

        let rho = rhobar.hypot(beta);
        let c = rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha_next;
        rhobar = -c * alpha_next;
        let phi = c * phibar;
        phibar = s * phibar;

        let t1 = phi / rho;
        let t2 = -theta / rho;
        for ((xi, wi), vi) in x.iter_mut().zip(w.iter_mut()).zip(&v) {
            *xi = *xi + t1 * *wi;
            *wi = *vi + t2 * *wi;
        }
        alpha = alpha_next;

        let rnorm = phibar;
        let arnorm = alpha * c.abs() * phibar;
        let anorm = anorm2.sqrt();
        out.iterations = itn;
        out.residual_norm = rnorm;
        out.normal_residual_norm = arnorm;
        out.anorm = anorm;
        out.history.push(rnorm);

        if rnorm <= tol * bnorm {
            out.stop = StopReason::Residual;
            break;
        }
        if rnorm == T::zero() || arnorm <= tol * anorm * rnorm {
            out.stop = StopReason::LeastSquares;
            break;
        }
        if beta == T::zero() || alpha == T::zero() {
            out.stop = StopReason::Breakdown;
            break;
        }
    }
    out.x = x;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn zero_rhs_gives_zero() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let out = lsqr(&a, &[0.0; 3], LsqrOptions::default()).unwrap();
        assert_eq!(out.x, vec![0.0, 0.0]);
        assert_eq!(out.stop, StopReason::ZeroRhs);
    }

    #[test]
    fn orthonormal_columns() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = DMatrix::from_row_slice(3, 2, &[s, 0.0, s, 0.0, 0.0, 1.0]);
        let b = [1.0, 3.0, -2.0];
        let out = lsqr(&a, &b, LsqrOptions::default()).unwrap();
        assert!((out.x[0] - 4.0 * s).abs() < 1e-12);
        assert!((out.x[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert_eq!(lsqr(&a, &[1.0], LsqrOptions::default()).unwrap_err(), LsqrError::Shape { expected: 2, found: 1 });
        assert_eq!(lsqr(&a, &[1.0, f64::NAN], LsqrOptions::default()).unwrap_err(), LsqrError::NonFinite);
    }

    #[test]
    fn single_precision() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0f32, 0.0, 0.0, 2.0, 1.0, 1.0]);
        let out = lsqr(&a, &[1.0f32, 2.0, 2.0], LsqrOptions { tol: 1e-6, max_iter: None }).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5);
    }
}
