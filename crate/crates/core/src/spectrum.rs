//! Extremal singular values of a linear operator by Lanczos iteration on
//! `AᵀA` with full reorthogonalization.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::operator::LinearOperator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionEstimate {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub condition: f64,
    pub steps: usize,
}

const CHECK_EVERY: usize = 16;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Extremal singular values of `A`; Ritz pairs are accepted once their
/// residual bound falls below `rel_tol` times the Ritz value.
pub fn condition_number<A: LinearOperator<f64> + ?Sized>(a: &A, rel_tol: f64) -> ConditionEstimate {
    let n = a.ncols();
    let m = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nq = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|v| *v /= nq);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut av = vec![0.0; m];
    let mut w = vec![0.0; n];
    let mut result = ConditionEstimate {
        sigma_max: 0.0,
        sigma_min: 0.0,
        condition: f64::INFINITY,
        steps: 0,
    };
    for k in 0..n {
        a.apply(&q, &mut av);
        a.apply_transpose(&av, &mut w);
        let alpha = dot(&q, &w);
        basis.push(q.clone());
        alphas.push(alpha);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = dot(&w, &w).sqrt();
        let last = k + 1 == n || beta <= 1e-14 * alphas.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        if last || (k + 1) % CHECK_EVERY == 0 {
            let size = k + 1;
            let mut t = DMatrix::<f64>::zeros(size, size);
            for i in 0..size {
                t[(i, i)] = alphas[i];
                if i + 1 < size {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let (imin, imax) = (eig.eigenvalues.imin(), eig.eigenvalues.imax());
            let (lmin, lmax) = (eig.eigenvalues[imin], eig.eigenvalues[imax]);
            let rmin = (beta * eig.eigenvectors[(size - 1, imin)]).abs();
            let rmax = (beta * eig.eigenvectors[(size - 1, imax)]).abs();
            result = ConditionEstimate {
                sigma_max: lmax.max(0.0).sqrt(),
                sigma_min: lmin.max(0.0).sqrt(),
                condition: if lmin > 0.0 { (lmax / lmin).sqrt() } else { f64::INFINITY },
                steps: size,
            };
            let converged = rmax <= rel_tol * lmax.abs() && rmin <= rel_tol * lmin.abs();
            if last || converged {
                break;
            }
        }
        betas.push(beta);
        q = w.iter().map(|v| v / beta).collect();
    }
    result
}
