//! Composite Gauss-Legendre quadrature.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// from the eigen-decomposition of the Jacobi matrix.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let k = i as f64;
        let b = k / (4.0 * k * k - 1.0).sqrt();
        jacobi[(i, i - 1)] = b;
        jacobi[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], 2.0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Fixed rule mapped onto equal cells of `[a, b]`.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, cells: usize, points: usize) -> Self {
        let (x, w) = gauss_legendre(points);
        let h = (b - a) / cells as f64;
        let mut nodes = Vec::with_capacity(cells * points);
        let mut weights = Vec::with_capacity(cells * points);
        for c in 0..cells {
            let mid = a + (c as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + 0.5 * h * xi);
                weights.push(0.5 * h * wi);
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_for_polynomials() {
        let (x, w) = gauss_legendre(4);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(6)).sum();
        assert_relative_eq!(s, 2.0 / 7.0, epsilon = 1e-14);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn composite_sine() {
        let r = CompositeRule::new(0.0, std::f64::consts::PI, 8, 6);
        assert_relative_eq!(r.integrate(f64::sin), 2.0, epsilon = 1e-12);
    }
}
