//! Transformed hyperbolic wavelet regression.
//!
//! Samples from a product density on `Ω ⊂ ℝ^d` are mapped to the torus
//! `[-1/2, 1/2)^d` by their (known or kernel-estimated) cumulative
//! distribution functions. A function is then approximated there by periodized
//! Chui-Wang spline wavelets on a hyperbolic index set restricted to selected
//! ANOVA terms. Coefficients are found by LSQR, and sensitivity indices follow
//! from the coefficients.
//!
//! The piecewise-polynomial layer is generic over [`Scalar`] and runs in exact
//! rational arithmetic as well as `f32`/`f64`. The linear algebra is generic
//! over `num_traits::Float`. The statistical layers use `f64`.

pub mod scalar;
pub mod spline;
pub mod quadrature;
pub mod wavelet;
pub mod density;
pub mod kde;
pub mod operator;
pub mod lsqr;
pub mod spectrum;
pub mod regression;
pub mod sensitivity;
pub mod experiment;

pub use density::{Density, DomainKind, Transform1D};
pub use regression::{fit, FitOptions, RegressionModel, TransformPlan};
pub use scalar::Scalar;
pub use wavelet::{IndexSet, Subset, WaveletKernel};

pub type Rational = num_rational::BigRational;
pub type ExactPoly = spline::PiecewisePolynomial<Rational>;
pub type Poly = spline::PiecewisePolynomial<f64>;
pub type Poly32 = spline::PiecewisePolynomial<f32>;
pub type DesignMatrix = operator::SparseDesignMatrix<f64>;
