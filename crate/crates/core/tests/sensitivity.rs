use approx::assert_relative_eq;
use hwr_core::density::{Density, Transform1D};
use hwr_core::quadrature::CompositeRule;
use hwr_core::regression::{DimTransform, EtaPolicy, RegressionModel, TorusCoords};
use hwr_core::sensitivity::{gsi, term_variance, SensitivityError};
use hwr_core::{IndexSet, Subset};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn torus_model(d: usize, n: u32, m: u32, coeffs: impl FnMut(usize) -> f64) -> RegressionModel {
    let idx = IndexSet::full(d, n, d).unwrap();
    let a = (0..idx.len()).map(coeffs).collect();
    let t = (0..d).map(|_| DimTransform::Known(Transform1D::new(Density::TorusUniform))).collect();
    RegressionModel::from_parts(m, idx, t, EtaPolicy::PerTerm, a).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    // the composite rule has cells aligned with the finest dyadic grid, so it
    // integrates the squared piecewise polynomial exactly
    #[test]
    fn one_dimensional_variance_is_exact(m in 1u32..=4, n in 0u32..=5, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<f64> = (0..(1usize << (n + 1))).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut model = torus_model(1, n, m, |i| coeffs[i]);
        let constant = model.constant();
        let rule = CompositeRule::new(-0.5, 0.5, 1 << (n + 1), m as usize + 1);
        let points: Vec<Vec<f64>> = rule.nodes.iter().map(|&x| vec![x]).collect();
        let values = model.predict_coords(&TorusCoords::single(&points, model.index_set()).unwrap());
        let quad: f64 = values.iter().zip(&rule.weights).map(|(v, w)| w * (v - constant).powi(2)).sum();
        let u: Subset = "{1}".parse().unwrap();
        let exact = term_variance(&model, &u).unwrap();
        prop_assert!((exact - quad).abs() < 1e-12 * (1.0 + quad));
        model = torus_model(1, n, m, |i| if i == 0 { 1.0 } else { coeffs[i] });
        prop_assert!((term_variance(&model, &u).unwrap() - quad).abs() < 1e-12 * (1.0 + quad));
    }

    #[test]
    fn indices_sum_to_one(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = torus_model(3, 3, 2, |_| rng.random::<f64>() - 0.5);
        let report = gsi(&model, 0.05).unwrap();
        let s: f64 = report.terms.iter().map(|t| t.gsi).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        prop_assert!(report.terms.iter().all(|t| t.variance >= 0.0));
        prop_assert_eq!(report.active_set[0].clone(), Subset::empty());
    }
}

#[test]
fn product_term_variance() {
    // a_{(j1,k1),(j2,k2)} on a single tensor basis function: the variance is
    // the product of the one-dimensional squared norms
    let idx = IndexSet::full(2, 4, 2).unwrap();
    let e = hwr_core::wavelet::WaveletIndex { j: vec![2, 1], k: vec![1, 0] };
    let col = idx.column_of(&e).unwrap();
    let model = torus_model(2, 4, 2, |i| if i == col { 1.0 } else { 0.0 });
    let one_d = |j: i32, k: u32| {
        let kernel = model.kernel();
        CompositeRule::new(-0.5, 0.5, 64, 3).integrate(|x| kernel.periodic(j, k, x).powi(2))
    };
    let u: Subset = "{1,2}".parse().unwrap();
    assert_relative_eq!(term_variance(&model, &u).unwrap(), one_d(2, 1) * one_d(1, 0), epsilon = 1e-13);
    assert_eq!(term_variance(&model, &"{1}".parse().unwrap()).unwrap(), 0.0);
    let report = gsi(&model, 0.5).unwrap();
    assert_eq!(report.active_set, vec![Subset::empty(), u.clone()]);
    assert_relative_eq!(report.get(&u).unwrap().gsi, 1.0);
}

#[test]
fn errors_and_csv() {
    let model = torus_model(2, 2, 2, |i| i as f64);
    assert!(matches!(term_variance(&model, &Subset::empty()), Err(SensitivityError::ConstantTerm)));
    assert!(term_variance(&model, &"{3}".parse().unwrap()).is_err());
    let flat = torus_model(2, 2, 2, |i| if i == 0 { 1.0 } else { 0.0 });
    assert!(matches!(gsi(&flat, 0.1), Err(SensitivityError::DegenerateFunction)));
    let csv = gsi(&model, 0.1).unwrap().to_csv();
    assert!(csv.starts_with("u,variance,gsi,active\n"));
    assert_eq!(csv.lines().count(), 4);
}
