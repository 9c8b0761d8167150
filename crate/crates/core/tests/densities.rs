use approx::assert_relative_eq;
use hwr_core::density::{default_eta, Density, DomainKind, ProductTransform, TabulatedDensity, Transform1D};
use hwr_core::quadrature::CompositeRule;
use proptest::prelude::*;

fn catalogue() -> Vec<Density> {
    vec![
        Density::Normal,
        Density::Cauchy,
        Density::Laplace,
        Density::beta(0.5).unwrap(),
        Density::beta(3.0).unwrap(),
        Density::beta(1.7).unwrap(),
        Density::Exponential,
        Density::GaussMixture,
        Density::Uniform,
        Density::TorusUniform,
    ]
}

proptest! {
    #[test]
    fn roundtrip(i in 0usize..10, u in 0.001f64..0.999) {
        let d = catalogue()[i].clone();
        let eta = if d.domain() == DomainKind::UnitInterval { 0.125 } else { 0.0 };
        let t = Transform1D::with_eta(d, eta).unwrap();
        let x = -0.5 + eta + (1.0 - eta) * u;
        prop_assert!((t.transform(t.inverse(x).unwrap()).unwrap() - x).abs() < 1e-10);
    }

    #[test]
    fn transform_is_monotone(i in 0usize..10, a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let d = catalogue()[i].clone();
        let (lo, hi) = (a.min(b), a.max(b));
        let ya = d.quantile(lo).unwrap();
        let yb = d.quantile(hi).unwrap();
        let t = Transform1D::new(d);
        prop_assert!(t.transform(ya).unwrap() <= t.transform(yb).unwrap() + 1e-15);
    }
}

#[test]
fn cdf_matches_integrated_pdf() {
    for d in catalogue() {
        let (a, _) = d.support();
        let lo = a.max(-40.0);
        for p in [0.1, 0.37, 0.5, 0.8] {
            let y = d.quantile(p).unwrap();
            if d.domain() == DomainKind::UnitInterval && matches!(d, Density::Beta { alpha } if alpha < 1.0) {
                continue;
            }
            let rule = CompositeRule::new(lo, y, 4000, 8);
            let mass = rule.integrate(|t| d.pdf(t)) + d.cdf(lo);
            assert_relative_eq!(mass, p, epsilon = 1e-7);
        }
    }
}

#[test]
fn extension_parameter() {
    assert_eq!(default_eta(2, 2, 1), 1.0 / 8.0);
    assert_eq!(default_eta(3, 4, 2), 2.0 / 8.0);
    assert_eq!(default_eta(1, 5, 1), 0.0);
    let t = Transform1D::with_eta(Density::Uniform, 0.25).unwrap();
    assert_relative_eq!(t.transform(0.0).unwrap(), -0.25);
    assert_relative_eq!(t.transform(1.0).unwrap(), 0.5);
    assert!(t.transform(1.5).is_err());
}

#[test]
fn tabulated_density_from_csv() {
    let path = std::env::temp_dir().join(format!("hwr-tab-{}.csv", std::process::id()));
    std::fs::write(&path, "y,rho\n0,0\n0.5,2\n1,0\n").unwrap();
    let tab = TabulatedDensity::from_csv(DomainKind::UnitInterval, &path).unwrap();
    std::fs::remove_file(&path).ok();
    let d = Density::Tabulated(tab);
    assert_relative_eq!(d.pdf(0.25), 2.0 * 0.5 * 2.0 / 1.0 * 0.5, epsilon = 1e-12);
    assert_relative_eq!(d.cdf(0.5), 0.5, epsilon = 1e-12);
    assert_relative_eq!(d.quantile(0.125).unwrap(), 0.25, epsilon = 1e-10);
    assert!(TabulatedDensity::new(DomainKind::RealLine, vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
}

#[test]
fn sampling_is_reproducible_and_streams_are_independent() {
    let p = ProductTransform::new(vec![Transform1D::new(Density::Normal), Transform1D::new(Density::Uniform)]);
    let a = p.sample(100, 9).unwrap();
    assert_eq!(a, p.sample(100, 9).unwrap());
    let test = p.sample_family(100, 9, 1).unwrap();
    assert!(a.iter().zip(&test).all(|(x, y)| x != y));
    // adding a dimension leaves the first column unchanged
    let wider = ProductTransform::new(vec![Transform1D::new(Density::Normal), Transform1D::new(Density::Uniform), Transform1D::new(Density::Cauchy)]);
    let b = wider.sample(100, 9).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x[..] == y[..2]));
    let mean: f64 = a.iter().map(|y| y[1]).sum::<f64>() / 100.0;
    assert!((mean - 0.5).abs() < 0.1);
}
