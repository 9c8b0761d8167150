use approx::assert_relative_eq;
use hwr_core::quadrature::CompositeRule;
use hwr_core::wavelet::{anova_class, IndexSet, Subset, WaveletIndex, WaveletKernel};
use proptest::prelude::*;

#[test]
fn index_set_sizes() {
    assert_eq!(IndexSet::full(1, 3, 1).unwrap().len(), 16);
    assert_eq!(IndexSet::full(3, 3, 3).unwrap().len(), 304);
    assert_eq!(IndexSet::full(2, 0, 2).unwrap().len(), 4);
    // terms are ordered by cardinality, then lexicographically
    let names: Vec<String> = IndexSet::full(3, 1, 2).unwrap().subsets().iter().map(ToString::to_string).collect();
    assert_eq!(names, ["{}", "{1}", "{2}", "{3}", "{1,2}", "{1,3}", "{2,3}"]);
}

#[test]
fn subset_syntax() {
    let u: Subset = "{1,5}".parse().unwrap();
    assert_eq!(u.coords(), &[0, 4]);
    assert_eq!(u.to_string(), "{1,5}");
    assert!("∅".parse::<Subset>().unwrap().is_empty());
    assert!("{0}".parse::<Subset>().is_err());
    assert_eq!("1,2".parse::<Subset>().unwrap().to_string(), "{1,2}");
    assert!("{a}".parse::<Subset>().is_err());
    assert_eq!(anova_class(&[-1, 2, -1, 0]).to_string(), "{2,4}");
}

#[test]
fn explicit_terms_need_constant() {
    let u: Subset = "{1}".parse().unwrap();
    assert!(IndexSet::new(2, 3, &[u.clone()]).is_err());
    assert!(IndexSet::new(2, 3, &[Subset::empty(), u]).is_ok());
    assert!(IndexSet::new(2, 3, &[Subset::empty(), "{3}".parse().unwrap()]).is_err());
}

#[test]
fn periodized_wavelets_are_orthonormal_across_levels() {
    // same-level translates need not be orthogonal, different levels are
    let kernel = WaveletKernel::new(2).unwrap();
    let rule = CompositeRule::new(-0.5, 0.5, 256, 4);
    let ip = |a: (i32, u32), b: (i32, u32)| rule.integrate(|x| kernel.periodic(a.0, a.1, x) * kernel.periodic(b.0, b.1, x));
    assert_relative_eq!(ip((2, 1), (3, 5)), 0.0, epsilon = 1e-13);
    assert_relative_eq!(ip((0, 0), (4, 9)), 0.0, epsilon = 1e-13);
    assert_relative_eq!(ip((-1, 0), (3, 2)), 0.0, epsilon = 1e-13);
    assert!(ip((3, 1), (3, 2)).abs() > 1e-3);
}

proptest! {
    #[test]
    fn entry_and_column_are_inverse(d in 1usize..=3, n in 0u32..=4) {
        let idx = IndexSet::full(d, n, d).unwrap();
        for (col, e) in idx.entries().iter().enumerate() {
            prop_assert_eq!(idx.column_of(e), Some(col));
            prop_assert!(e.j.iter().filter(|&&j| j >= 0).map(|&j| j as u32).sum::<u32>() <= n);
        }
        prop_assert_eq!(idx.entries().len(), idx.len());
    }

    #[test]
    fn translation_covariance(m in 1i64..=4, j in 0i32..6, k in 0u32..64, x in -0.5f64..0.5) {
        let kernel = WaveletKernel::new(m).unwrap();
        let count = 1u32 << j;
        let k = k % count;
        let h = 1.0 / count as f64;
        let mut shifted = x + h;
        if shifted >= 0.5 {
            shifted -= 1.0;
        }
        let a = kernel.periodic(j, k, x);
        let b = kernel.periodic(j, (k + 1) % count, shifted);
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn tensor_basis_is_product(x in -0.5f64..0.5, y in -0.5f64..0.5) {
        let kernel = WaveletKernel::new(3).unwrap();
        let e = WaveletIndex { j: vec![2, -1], k: vec![3, 0] };
        prop_assert_eq!(kernel.eval_basis(&e, &[x, y]), kernel.periodic(2, 3, x));
    }
}
