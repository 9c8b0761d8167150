use approx::assert_relative_eq;
use hwr_core::spline::{bspline, chui_wang_wavelet, psi_m, wavelet_autocorrelation};
use hwr_core::{Rational, Scalar};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

proptest! {
    // denominators coprime to 2 never land on a knot
    #[test]
    fn partition_of_unity(m in 1i64..=4, num in -40i64..40) {
        let b = bspline::<Rational>(m).unwrap();
        let x = r(num, 7);
        let s = (-10..=10).fold(Rational::zero(), |acc, k| acc + b.eval(&(x.clone() - r(k, 1))));
        prop_assert_eq!(s, Rational::one());
    }

    #[test]
    fn bspline_is_even(m in 1i64..=4, num in -200i64..200) {
        let b = bspline::<Rational>(m).unwrap();
        let x = r(num, 13);
        prop_assert_eq!(b.eval(&x), b.eval(&-x.clone()));
    }

    #[test]
    fn float_and_exact_agree(m in 1i64..=4, x in -1.0f64..8.0) {
        let psi = chui_wang_wavelet(m).unwrap();
        let exact = psi.eval(&Rational::from_float(x).unwrap()).to_f64();
        prop_assert!((psi.to_f64().eval_f64(x) - exact).abs() < 1e-12);
    }
}

#[test]
fn bspline_smoothness() {
    for m in 2..=4i64 {
        let b = bspline::<Rational>(m).unwrap();
        for order in 0..=(m as usize - 2) {
            assert!(b.derivative_jumps(order).iter().all(Zero::is_zero), "m={m} order={order}");
        }
        assert!(b.derivative_jumps(m as usize - 1).iter().any(|j| !j.is_zero()));
    }
}

#[test]
fn single_precision_bspline() {
    for m in 1..=4 {
        let b = bspline::<f32>(m).unwrap();
        assert_relative_eq!(b.integral(), 1.0f32, epsilon = 1e-6);
    }
}

#[test]
fn antiderivative_returns_wavelet() {
    for m in 1..=3i64 {
        let mut d = psi_m(m).unwrap();
        for _ in 0..m {
            d = d.derivative();
        }
        let psi = chui_wang_wavelet(m).unwrap();
        for i in 0..(4 * (2 * m - 1)) {
            let x = r(2 * i + 1, 8);
            assert_eq!(d.eval(&x), psi.eval(&x), "m={m}");
        }
    }
}

#[test]
fn wavelet_support_and_norm() {
    // Haar: unit norm and orthogonal translates
    let a1 = wavelet_autocorrelation(1).unwrap();
    assert_eq!(a1, vec![Rational::one()]);
    for m in 1..=4i64 {
        let psi = chui_wang_wavelet(m).unwrap();
        assert_eq!(psi.support(), Some((Rational::zero(), r(2 * m - 1, 1))));
        let a = wavelet_autocorrelation(m).unwrap();
        assert_eq!(a.len() as i64, 2 * m - 1);
        assert_eq!(a[0], psi.mul(&psi).integral());
    }
}
