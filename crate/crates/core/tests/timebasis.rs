mod common;

use common::{poly, quad};
use proptest::prelude::*;
use reynolds_core::timebasis::{GaussianRational, TimePoly};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// `y = int_0^t e^{-q(t-s)} x(s) ds` solves `y' + q y = x`, `y(0) = 0`.
    #[test]
    fn heat_convolution_solves_its_equation(x in poly(), q in 1u32..7) {
        let y = x.heat_convolve(q);
        prop_assert_eq!(&y.derivative() + &y.scale_int(q as i64), x.clone());
        let at0: GaussianRational = y.terms().filter(|(e, _)| e.0 == 0).fold(GaussianRational::zero(), |acc, (_, c)| &acc + c);
        prop_assert!(at0.is_zero());
    }

    #[test]
    fn heat_convolution_matches_quadrature(x in poly(), q in 1u32..7, t in 0.05f64..3.0) {
        let y = x.heat_convolve(q).eval_f64(t, 128);
        let (re, im) = quad(t, |s| {
            let (a, b) = x.eval_f64(s, 128);
            let k = (-(q as f64) * (t - s)).exp();
            (a * k, b * k)
        });
        let scale = quad(t, |s| {
            let (a, b) = x.eval_f64(s, 128);
            ((a * a + b * b).sqrt() * (-(q as f64) * (t - s)).exp(), 0.0)
        }).0.max(1e-300);
        prop_assert!((y.0 - re).abs() <= 1e-12 * scale, "re {} vs {}", y.0, re);
        prop_assert!((y.1 - im).abs() <= 1e-12 * scale, "im {} vs {}", y.1, im);
    }

    #[test]
    fn convolution_is_linear(x in poly(), z in poly(), q in 1u32..7) {
        prop_assert_eq!((&x + &z).heat_convolve(q), &x.heat_convolve(q) + &z.heat_convolve(q));
    }

    #[test]
    fn product_rule(x in poly(), z in poly()) {
        let lhs = (&x * &z).derivative();
        let rhs = &(&x.derivative() * &z) + &(&x * &z.derivative());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn text_round_trip(x in poly()) {
        prop_assert_eq!(TimePoly::from_text(&x.to_text()).unwrap(), x);
    }
}
