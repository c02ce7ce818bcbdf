use proptest::prelude::*;

use seqtest::dist::{
    beta_quantile, draw_std_normal, gauss_legendre, reg_inc_beta, std_normal_cdf, std_normal_quantile, sym_beta_cdf,
    sym_beta_quantile, QuadratureSpec, RandomStream,
};

proptest! {
    #[test]
    fn normal_quantile_inverts_cdf(p in 1e-12f64..(1.0 - 1e-12)) {
        let x = std_normal_quantile(p).unwrap();
        prop_assert!((std_normal_cdf(x) - p).abs() <= 1e-13 * p.max(1e-3));
    }

    #[test]
    fn normal_cdf_symmetry(x in -30.0f64..30.0) {
        prop_assert!((std_normal_cdf(x) + std_normal_cdf(-x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inc_beta_reflection(a in 0.1f64..60.0, b in 0.1f64..60.0, x in 0.0f64..=1.0) {
        let lhs = reg_inc_beta(a, b, x).unwrap();
        let rhs = 1.0 - reg_inc_beta(b, a, 1.0 - x).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn inc_beta_monotone(a in 0.1f64..60.0, b in 0.1f64..60.0, x in 0.0f64..1.0, dx in 0.0f64..0.5) {
        let y = (x + dx).min(1.0);
        prop_assert!(reg_inc_beta(a, b, x).unwrap() <= reg_inc_beta(a, b, y).unwrap() + 1e-15);
    }

    #[test]
    fn beta_quantile_round_trip(a in 0.5f64..60.0, b in 0.5f64..60.0, p in 1e-9f64..(1.0 - 1e-9)) {
        let w = beta_quantile(a, b, p).unwrap();
        prop_assert!((reg_inc_beta(a, b, w).unwrap() - p).abs() < 1e-10);
    }

    #[test]
    fn sym_beta_quantile_round_trip(h in 0.5f64..200.0, p in 1e-6f64..(1.0 - 1e-6)) {
        let q = sym_beta_quantile(h, p).unwrap();
        prop_assert!((-1.0..=1.0).contains(&q));
        prop_assert!((sym_beta_cdf(h, q).unwrap() - p).abs() < 1e-10);
        prop_assert!((sym_beta_cdf(h, -q).unwrap() - (1.0 - p)).abs() < 1e-10);
    }
}

#[test]
fn inc_beta_closed_forms() {
    // I_x(1, b) = 1 − (1 − x)^b and I_x(a, 1) = x^a
    for &x in &[0.0, 0.1, 0.5, 0.9, 1.0] {
        assert!((reg_inc_beta(1.0, 3.5, x).unwrap() - (1.0 - (1.0f64 - x).powf(3.5))).abs() < 1e-14);
        assert!((reg_inc_beta(2.5, 1.0, x).unwrap() - x.powf(2.5)).abs() < 1e-14);
    }
    // I_x(1/2, 1/2) = (2/π) asin √x
    let x: f64 = 0.3;
    assert!((reg_inc_beta(0.5, 0.5, x).unwrap() - 2.0 / std::f64::consts::PI * x.sqrt().asin()).abs() < 1e-14);
}

#[test]
fn domain_errors() {
    assert!(std_normal_quantile(0.0).is_err());
    assert!(std_normal_quantile(1.0).is_err());
    assert!(std_normal_quantile(f64::NAN).is_err());
    assert!(reg_inc_beta(-1.0, 2.0, 0.5).is_err());
    assert!(reg_inc_beta(1.0, 2.0, 1.5).is_err());
    assert!(QuadratureSpec::new(0).is_err());
}

#[test]
fn quadrature_exact_on_polynomials() {
    let spec = QuadratureSpec::new(8).unwrap();
    // an n-point rule integrates degree 2n − 1 exactly
    let v = gauss_legendre(|x| x.powi(15) + 3.0 * x.powi(2), -1.0, 2.0, spec);
    let exact = (2f64.powi(16) - 1.0) / 16.0 + (8.0 + 1.0);
    assert!((v - exact).abs() < 1e-10 * exact);
}

#[test]
fn streams_reproducible_and_distinct() {
    let a = draw_std_normal(RandomStream::new(5, 0), 100);
    let b = draw_std_normal(RandomStream::new(5, 0), 100);
    let c = draw_std_normal(RandomStream::new(5, 1), 100);
    let d = draw_std_normal(RandomStream::new(6, 0), 100);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_ne!(a, d);
    assert_ne!(RandomStream::new(5, 0).child(0), RandomStream::new(5, 0).child(1));
}
