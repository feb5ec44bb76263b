use multiess::special::{gamma_p, log_gamma, quantile, DistSpec};
use proptest::prelude::*;

/// Composite Simpson rule.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Stirling series after shifting the argument past 30.
fn log_gamma_stirling(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut z = x;
    while z < 30.0 {
        shift += z.ln();
        z += 1.0;
    }
    let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z.powi(3)) + 1.0 / (1260.0 * z.powi(5)) - 1.0 / (1680.0 * z.powi(7));
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series - shift
}

#[test]
fn chi2_quantile_matches_numeric_integration() {
    let q = quantile(DistSpec::chi2(5.0), 0.95).unwrap();
    assert!((q - 11.0705).abs() < 1e-3, "{q}");
    // the chi-square(5) density integrated from 0 to q
    let pdf = |x: f64| x.powf(1.5) * (-x / 2.0).exp() / (2f64.powf(2.5) * 1.329_340_388_179_137);
    let mass = simpson(pdf, 0.0, q, 20_000);
    assert!((mass - 0.95).abs() < 1e-8, "{mass}");
    assert!((q - 11.070_497_693_516_351).abs() < 1e-9);
}

#[test]
fn log_gamma_against_stirling() {
    for x in [0.3, 1.7, 2.5, 10.3, 47.0, 171.5] {
        let got = log_gamma(x).unwrap();
        let want = log_gamma_stirling(x);
        assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "x = {x}: {got} vs {want}");
    }
    for x in [1e3, 1e5, 1e6] {
        let got = log_gamma(x).unwrap();
        let want = log_gamma_stirling(x);
        assert!(((got - want) / want).abs() < 1e-13, "x = {x}");
    }
    assert!(log_gamma(1.0).unwrap().abs() < 1e-14);
    assert!(log_gamma(2.0).unwrap().abs() < 1e-14);
    assert!((log_gamma(0.5).unwrap() - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-14);
    assert!(log_gamma(0.0).is_err());
    assert!(log_gamma(-1.5).is_err());
}

#[test]
fn f_one_dof_is_squared_t() {
    for q in [3.0, 10.0, 57.0, 999.0] {
        for alpha in [0.1, 0.05, 0.01] {
            let f = quantile(DistSpec::f(1.0, q), 1.0 - alpha).unwrap();
            let t = quantile(DistSpec::student_t(q), 1.0 - alpha / 2.0).unwrap();
            assert!((f - t * t).abs() < 1e-8 * f, "q = {q}, alpha = {alpha}");
        }
    }
}

#[test]
fn t_quantile_reference_values() {
    let t = quantile(DistSpec::student_t(1e6), 0.975).unwrap();
    assert!((t - 1.959_966_356_814_106_6).abs() < 1e-9, "{t}");
    // Cauchy
    let c = quantile(DistSpec::student_t(1.0), 0.9).unwrap();
    assert!((c - (0.4 * std::f64::consts::PI).tan()).abs() < 1e-10);
    let lo = quantile(DistSpec::student_t(7.0), 0.1).unwrap();
    let hi = quantile(DistSpec::student_t(7.0), 0.9).unwrap();
    assert!((lo + hi).abs() < 1e-12);
}

#[test]
fn quantiles_increase_with_level() {
    for dist in [DistSpec::chi2(3.0), DistSpec::f(4.0, 20.0), DistSpec::student_t(5.0)] {
        let mut last = f64::NEG_INFINITY;
        for k in 1..100 {
            let q = quantile(dist, k as f64 / 100.0).unwrap();
            assert!(q > last, "{dist:?} at {k}");
            last = q;
        }
    }
}

#[test]
fn scaled_f_tends_to_chi2() {
    let chi = quantile(DistSpec::chi2(5.0), 0.9).unwrap();
    let mut last_gap = f64::INFINITY;
    for m in [10.0, 100.0, 1e4, 1e6] {
        let scaled = 5.0 * quantile(DistSpec::f(5.0, m), 0.9).unwrap();
        let gap = (scaled - chi).abs();
        assert!(gap < last_gap);
        last_gap = gap;
    }
    assert!(last_gap / chi < 1e-5);
}

#[test]
fn exponential_special_case() {
    // chi-square with 2 dof is exponential with mean 2
    for x in [0.1, 1.0, 5.0, 30.0] {
        let cdf = DistSpec::chi2(2.0).cdf(x);
        assert!((cdf - (1.0 - (-x / 2.0).exp())).abs() < 1e-14);
    }
    assert!((gamma_p(1.0, 3.0) - (1.0 - (-3.0f64).exp())).abs() < 1e-14);
}

#[test]
fn invalid_arguments_are_domain_errors() {
    assert!(quantile(DistSpec::chi2(0.0), 0.5).is_err());
    assert!(quantile(DistSpec::chi2(3.0), 0.0).is_err());
    assert!(quantile(DistSpec::chi2(3.0), 1.0).is_err());
    assert!(quantile(DistSpec::f(-1.0, 3.0), 0.5).is_err());
    assert!(quantile(DistSpec::student_t(f64::NAN), 0.5).is_err());
}

proptest! {
    #[test]
    fn cdf_inverts_quantile(level in 0.001f64..0.999, dof in 0.5f64..200.0, d2 in 1.0f64..500.0) {
        for dist in [DistSpec::chi2(dof), DistSpec::f(dof, d2), DistSpec::student_t(dof)] {
            let q = quantile(dist, level).unwrap();
            prop_assert!((dist.cdf(q) - level).abs() < 1e-9, "{:?} level {}", dist, level);
        }
    }
}
