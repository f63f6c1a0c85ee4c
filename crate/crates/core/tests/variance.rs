mod common;

use common::*;
use crt::mechanisms::{KernelMode, MechanismSpec, Sign};
use crt::variance::{
    log_bessel_i0, optimal_a_oprf, optimal_lambda, optimize_a_complex, optimize_p, var_geom, var_gerf, var_pois,
    var_pos, var_trig, variance_of, PairStats,
};
use crt::RngState;
use ndarray::Array1;
use num_complex::Complex64;
use proptest::prelude::*;

fn stats(x: &Array1<f64>, y: &Array1<f64>) -> PairStats {
    PairStats::from_pair(x.view(), y.view()).unwrap()
}

fn random_pair(rng: &mut RngState, d: usize, scale: f64) -> PairStats {
    let x = gaussian_vec(rng, d, scale);
    let y = gaussian_vec(rng, d, scale);
    stats(&x, &y)
}

fn close_log(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn zero_a_matches_positive_and_trig(seed in any::<u64>(), d in 1usize..32, scale in 0.05f64..2.5) {
        let s = random_pair(&mut RngState::new(seed), d, scale);
        let zero = Complex64::new(0.0, 0.0);
        let plus = var_gerf(zero, Sign::Plus, &s).unwrap();
        let minus = var_gerf(zero, Sign::Minus, &s).unwrap();
        prop_assert!(close_log(plus.log_leading, var_pos(&s).log_leading, 1e-12));
        prop_assert!(close_log(minus.log_leading, var_trig(&s).log_leading, 1e-12));
    }

    #[test]
    fn variances_are_nonnegative(seed in any::<u64>(), d in 1usize..16, scale in 0.05f64..2.0) {
        let s = random_pair(&mut RngState::new(seed), d, scale);
        let lambda = optimal_lambda(&s).unwrap();
        let values = [
            var_trig(&s),
            var_pos(&s),
            var_gerf(Complex64::new(optimal_a_oprf(s.sq_norm_sum_plus, d).unwrap(), 0.0), Sign::Plus, &s).unwrap(),
            var_gerf(Complex64::new(-0.07, 0.11), Sign::Minus, &s).unwrap(),
            var_pois(lambda, &s).unwrap(),
            var_geom(optimize_p(&s), &s).unwrap(),
        ];
        for v in values {
            prop_assert!(v.variance() >= -1e-10 * v.leading());
        }
    }
}

#[test]
fn fixed_point_at_d64() {
    let x = Array1::from_elem(64, 0.625);
    let s = stats(&x, &x);
    let a = optimal_a_oprf(s.sq_norm_sum_plus, 64).unwrap();
    assert!((a + 0.4723638).abs() < 1e-6, "{a}");
    let oprf = var_gerf(Complex64::new(a, 0.0), Sign::Plus, &s).unwrap().log_variance();
    // Leading term e^{4 <x,y>} = e^100 dominates K^2 = 1.
    assert!((var_pos(&s).log_variance() - 100.0).abs() < 1e-12);
    assert!((oprf - 38.78).abs() < 0.01, "{oprf}");
}

#[test]
fn monte_carlo_matches_analytic_variance() {
    let mut rng = RngState::new(21);
    let x = gaussian_vec(&mut rng, 4, 0.3);
    let y = gaussian_vec(&mut rng, 4, 0.3);
    let s = stats(&x, &y);
    let a = optimal_a_oprf(s.sq_norm_sum_plus, 4).unwrap();
    for spec in [
        MechanismSpec::pos(KernelMode::Gaussian),
        MechanismSpec::trig(KernelMode::Gaussian),
        MechanismSpec::oprf(a, 4, KernelMode::Gaussian).unwrap(),
        MechanismSpec::pois(optimal_lambda(&s).unwrap(), KernelMode::Gaussian).unwrap(),
    ] {
        let empirical = merge_all(&mc_batches(x.view(), y.view(), &spec, 200, 2000, 22)).variance();
        let analytic = variance_of(&spec, &s).unwrap().variance();
        assert!(rel_close(empirical, analytic, 0.05), "{:?}: {empirical} vs {analytic}", spec.kind());
    }
}

#[test]
fn closed_form_a_beats_neighbouring_values() {
    let mut rng = RngState::new(23);
    for _ in 0..200 {
        let d = 1 + rng.index(64);
        let scale = 0.2 + rng.uniform();
        let s = random_pair(&mut rng, d, scale);
        let a = optimal_a_oprf(s.sq_norm_sum_plus, d).unwrap();
        assert!(a <= 0.0);
        let at = |a: f64| var_gerf(Complex64::new(a, 0.0), Sign::Plus, &s).unwrap().log_leading;
        let best = at(a);
        for k in 1..=50 {
            let step = 1e-3 * f64::from(k);
            for cand in [a - step, a + step] {
                if 1.0 - 8.0 * cand > 0.0 {
                    assert!(best <= at(cand) + 1e-12 * best.abs().max(1.0));
                }
            }
        }
    }
}

#[test]
fn oprf_advantage_grows_with_norm() {
    for d in [1usize, 8, 64, 256] {
        let mu = |z: f64| {
            let a = optimal_a_oprf(z, d).unwrap();
            let x = Array1::from_elem(d, (z / (4.0 * d as f64)).sqrt());
            let s = stats(&x, &x);
            var_gerf(Complex64::new(a, 0.0), Sign::Plus, &s).unwrap().log_variance() - var_pos(&s).log_variance()
        };
        let mut prev = mu(1.0);
        for i in 1..=199 {
            let cur = mu(1.0 + f64::from(i));
            assert!(cur < prev, "d = {d}, z = {}", 1 + i);
            prev = cur;
        }
    }
}

#[test]
fn bessel_oracles() {
    // Taylor series sum (t/2)^{2k} / k!^2.
    let series: f64 = (0..60).map(|k| (2.0 * f64::from(k) * 1.0f64.ln() - 2.0 * ln_factorial(k)).exp()).sum();
    let v = log_bessel_i0(2.0).unwrap();
    assert!((v - series.ln()).abs() < 1e-12);
    assert!((v - 2.2795853f64.ln()).abs() < 1e-7);
    let big = log_bessel_i0(700.0).unwrap();
    let asym = 700.0 - 0.5 * (1400.0 * std::f64::consts::PI).ln();
    assert!(big.is_finite() && (big - asym).abs() < 1e-3, "{big}");
    assert_eq!(log_bessel_i0(0.0).unwrap(), 0.0);
    assert!(log_bessel_i0(-1.0).is_err());
}

#[test]
fn optimized_p_dominates_grid() {
    let mut rng = RngState::new(24);
    for _ in 0..50 {
        let d = 1 + rng.index(16);
        let scale = 0.3 + rng.uniform();
        let s = random_pair(&mut rng, d, scale);
        let p = optimize_p(&s);
        let best = var_geom(p, &s).unwrap().log_leading;
        for i in 1..1000 {
            let q = f64::from(i) / 1000.0;
            assert!(best <= var_geom(q, &s).unwrap().log_leading + 1e-9 * best.abs().max(1.0));
        }
    }
}

#[test]
fn optimal_lambda_is_a_local_minimum() {
    let mut rng = RngState::new(25);
    for _ in 0..100 {
        let d = 1 + rng.index(32);
        let scale = 0.2 + rng.uniform();
        let s = random_pair(&mut rng, d, scale);
        let l = optimal_lambda(&s).unwrap();
        let best = var_pois(l, &s).unwrap().log_leading;
        for f in [0.9, 1.1] {
            assert!(best < var_pois(l * f, &s).unwrap().log_leading);
        }
    }
}

#[test]
fn complex_search_is_no_worse_than_closed_form() {
    let mut rng = RngState::new(26);
    for _ in 0..50 {
        let d = 1 + rng.index(64);
        let scale = 0.2 + rng.uniform();
        let s = random_pair(&mut rng, d, scale);
        let a = optimal_a_oprf(s.sq_norm_sum_plus, d).unwrap();
        let closed = var_gerf(Complex64::new(a, 0.0), Sign::Plus, &s).unwrap().log_leading;
        let found = optimize_a_complex(&s);
        // Ratio of leading terms at most 1.001.
        assert!(found.variance.log_leading <= closed + 1.001f64.ln(), "{} vs {closed}", found.variance.log_leading);
    }
}

#[test]
fn worked_discrete_examples() {
    // d = 1, x = y = 1, lambda = 1: e^{1 + 1 - 2} - 1 = 0.
    let one = Array1::from_elem(1, 1.0);
    let s = stats(&one, &one);
    assert!(var_pois(1.0, &s).unwrap().variance().abs() < 1e-15);
    // lambda = 2: e^{2 + 1/2 - 2} - 1.
    assert!(rel_close(var_pois(2.0, &s).unwrap().variance(), 0.5f64.exp() - 1.0, 1e-14));
    // Geometric, d = 1: e^{-2} I0(2 / sqrt(1 - p)) / p - 1.
    let p = 0.5;
    let want = (-2.0 + log_bessel_i0(2.0 / (1.0 - p as f64).sqrt()).unwrap()).exp() / p - 1.0;
    assert!(rel_close(var_geom(p, &s).unwrap().variance(), want, 1e-12));
}

#[test]
fn geometric_variance_matches_series() {
    let mut rng = RngState::new(27);
    for _ in 0..20 {
        let x = uniform_vec(&mut rng, 1, -1.5, 1.5);
        let y = uniform_vec(&mut rng, 1, -1.5, 1.5);
        let p = 0.2 + 0.6 * rng.uniform();
        let v = x[0] * y[0];
        // E f^2 f^2 = e^{-x^2-y^2} sum_k v^{2k} / (k!^2 p_k).
        let second: f64 = (0..=120u32)
            .map(|k| {
                let log_pk = p.ln() + f64::from(k) * (1.0 - p).ln();
                (2.0 * f64::from(k) * v.abs().ln() - 2.0 * ln_factorial(k) - log_pk).exp()
            })
            .sum::<f64>()
            * (-x[0] * x[0] - y[0] * y[0]).exp();
        let brute = second - gaussian_kernel(x.view(), y.view()).powi(2);
        let got = var_geom(p, &stats(&x, &y)).unwrap().variance();
        assert!(rel_close(got, brute, 1e-9), "{got} vs {brute}");
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let s = stats(&Array1::from_elem(2, 0.5), &Array1::from_elem(2, 0.1));
    assert!(var_gerf(Complex64::new(0.2, 0.0), Sign::Plus, &s).is_err());
    assert!(var_pois(0.0, &s).is_err());
    assert!(var_geom(1.0, &s).is_err());
    assert!(PairStats::from_pair(Array1::zeros(2).view(), Array1::zeros(3).view()).is_err());
}
