//! Closed forms checked against independently derived references.

use statrs::function::gamma::{gamma_lr, ln_gamma};

use spikefield::ldp::{quasi_potential_bounds, w_zero, LdpConfig};
use spikefield::meanfield::gamma_of_a;
use spikefield::meanfield::solve_pstar;
use spikefield::numeric::quad::{integrate, simpson};
use spikefield::rng::{Purpose, StreamKey};
use spikefield::stats::mean_se;
use spikefield::ModelParams;

fn reference() -> ModelParams {
    ModelParams::piecewise_linear(100, 1.0, 10.0, 1.0, 1.0).unwrap()
}

#[test]
fn cycle_time_matches_incomplete_gamma() {
    // λ* large enough that the rate never saturates below the support end
    for (alpha, k, a) in [(1.0, 1.0, 0.5), (1.0, 1.0, 2.0), (0.5, 2.0, 1.0), (2.0, 0.7, 3.0)] {
        let p = ModelParams::piecewise_linear(10, alpha, 1.0, k, 100.0).unwrap();
        let q: f64 = k * a / (alpha * alpha);
        let lower = gamma_lr(q, q) * ln_gamma(q).exp();
        let oracle = (q - q * q.ln()).exp() * lower / alpha;
        let got = gamma_of_a(a, &p, 1e-13).unwrap();
        assert!((got - oracle).abs() <= 1e-10 * oracle, "a = {a}: {got} vs {oracle}");
    }
}

#[test]
fn cycle_time_matches_power_substitution() {
    // with t = s^q the integral becomes (1/(α q)) ∫_0^1 e^{q(1 − t^{1/q})} dt
    let p = ModelParams::piecewise_linear(10, 1.0, 1.0, 1.0, 100.0).unwrap();
    for a in [0.3, 1.0, 5.0] {
        let q: f64 = a;
        let v = simpson(|t: f64| (q * (1.0 - t.powf(1.0 / q))).exp(), 0.0, 1.0, 1e-13, 50) / q;
        let got = gamma_of_a(a, &p, 1e-13).unwrap();
        assert!((got - v).abs() <= 1e-9 * v, "a = {a}: {got} vs {v}");
    }
    assert!((gamma_of_a(1.0, &p, 1e-13).unwrap() - (std::f64::consts::E - 1.0)).abs() < 1e-12);
}

/// Mean cycle time by nested quadrature of the survival function, without
/// any of the closed forms used by the library.
fn cycle_time_nested(a: f64, p: &ModelParams) -> f64 {
    let alpha = p.alpha;
    let rate_over_speed = |sigma: f64| p.lambda(a * (1.0 - sigma) / alpha) / (alpha * sigma);
    let survival = |s: f64| (-simpson(rate_over_speed, s, 1.0, 1e-12, 40)).exp();
    integrate(|s| survival(s) / s, 0.0, 1.0, 1e-12, 1e-11, 4000).value / alpha
}

#[test]
fn cycle_time_with_saturation_matches_nested_quadrature() {
    let p = reference();
    for a in [2.0, 5.0, 9.0] {
        let oracle = cycle_time_nested(a, &p);
        let got = gamma_of_a(a, &p, 1e-13).unwrap();
        assert!((got - oracle).abs() <= 1e-7 * oracle, "a = {a}: {got} vs {oracle}");
    }
}

#[test]
fn equilibrium_density_has_the_fixed_point_rate() {
    let p = reference();
    let t = solve_pstar(&p).unwrap();
    let end = t.support_end();
    let rate = integrate(|x| p.lambda(x) * t.density_at(x), 0.0, end, 1e-12, 1e-10, 20_000).value;
    assert!((rate - t.p_star).abs() <= 1e-6, "{rate} vs {}", t.p_star);
    assert!((p.h * t.p_star - t.a_star).abs() <= 1e-10);

    let mut rng = StreamKey::new(5, 0, Purpose::SYNTHETIC).rng();
    let rates: Vec<f64> = (0..200_000).map(|_| p.lambda(t.sample(&mut rng))).collect();
    let (m, se) = mean_se(&rates);
    assert!((m - t.p_star).abs() <= 4.0 * se, "{m} ± {se} vs {}", t.p_star);
}

#[test]
fn lower_bound_agrees_across_quadrature_schemes() {
    let cfg = LdpConfig::new(&reference(), 0.1).unwrap();
    let c = cfg.limit;
    let q = |u: f64| if u == 0.0 { 1.0 } else { u * u.ln() - u + 1.0 };
    let integrand = |z: f64| q(c.r / c.drift_g(z));
    let by_simpson = simpson(integrand, 0.1, c.x_inf, 1e-13, 50) / c.r;
    let b = quasi_potential_bounds(&cfg).unwrap();
    assert!((b.lower - by_simpson).abs() <= 1e-8, "{} vs {by_simpson}", b.lower);
    assert!(b.lower > 0.0);
    assert!((b.upper - 0.7).abs() < 1e-15);
}

#[test]
fn bounds_vanish_as_eta_approaches_equilibrium() {
    let cfg = LdpConfig::new(&reference(), 0.8 - 1e-6).unwrap();
    let b = quasi_potential_bounds(&cfg).unwrap();
    assert!(b.upper < 2e-6 && b.lower <= b.upper);
    assert!(LdpConfig::new(&reference(), 0.8).is_err());
}

#[test]
fn w_zero_reference_value_and_critical_limit() {
    let w = w_zero(&reference()).unwrap();
    let l9 = 9f64.ln();
    let direct = (8.0 - l9 - 0.5 * l9 * l9) / 10.0;
    assert!((w.closed_form - direct).abs() < 1e-15);
    assert!((w.closed_form - 0.33888776).abs() < 1e-8);
    assert!((w.quadrature - w.closed_form).abs() < 1e-8);

    // kh just above λ* + r
    let p = ModelParams::piecewise_linear(100, 1.0, 2.0 + 1e-3, 1.0, 1.0).unwrap();
    let w = w_zero(&p).unwrap();
    assert!(w.closed_form > 0.0 && w.closed_form < 1e-9);
    let sub = ModelParams::piecewise_linear(100, 1.0, 2.0, 1.0, 1.0).unwrap();
    assert!(w_zero(&sub).is_err());
}
