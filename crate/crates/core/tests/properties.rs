use proptest::prelude::*;

use spikefield::engine::integrated::{invert_integrated_rate, pl_integrated};
use spikefield::engine::sim::{Backend, Simulator};
use spikefield::engine::state::{SpikeEvent, SystemState};
use spikefield::ldp::{entropy_q, hamiltonian, quasi_potential_bounds, rate_l, w_zero, LdpConfig};
use spikefield::meanfield::w1_empirical;
use spikefield::metastab::{ExitEnsembleReport, ExitSample};
use spikefield::model::{classify_ab, RateSpec};
use spikefield::rng::{Purpose, StreamKey};
use spikefield::stats::ks_exp1;
use spikefield::ModelParams;

fn pl(n: usize, alpha: f64, h: f64, k: f64, ls: f64) -> ModelParams {
    ModelParams::piecewise_linear(n, alpha, h, k, ls).unwrap()
}

/// Supercritical piecewise-linear parameters with `kh > λ* + α`.
fn supercritical() -> impl Strategy<Value = ModelParams> {
    (0.2f64..3.0, 0.2f64..3.0, 0.2f64..3.0, 1.2f64..20.0).prop_map(|(alpha, k, ls, excess)| {
        let h = excess * (ls + alpha) / k;
        pl(100, alpha, h, k, ls)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rates_are_lipschitz(u in 0.0f64..20.0, v in 0.0f64..20.0, s in 0.1f64..5.0, ls in 0.1f64..5.0) {
        for rate in [RateSpec::piecewise_linear(s, ls), RateSpec::tanh(s, ls, 1.0)] {
            let d = (rate.eval(u) - rate.eval(v)).abs();
            prop_assert!(d <= rate.lip() * (u - v).abs() * (1.0 + 1e-12) + 1e-15);
            prop_assert!(rate.eval(u) <= rate.lambda_star() + 1e-15);
        }
    }

    #[test]
    fn regions_are_nested(a in 0.0f64..1.5, b in 0.0f64..1.5) {
        let f = classify_ab(a, b).flags;
        if f.exit_condition {
            prop_assert!(f.contraction_condition);
        }
        if f.contraction_condition {
            prop_assert!(f.exponential_extinction && f.delta0_unstable);
        }
        prop_assert!(!(f.delta0_unique_attractive && f.delta0_unstable));
    }

    #[test]
    fn regime_depends_on_a_and_b_only(alpha in 0.1f64..3.0, h in 0.5f64..50.0, k in 0.1f64..3.0, ls in 0.1f64..3.0, c in 0.2f64..5.0) {
        let p = pl(10, alpha, h, k, ls);
        let q = pl(10, c * alpha, h, c * k, c * ls);
        prop_assert!((p.a() - q.a()).abs() <= 1e-12 * p.a());
        prop_assert!((p.b() - q.b()).abs() <= 1e-12 * p.b());
        prop_assert_eq!(classify_ab(p.a(), p.b()).flags, classify_ab(q.a(), q.b()).flags);
    }

    #[test]
    fn spikes_move_the_prescribed_mass(u in prop::collection::vec(0.0f64..5.0, 2..40), pick in 0usize..1000, h in 0.1f64..20.0) {
        let n = u.len();
        let p = pl(n, 1.0, h, 1.0, 1.0);
        let i = pick % n;
        let mut s = SystemState::new(u.clone(), &p).unwrap();
        let before: f64 = s.u.iter().sum();
        s.fire(i, &p);
        let after: f64 = s.u.iter().sum();
        let expected = before - u[i] + h * (n - 1) as f64 / n as f64;
        prop_assert!((after - expected).abs() <= 1e-12 * (1.0 + before + h));
        prop_assert_eq!(s.u[i], 0.0);
    }

    #[test]
    fn inversion_hits_the_target_mark(u in prop::collection::vec(0.0f64..4.0, 1..20), e in 0.0f64..30.0, k in 0.2f64..3.0, ls in 0.2f64..3.0) {
        let p = pl(u.len(), 1.0, 1.0, k, ls);
        if let Some(inv) = invert_integrated_rate(&u, e, &p).unwrap() {
            let total: f64 = u.iter().map(|&x| pl_integrated(x, inv.tau, k, ls, 1.0)).sum();
            prop_assert!((total - e).abs() <= 1e-12 * e.max(1.0) * 10.0);
        } else {
            let residual: f64 = u.iter().map(|&x| pl_integrated(x, f64::INFINITY, k, ls, 1.0)).sum();
            prop_assert!(e >= residual * (1.0 - 1e-12));
        }
    }

    #[test]
    fn q_is_convex_and_vanishes_only_at_one(u in 0.0f64..10.0, h in 1e-3f64..0.5) {
        let q = entropy_q(u).unwrap();
        prop_assert!(q >= 0.0);
        if (u - 1.0).abs() > 1e-6 {
            prop_assert!(q > 0.0);
        }
        if u >= h {
            let second = entropy_q(u + h).unwrap() - 2.0 * q + entropy_q(u - h).unwrap();
            prop_assert!(second >= -1e-12);
        }
    }

    #[test]
    fn legendre_consistency(p in supercritical(), frac in 0.05f64..0.95, mom in -1.0f64..1.0) {
        let cfg = LdpConfig::new(&p, 0.05 * (LdpConfig::new(&p, 1e-9).unwrap().limit.x_inf)).unwrap();
        let c = cfg.limit;
        let x = c.eta + frac * (c.z_inf - c.eta);
        let g = c.drift_g(x);
        prop_assume!(g > 0.0);
        let q_star = -c.r * x + g * c.clamp_f(x) * (g * mom).exp();
        let lhs = mom * q_star - hamiltonian(x, mom, &cfg);
        let rhs = rate_l(x, q_star, &cfg);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn rate_is_convex_in_velocity(p in supercritical(), frac in 0.05f64..0.95, q1 in 0.0f64..5.0, q2 in 0.0f64..5.0, w in 0.0f64..1.0) {
        let cfg = LdpConfig::new(&p, 0.05 * LdpConfig::new(&p, 1e-9).unwrap().limit.x_inf).unwrap();
        let c = cfg.limit;
        let x = c.eta + frac * (c.z_inf - c.eta);
        let (a, b) = (q1 - c.r * x, q2 - c.r * x);
        let mid = rate_l(x, w * a + (1.0 - w) * b, &cfg);
        let chord = w * rate_l(x, a, &cfg) + (1.0 - w) * rate_l(x, b, &cfg);
        prop_assert!(mid <= chord + 1e-12 * (1.0 + chord));
    }

    #[test]
    fn wasserstein_is_a_metric(a in prop::collection::vec(0.0f64..5.0, 1..30), b in prop::collection::vec(0.0f64..5.0, 1..30), c in prop::collection::vec(0.0f64..5.0, 1..30)) {
        let ab = w1_empirical(&a, &b).unwrap();
        prop_assert!((ab - w1_empirical(&b, &a).unwrap()).abs() <= 1e-12);
        prop_assert!(w1_empirical(&a, &a).unwrap() <= 1e-12);
        let ac = w1_empirical(&a, &c).unwrap();
        let cb = w1_empirical(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn ks_matches_its_defining_formula(xs in prop::collection::vec(0.0f64..8.0, 1..60)) {
        let mut v = xs.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let brute = v.iter().enumerate().map(|(i, &t)| {
            let f = 1.0 - (-t).exp();
            ((i + 1) as f64 / n - f).abs().max((i as f64 / n - f).abs())
        }).fold(0.0, f64::max);
        let ks = ks_exp1(&xs).unwrap();
        prop_assert!((ks - brute).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ks));
    }

    #[test]
    fn mean_ratio_matrix_is_reciprocal(groups in prop::collection::vec(prop::collection::vec(0.01f64..10.0, 2..20), 1..5)) {
        let samples: Vec<ExitSample> = groups.iter().enumerate().flat_map(|(id, g)| {
            g.iter().enumerate().map(move |(r, &tau)| ExitSample { tau, replica: r as u64, init_id: id, lambda_bar: 0.0, events: 0, truncated: false })
        }).collect();
        let rep = ExitEnsembleReport::from_samples(samples).unwrap();
        for i in 0..groups.len() {
            prop_assert!((rep.mean_ratio[i][i] - 1.0).abs() <= 1e-15);
            for j in 0..groups.len() {
                prop_assert!((rep.mean_ratio[i][j] * rep.mean_ratio[j][i] - 1.0).abs() <= 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn quasi_potential_bounds_are_ordered(p in supercritical(), frac in 0.01f64..0.99) {
        let x_inf = LdpConfig::new(&p, 1e-9).unwrap().limit.x_inf;
        let cfg = LdpConfig::new(&p, frac * x_inf).unwrap();
        let b = quasi_potential_bounds(&cfg).unwrap();
        prop_assert!(b.lower > 0.0 && b.lower <= b.upper);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn w_zero_matches_its_integral(p in supercritical()) {
        let w = w_zero(&p).unwrap();
        prop_assert!(w.closed_form > 0.0);
        prop_assert!((w.closed_form - w.quadrature).abs() <= 1e-8, "{:?}", w);
    }

    #[test]
    fn equal_seeds_replay_identically(seed in any::<u64>(), n in 2usize..30) {
        let p = pl(n, 1.0, 5.0, 1.0, 1.0);
        let run = || {
            let s = SystemState::new(vec![1.0; n], &p).unwrap();
            let mut sim = Simulator::new(&p, s, Backend::Thinning, &StreamKey::new(seed, 0, Purpose::NOISE)).unwrap();
            let mut ev: Vec<SpikeEvent> = Vec::new();
            sim.run(5.0, 100_000, |e, _| ev.push(*e));
            (ev, sim.state.u.clone())
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(a.0.len(), b.0.len());
        prop_assert!(a.0.iter().zip(&b.0).all(|(x, y)| x.t.to_bits() == y.t.to_bits() && x.neuron == y.neuron));
        prop_assert!(a.1.iter().zip(&b.1).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
