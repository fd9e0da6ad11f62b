use forecast_lab_core::model::{
    attenuation_factor, classify_regime, decision_loss, exante_expected_loss, exante_objective, expected_mse,
    marginal_benefit, pm_weight, CostModel, ModelParams, PolicyStrengthDist, Regime, Setting,
};
use forecast_lab_core::scenario::Scenario;
use forecast_lab_core::solver::{default_grid_extent, grid_oracle, grid_step, solve, SolutionKind, DEFAULT_TOL};
use forecast_lab_core::statics::{
    certify_corollary1, certify_proposition1, certify_proposition3, ParamBox, DEFAULT_K_PROBES,
};
use proptest::prelude::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn precision() -> impl Strategy<Value = f64> {
    0.05f64..20.0
}

fn mu() -> impl Strategy<Value = f64> {
    -6.0f64..15.0
}

fn setting() -> impl Strategy<Value = Setting> {
    prop::sample::select(Setting::ALL.to_vec())
}

fn cost() -> impl Strategy<Value = CostModel> {
    prop_oneof![
        (0.005f64..2.0).prop_map(|c| CostModel::linear(c).unwrap()),
        (0.01f64..5.0).prop_map(|c| CostModel::quadratic(c).unwrap()),
        (0.01f64..2.0, 1.0f64..3.0).prop_map(|(c, p)| CostModel::power(c, p).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn objective_identity(t in precision(), h in precision(), mu in mu(), sigma2 in 0.0f64..4.0,
                          tau2 in 0.0f64..2.0, k in 0.0f64..50.0, cost in cost()) {
        let policy = PolicyStrengthDist::with_moments(mu, sigma2).unwrap();
        let params = ModelParams::new(t, h, tau2, policy).unwrap();
        let big_h = pm_weight(t, h).unwrap();
        let constants = big_h * big_h * sigma2 / t + big_h * big_h * (sigma2 + mu * mu) / h + tau2;
        let lhs = exante_objective(k, Setting::Opaque, mu, &params, &cost).unwrap() + constants;
        let rhs = exante_expected_loss(k, mu, sigma2, &params).unwrap() + cost.value(k);
        prop_assert!(close(lhs, rhs, 1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn zero_policy_reduces_to_no_intervention(t in precision(), h in precision(), tau2 in 0.0f64..2.0,
                                              k in 0.0f64..50.0, cost in cost()) {
        let params = ModelParams::new(t, h, tau2, PolicyStrengthDist::point_mass(0.0).unwrap()).unwrap();
        let o = |s| (
            decision_loss(k, s, 0.0, &params).unwrap().to_bits(),
            marginal_benefit(k, s, 0.0, &params).unwrap().to_bits(),
            expected_mse(k, s, 0.0, 0.0, &params).unwrap().to_bits(),
        );
        prop_assert_eq!(o(Setting::Opaque), o(Setting::NoIntervention));
        let a = solve(Setting::Opaque, 0.0, &params, &cost, DEFAULT_TOL).unwrap();
        let b = solve(Setting::NoIntervention, 0.0, &params, &cost, DEFAULT_TOL).unwrap();
        prop_assert_eq!(a.k_star.to_bits(), b.k_star.to_bits());
    }

    #[test]
    fn marginal_benefit_is_derivative(t in precision(), h in precision(), mu in mu(),
                                      k in 0.0f64..30.0, s in setting()) {
        let params = ModelParams::simple(t, h, mu).unwrap();
        let step = 1e-5;
        let g = |k: f64| -decision_loss(k, s, mu, &params).unwrap();
        let fd = (g(k + step) - g((k - step).max(0.0))) / (k + step - (k - step).max(0.0));
        let mb = marginal_benefit(k, s, mu, &params).unwrap();
        prop_assume!(mb > 1e-10);
        prop_assert!(close(fd, mb, 1e-6), "fd {fd} vs mb {mb}");
    }

    #[test]
    fn objective_convex_and_mb_decreasing(t in precision(), h in precision(), mu in mu(),
                                          k in 0.0f64..30.0, s in setting(), cost in cost()) {
        let params = ModelParams::simple(t, h, mu).unwrap();
        let d = 1e-3;
        let f = |k: f64| exante_objective(k, s, mu, &params, &cost).unwrap();
        let second = f(k) - 2.0 * f(k + d) + f(k + 2.0 * d);
        prop_assert!(second >= -1e-9, "second difference {second}");
        let r = attenuation_factor(mu, t, h).unwrap();
        if s != Setting::Opaque || r > 0.0 {
            let m0 = marginal_benefit(k, s, mu, &params).unwrap();
            let m1 = marginal_benefit(k + d, s, mu, &params).unwrap();
            prop_assert!(m1 < m0);
        }
    }

    #[test]
    fn attenuation_below_one_iff_moderate(t in precision(), h in precision(), mu in mu()) {
        let r = attenuation_factor(mu, t, h).unwrap();
        let bound = 2.0 * (t + h) / h;
        prop_assume!((mu - bound).abs() > 1e-9 && mu.abs() > 1e-9);
        prop_assert_eq!(r < 1.0, 0.0 < mu && mu < bound);
    }

    #[test]
    fn regimes_are_exhaustive(t in precision(), h in precision(), mu in mu()) {
        let regime = classify_regime(mu, t, h).unwrap();
        let offset = (t + h) / h;
        let expected = if mu < 0.0 {
            Regime::Reinforcing
        } else if mu > 0.0 && mu < offset {
            Regime::Preventive
        } else if mu > offset {
            Regime::Overreacting
        } else {
            Regime::Boundary
        };
        prop_assert_eq!(regime, expected);
    }

    #[test]
    fn solver_matches_grid_oracle(t in 0.1f64..5.0, h in 0.1f64..5.0, mu in mu(), s in setting(), cost in cost()) {
        let params = ModelParams::simple(t, h, mu).unwrap();
        let solved = solve(s, mu, &params, &cost, DEFAULT_TOL).unwrap();
        let k_max = default_grid_extent(&params);
        prop_assume!(solved.k_star < k_max);
        let n = 20_001;
        let oracle = grid_oracle(s, mu, &params, &cost, k_max, n).unwrap();
        prop_assert!((solved.k_star - oracle.k_star).abs() <= grid_step(k_max, n) + DEFAULT_TOL,
            "solve {} oracle {}", solved.k_star, oracle.k_star);
    }

    #[test]
    fn solution_is_locally_optimal(t in precision(), h in precision(), mu in mu(), s in setting(), cost in cost()) {
        let params = ModelParams::simple(t, h, mu).unwrap();
        let r = solve(s, mu, &params, &cost, DEFAULT_TOL).unwrap();
        let f = |k: f64| exante_objective(k, s, mu, &params, &cost).unwrap();
        for delta in [1e-4, 1e-2] {
            prop_assert!(r.objective_value <= f(r.k_star + delta) + 1e-12);
            if r.k_star >= delta {
                prop_assert!(r.objective_value <= f(r.k_star - delta) + 1e-12);
            }
        }
    }

    #[test]
    fn corner_iff_low_marginal_benefit(t in precision(), h in precision(), mu in mu(), s in setting(), cost in cost()) {
        let params = ModelParams::simple(t, h, mu).unwrap();
        let r = solve(s, mu, &params, &cost, DEFAULT_TOL).unwrap();
        let corner = marginal_benefit(0.0, s, mu, &params).unwrap() <= cost.marginal_at_zero();
        prop_assert_eq!(r.solution_kind == SolutionKind::Corner, corner);
        prop_assert_eq!(r.k_star == 0.0, corner);
    }

    #[test]
    fn scenario_round_trip(t in precision(), h in precision(), mu in mu(), sigma2 in 0.0f64..3.0,
                           tau2 in 0.0f64..2.0, cost in cost()) {
        let policy = PolicyStrengthDist::with_moments(mu, sigma2).unwrap();
        let scenario = Scenario {
            name: "prop".into(),
            params: ModelParams::new(t, h, tau2, policy).unwrap(),
            cost,
            settings: Setting::ALL.to_vec(),
            solve: Default::default(),
            sweep: None,
            simulate: Some(Default::default()),
            certify: Some(Default::default()),
        };
        let again = Scenario::from_json_str(&scenario.to_json_string()).unwrap();
        prop_assert_eq!(scenario, again);
    }
}

#[test]
fn reports_round_trip_and_are_deterministic() {
    let bounds = ParamBox::default();
    let cost = CostModel::quadratic(1.0).unwrap();
    let points = bounds.sample(60, 11, None);

    let c1 = certify_corollary1(&bounds, None, &cost, 60, 11).unwrap();
    let text = serde_json::to_string(&c1).unwrap();
    assert_eq!(serde_json::from_str::<serde_json::Value>(&text).unwrap(), serde_json::to_value(&c1).unwrap());
    assert_eq!(c1, serde_json::from_str(&text).unwrap());
    assert_eq!(c1, certify_corollary1(&bounds, None, &cost, 60, 11).unwrap());

    let p1 = certify_proposition1(&points, &cost).unwrap();
    assert_eq!(p1, serde_json::from_str(&serde_json::to_string(&p1).unwrap()).unwrap());

    let p3 = certify_proposition3(&points, &cost, &DEFAULT_K_PROBES, &bounds, 200, 11).unwrap();
    assert_eq!(p3, serde_json::from_str(&serde_json::to_string(&p3).unwrap()).unwrap());
    assert_eq!(p3, certify_proposition3(&points, &cost, &DEFAULT_K_PROBES, &bounds, 200, 11).unwrap());
}
