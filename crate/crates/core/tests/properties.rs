use proptest::prelude::*;
use pvsmooth::config::{CaseSelector, RunConfig};
use pvsmooth::formulation::CaseId;
use pvsmooth::pipeline::{prepare_inputs, solve_one};
use pvsmooth::validation::{check_dispatch, compare_cases};

fn config(seed: u64, variability: f64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.weather.days = 1;
    cfg.weather.seed = seed;
    cfg.weather.variability = variability;
    cfg
}

fn scaled(cfg: &RunConfig, c: f64) -> RunConfig {
    let mut out = cfg.clone();
    out.battery = cfg.battery.scale_prices(c);
    out.diesel = cfg.diesel.scale_prices(c);
    out.econ.energy_price *= c;
    out
}

const CASES: [CaseSelector; 4] = [
    CaseSelector::A,
    CaseSelector::B,
    CaseSelector::C,
    CaseSelector::D,
];

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn larger_feasible_sets_never_earn_less(seed in 0u64..10_000, var in 0.2f64..1.0) {
        let cfg = config(seed, var);
        let inputs = prepare_inputs(&cfg).unwrap();
        let mut sols = Vec::new();
        for c in CASES {
            let run = solve_one(&cfg, &inputs, c, None).unwrap();
            prop_assert!(run.ok(), "{:?}", run.summary);
            sols.push(run.dispatch.unwrap());
        }
        let base = solve_one(&cfg, &inputs, CaseSelector::Baseline, None).unwrap();
        let cmp = compare_cases(&sols, base.dispatch.as_ref().unwrap());
        prop_assert!(cmp.is_ok(), "{:?}", cmp.err());
        let cmp = cmp.unwrap();
        for r in &cmp.rows {
            prop_assert!(r.decrement >= -1e-9, "{:?}", r);
        }
    }

    #[test]
    fn tripling_prices_triples_the_objective(seed in 0u64..10_000, case in 0usize..4) {
        let cfg = config(seed, 0.6);
        let big = scaled(&cfg, 3.0);
        let inputs = prepare_inputs(&cfg).unwrap();
        let a = solve_one(&cfg, &inputs, CASES[case], None).unwrap();
        let b = solve_one(&big, &inputs, CASES[case], None).unwrap();
        let (x, y) = (a.summary.net_benefit.unwrap(), b.summary.net_benefit.unwrap());
        prop_assert!((y - 3.0 * x).abs() <= 1e-9 * (3.0 * x).abs(), "{} vs {}", y, 3.0 * x);
        prop_assert_eq!(a.ok(), b.ok());
    }

    #[test]
    fn perturbed_dispatch_is_caught(seed in 0u64..10_000, pick in 0usize..1000, delta in 1e-3f64..50.0) {
        let cfg = config(seed, 0.7);
        let inputs = prepare_inputs(&cfg).unwrap();
        let run = solve_one(&cfg, &inputs, CaseSelector::D, None).unwrap();
        let mut d = run.dispatch.unwrap();
        let k = pick % d.len();
        d.p_grid[k] += delta;
        let r = check_dispatch(&d, &inputs.horizon, &cfg.constraints, &cfg.battery, Some(&cfg.diesel)).unwrap();
        let bal = r.get("balance").unwrap();
        prop_assert!(!bal.pass);
        prop_assert!((bal.max_residual - delta).abs() < 1e-6);
        prop_assert_eq!(bal.worst_step, Some(d.steps[k]));
    }
}

#[test]
fn lp_residual_and_validation_agree() {
    let cfg = config(3, 0.9);
    let inputs = prepare_inputs(&cfg).unwrap();
    for c in CASES {
        let run = solve_one(&cfg, &inputs, c, None).unwrap();
        assert!(run.summary.max_primal_residual < 1e-6);
        let report = run.report.unwrap();
        assert!(report.pass);
        for chk in &report.checks {
            assert!(chk.max_residual <= 1e-6, "{c}: {chk:?}");
        }
        let d = run.dispatch.unwrap();
        assert_eq!(d.case_id, c.case_id().unwrap());
        assert_eq!(d.p_curt.is_empty(), !matches!(d.case_id, CaseId::B | CaseId::D));
    }
}
