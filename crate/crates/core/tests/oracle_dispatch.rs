mod common;

use common::spikes::{instances, run, setup, GRID_STEPS};
use pvsmooth::validation::{brute_force_optimum, check_dispatch, OracleGrid};

#[test]
fn lp_dominates_grid_search_within_the_step_bound() {
    for inst in instances() {
        let out = run(&inst);
        let tag = format!("{} {}", inst.case, inst.name);
        assert!(out.lp_in_span(inst.span_kw), "{tag}: LP outside enumerated box");
        let scale = out.lp.net_benefit.abs().max(1.0);
        for &(step, oracle, gap, bound) in &out.rows {
            assert!(
                gap >= -1e-6 * scale && gap <= bound,
                "{tag}: grid {step}: lp {} oracle {oracle} gap {gap} bound {bound}",
                out.lp.net_benefit
            );
        }
        assert!(out.monotone(), "{tag}: {:?}", out.rows);
    }
}

#[test]
fn oracle_dispatch_is_feasible() {
    for inst in instances() {
        let s = setup(&inst);
        let diesel = inst.case.has_diesel().then_some(&s.diesel);
        let grid = OracleGrid::new(GRID_STEPS[0], GRID_STEPS[0], inst.span_kw);
        let o = brute_force_optimum(inst.case, &s.horizon, &s.batt, diesel, &s.econ, &s.cfg, grid)
            .unwrap();
        let r = check_dispatch(&o.dispatch, &s.horizon, &s.cfg, &s.batt, diesel).unwrap();
        assert!(r.pass, "{} {}: {:?}", inst.case, inst.name, r.failures().collect::<Vec<_>>());
    }
}
