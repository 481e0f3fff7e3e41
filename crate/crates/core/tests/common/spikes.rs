//! Hand-built spike instances small enough for exhaustive grid search.

use pvsmooth::economics::{BatterySpec, DieselSpec, EconomicParams};
use pvsmooth::formulation::{build_case, solve_case, CaseId, ConstraintConfig, DispatchSolution};
use pvsmooth::lp::SolveOptions;
use pvsmooth::presets;
use pvsmooth::timeseries::{Horizon, DEFAULT_STEP_HOURS};
use pvsmooth::validation::{brute_force_optimum, grid_gap_bound, OracleGrid};

pub const GRID_STEPS: [f64; 3] = [10.0, 5.0, 2.5];

#[derive(Clone, Debug)]
pub struct SpikeInstance {
    pub name: &'static str,
    pub case: CaseId,
    pub p_pv: Vec<f64>,
    pub annualization: Option<f64>,
    /// Largest |power| the oracle enumerates; covers the LP optimum.
    pub span_kw: f64,
}

pub fn instances() -> Vec<SpikeInstance> {
    let mut v = vec![
        SpikeInstance {
            name: "up-spike",
            case: CaseId::A,
            p_pv: vec![4000.0, 5000.0, 4000.0],
            annualization: None,
            span_kw: 1000.0,
        },
        SpikeInstance {
            name: "dip",
            case: CaseId::A,
            p_pv: vec![4000.0, 3800.0, 4000.0],
            annualization: None,
            span_kw: 200.0,
        },
        SpikeInstance {
            name: "ramp-up",
            case: CaseId::A,
            p_pv: vec![4000.0, 4250.0, 4400.0],
            annualization: None,
            span_kw: 200.0,
        },
    ];
    for case in [CaseId::B, CaseId::C, CaseId::D] {
        v.push(SpikeInstance {
            name: "step-up",
            case,
            p_pv: vec![4000.0, 4200.0],
            annualization: Some(1.0),
            span_kw: 120.0,
        });
        v.push(SpikeInstance {
            name: "step-down",
            case,
            p_pv: vec![4200.0, 4000.0],
            annualization: Some(1.0),
            span_kw: 120.0,
        });
        v.push(SpikeInstance {
            name: "steep-step",
            case,
            p_pv: vec![4000.0, 4250.0],
            annualization: None,
            span_kw: 120.0,
        });
    }
    v
}

pub struct Setup {
    pub horizon: Horizon,
    pub batt: BatterySpec,
    pub diesel: DieselSpec,
    pub econ: EconomicParams,
    pub cfg: ConstraintConfig,
}

pub fn setup(inst: &SpikeInstance) -> Setup {
    Setup {
        horizon: Horizon::contiguous(DEFAULT_STEP_HOURS, inst.p_pv.clone()),
        batt: presets::battery("nas").unwrap(),
        diesel: presets::diesel("diesel").unwrap(),
        econ: EconomicParams {
            discount_rate: 0.0,
            ..EconomicParams::default()
        },
        cfg: ConstraintConfig {
            annualization: inst.annualization,
            ..ConstraintConfig::default()
        },
    }
}

pub struct SpikeOutcome {
    pub lp: DispatchSolution,
    /// (grid step, oracle objective, gap, bound)
    pub rows: Vec<(f64, f64, f64, f64)>,
}

impl SpikeOutcome {
    pub fn within_bounds(&self) -> bool {
        self.rows.iter().all(|&(_, _, gap, bound)| gap >= -1e-6 * self.lp.net_benefit.abs().max(1.0) && gap <= bound)
    }

    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].2 <= w[0].2 + 1e-9 * self.lp.net_benefit.abs().max(1.0))
    }

    /// LP dispatch inside the enumerated box.
    pub fn lp_in_span(&self, span: f64) -> bool {
        let tol = 1e-6;
        self.lp.p_batt.iter().all(|p| p.abs() <= span + tol)
            && self.lp.p_curt.iter().all(|p| *p <= span + tol)
            && self.lp.p_diesel.iter().all(|p| *p <= span + tol)
    }
}

pub fn run(inst: &SpikeInstance) -> SpikeOutcome {
    let s = setup(inst);
    let diesel = inst.case.has_diesel().then_some(&s.diesel);
    let f = build_case(inst.case, &s.horizon, &s.batt, diesel, &s.econ, &s.cfg).unwrap();
    let (_, lp) = solve_case(&f, &SolveOptions::default()).unwrap();
    let rows = GRID_STEPS
        .iter()
        .map(|&step| {
            let grid = OracleGrid::new(step, step, inst.span_kw);
            let o = brute_force_optimum(inst.case, &s.horizon, &s.batt, diesel, &s.econ, &s.cfg, grid)
                .unwrap();
            let bound = grid_gap_bound(
                inst.case,
                s.horizon.len(),
                &s.batt,
                diesel,
                &s.econ,
                &s.cfg,
                s.horizon.span_hours,
                grid,
            );
            (step, o.objective, lp.net_benefit - o.objective, bound)
        })
        .collect();
    SpikeOutcome { lp, rows }
}
