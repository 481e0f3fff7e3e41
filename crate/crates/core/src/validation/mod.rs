//! Independent checks of solved dispatches, a brute-force optimum for tiny
//! instances, and cross-case comparison.
//!
//! Nothing here reads the assembled program: constraints and objectives are
//! recomputed from the decoded series and the raw specs.

mod compare;
mod oracle;

pub use compare::{compare_cases, CaseComparison, CaseRow, ComparisonError};
pub use oracle::{brute_force_optimum, grid_gap_bound, OracleError, OracleGrid, OracleResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::economics::{
    battery_energy_pw, battery_power_pw, diesel_power_pw, revenue_multiplier, BatterySpec,
    DieselSpec, EconomicParams,
};
use crate::formulation::{CaseId, ConstraintConfig, DispatchSolution, InitialSoc};
use crate::timeseries::Horizon;

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

pub const CONSTRAINTS: [&str; 7] = [
    "balance",
    "ramp",
    "soc-recursion",
    "soc-bounds",
    "power-bounds",
    "grid-cap",
    "fuel-cap",
];

#[derive(Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("series {series} has {got} values, expected {expected}")]
    LengthMismatch {
        series: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("case {0} needs a diesel spec")]
    MissingDiesel(CaseId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub max_residual: f64,
    /// Original sample index of the worst violation.
    pub worst_step: Option<usize>,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub case_id: CaseId,
    pub checks: Vec<ConstraintCheck>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn get(&self, name: &str) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Running maximum of non-negative residuals.
struct Worst {
    value: f64,
    step: Option<usize>,
}

impl Worst {
    fn new() -> Self {
        Worst {
            value: 0.0,
            step: None,
        }
    }

    fn see(&mut self, residual: f64, step: Option<usize>) {
        // NaN counts as infinitely bad
        let r = if residual.is_nan() { f64::INFINITY } else { residual };
        if r > self.value {
            self.value = r;
            self.step = step;
        }
    }
}

/// Horizon fuel-energy cap implied by the diesel spec, kWh.
pub fn fuel_energy_cap(diesel: &DieselSpec, cfg: &ConstraintConfig, horizon: &Horizon) -> f64 {
    let annual_kwh = diesel.annual_fuel_cap_liters / diesel.fuel_per_kwh;
    match cfg.annualization {
        Some(a) => annual_kwh / a,
        None => annual_kwh * horizon.span_hours / 8760.0,
    }
}

pub fn check_dispatch(
    sol: &DispatchSolution,
    horizon: &Horizon,
    cfg: &ConstraintConfig,
    batt: &BatterySpec,
    diesel: Option<&DieselSpec>,
) -> Result<ValidationReport, ValidationError> {
    check_dispatch_with_tol(sol, horizon, cfg, batt, diesel, DEFAULT_TOLERANCE)
}

pub fn check_dispatch_with_tol(
    sol: &DispatchSolution,
    horizon: &Horizon,
    cfg: &ConstraintConfig,
    batt: &BatterySpec,
    diesel: Option<&DieselSpec>,
    tol: f64,
) -> Result<ValidationReport, ValidationError> {
    let n = horizon.len();
    let case = sol.case_id;
    let curt_len = if case.has_curtailment() { n } else { 0 };
    let dsl_len = if case.has_diesel() { n } else { 0 };
    for (series, expected, got) in [
        ("p_grid", n, sol.p_grid.len()),
        ("p_batt", n, sol.p_batt.len()),
        ("e_batt", n, sol.e_batt.len()),
        ("p_curt", curt_len, sol.p_curt.len()),
        ("p_diesel", dsl_len, sol.p_diesel.len()),
    ] {
        if expected != got {
            return Err(ValidationError::LengthMismatch {
                series,
                expected,
                got,
            });
        }
    }
    if case.has_diesel() && diesel.is_none() {
        return Err(ValidationError::MissingDiesel(case));
    }

    let h = cfg.step_hours;
    let curt = |k: usize| if curt_len > 0 { sol.p_curt[k] } else { 0.0 };
    let dsl = |k: usize| if dsl_len > 0 { sol.p_diesel[k] } else { 0.0 };
    let step = |k: usize| Some(horizon.steps[k]);

    let mut balance = Worst::new();
    let mut ramp = Worst::new();
    let mut recursion = Worst::new();
    let mut soc = Worst::new();
    let mut power = Worst::new();
    let mut grid = Worst::new();
    let mut fuel = Worst::new();

    let x_min = batt.soc_min_fraction;
    let p_dmax = sol.p_diesel_max.unwrap_or(0.0);
    power.see(-sol.p_batt_max, None);
    soc.see(-sol.e_batt_max, None);
    power.see(-p_dmax, None);

    for k in 0..n {
        let injected = horizon.p_pv[k] + sol.p_batt[k] - curt(k) + dsl(k);
        balance.see((sol.p_grid[k] - injected).abs(), step(k));

        if k > 0 {
            if horizon.continues(k) {
                let jump = (sol.p_grid[k] - sol.p_grid[k - 1]).abs();
                ramp.see(jump - cfg.fluctuation_limit, step(k));
            }
            let expected = sol.e_batt[k - 1] - h * sol.p_batt[k - 1];
            recursion.see((sol.e_batt[k] - expected).abs(), step(k));
        }

        let e = sol.e_batt[k];
        soc.see(x_min * sol.e_batt_max - e, step(k));
        soc.see(e - sol.e_batt_max, step(k));
        soc.see(-e, step(k));

        power.see(sol.p_batt[k].abs() - sol.p_batt_max, step(k));
        if curt_len > 0 {
            power.see(-sol.p_curt[k], step(k));
            power.see(sol.p_curt[k] - horizon.p_pv[k], step(k));
        }
        if dsl_len > 0 {
            power.see(-sol.p_diesel[k], step(k));
            power.see(sol.p_diesel[k] - p_dmax, step(k));
        }

        grid.see(-sol.p_grid[k], step(k));
        grid.see(sol.p_grid[k] - cfg.grid_cap, step(k));
    }
    if let InitialSoc::FixedFraction(r) = cfg.initial_soc {
        soc.see((sol.e_batt[0] - r * sol.e_batt_max).abs(), step(0));
    }
    if cfg.cyclic_soc {
        let after = sol.e_batt[n - 1] - h * sol.p_batt[n - 1];
        soc.see(sol.e_batt[0] - after, step(n - 1));
    }
    if let (true, Some(d)) = (dsl_len > 0, diesel) {
        let used = h * sol.p_diesel.iter().sum::<f64>();
        fuel.see(used - fuel_energy_cap(d, cfg, horizon), None);
    }

    let checks: Vec<ConstraintCheck> = CONSTRAINTS
        .iter()
        .zip([balance, ramp, recursion, soc, power, grid, fuel])
        .map(|(name, w)| ConstraintCheck {
            name: name.to_string(),
            max_residual: w.value,
            worst_step: w.step,
            tolerance: tol,
            pass: w.value <= tol,
        })
        .collect();
    let pass = checks.iter().all(|c| c.pass);
    Ok(ValidationReport {
        case_id: case,
        checks,
        pass,
    })
}

/// Objective coefficients derived directly from the specs.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveModel {
    pub revenue: f64,
    pub fuel: f64,
    pub battery_power: f64,
    pub battery_energy: f64,
    pub diesel_power: f64,
    pub offset: f64,
}

impl ObjectiveModel {
    pub fn new(
        case: CaseId,
        batt: &BatterySpec,
        diesel: Option<&DieselSpec>,
        econ: &EconomicParams,
        cfg: &ConstraintConfig,
        span_hours: f64,
    ) -> ObjectiveModel {
        let a = cfg.annualization.unwrap_or(8760.0 / span_hours);
        let years = revenue_multiplier(econ);
        let literal = cfg.literal_hybrid_costs && case != CaseId::A;
        let (cp, ce) = if literal {
            (batt.capital_power, batt.capital_energy)
        } else {
            (battery_power_pw(batt, econ), battery_energy_pw(batt, econ))
        };
        let mut m = ObjectiveModel {
            revenue: econ.energy_price * cfg.step_hours * a * years,
            fuel: 0.0,
            battery_power: cp / batt.eff_power,
            battery_energy: ce / batt.eff_energy,
            diesel_power: 0.0,
            offset: 0.0,
        };
        if let (true, Some(d)) = (case.has_diesel(), diesel) {
            let fuel_years = if literal { 1.0 } else { years };
            m.fuel = a * fuel_years * cfg.step_hours * d.fuel_per_kwh * d.fuel_price;
            m.diesel_power = diesel_power_pw(d, econ) / d.efficiency;
            m.offset = -d.emission_charge_total;
        }
        m
    }

    pub fn evaluate(&self, sol: &DispatchSolution) -> f64 {
        self.revenue * sol.p_grid.iter().sum::<f64>()
            - self.fuel * sol.p_diesel.iter().sum::<f64>()
            - self.battery_power * sol.p_batt_max
            - self.battery_energy * sol.e_batt_max
            - self.diesel_power * sol.p_diesel_max.unwrap_or(0.0)
            + self.offset
    }
}
