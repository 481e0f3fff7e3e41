//! Builds the sizing/dispatch linear programs for the four smoothing
//! configurations and decodes their solutions.
//!
//! Sign conventions: `P_b > 0` discharges the battery into the grid,
//! `E_b(i) = E_b(i-1) - h * P_b(i-1)`, and every power column is in kW.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::economics::{
    present_worth_factors, BatterySpec, DieselSpec, EconomicParams, PresentWorthFactors,
};
use crate::lp::{
    self, Column, LpError, LpProblem, LpSolution, ProblemBuilder, Relation, Row, Sense,
    SolveOptions, Status,
};
use crate::timeseries::{Horizon, DEFAULT_STEP_HOURS};

pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialSoc {
    /// `E_b(1)` is free within the SOC band.
    FreeBounded,
    /// `E_b(1) = r * E_bMAX`.
    FixedFraction(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintConfig {
    /// kW per step
    pub fluctuation_limit: f64,
    pub step_hours: f64,
    /// kW
    pub grid_cap: f64,
    pub initial_soc: InitialSoc,
    pub cyclic_soc: bool,
    /// Horizon-to-annual energy factor; `None` means 8760 / span hours.
    pub annualization: Option<f64>,
    /// Price battery capacity at raw capital cost and leave fuel cost
    /// undiscounted in the hybrid cases.
    pub literal_hybrid_costs: bool,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        ConstraintConfig {
            fluctuation_limit: 150.0,
            step_hours: DEFAULT_STEP_HOURS,
            grid_cap: 10_000.0,
            initial_soc: InitialSoc::FreeBounded,
            cyclic_soc: true,
            annualization: None,
            literal_hybrid_costs: false,
        }
    }
}

impl ConstraintConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fluctuation_limit > 0.0) {
            return Err(format!(
                "fluctuation_limit must be positive, got {}",
                self.fluctuation_limit
            ));
        }
        if !(self.step_hours > 0.0 && self.step_hours.is_finite()) {
            return Err(format!("step_hours must be positive, got {}", self.step_hours));
        }
        if !(self.grid_cap > 0.0 && self.grid_cap.is_finite()) {
            return Err(format!("grid_cap must be positive, got {}", self.grid_cap));
        }
        if let InitialSoc::FixedFraction(r) = self.initial_soc {
            if !(0.0..=1.0).contains(&r) {
                return Err(format!("initial_soc fraction must be in [0, 1], got {r}"));
            }
        }
        if let Some(a) = self.annualization {
            if !(a > 0.0 && a.is_finite()) {
                return Err(format!("annualization must be positive, got {a}"));
            }
        }
        Ok(())
    }

    pub fn annualization_for(&self, horizon: &Horizon) -> f64 {
        self.annualization
            .unwrap_or(HOURS_PER_YEAR / horizon.span_hours)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseId {
    A,
    B,
    C,
    D,
}

impl CaseId {
    pub const ALL: [CaseId; 4] = [CaseId::A, CaseId::B, CaseId::C, CaseId::D];

    pub fn has_curtailment(self) -> bool {
        matches!(self, CaseId::B | CaseId::D)
    }

    pub fn has_diesel(self) -> bool {
        matches!(self, CaseId::C | CaseId::D)
    }

    pub fn label(self) -> &'static str {
        match self {
            CaseId::A => "A",
            CaseId::B => "B",
            CaseId::C => "C",
            CaseId::D => "D",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            CaseId::A => "battery",
            CaseId::B => "battery + curtailment",
            CaseId::C => "battery + diesel",
            CaseId::D => "battery + diesel + curtailment",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for CaseId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(CaseId::A),
            "B" => Ok(CaseId::B),
            "C" => Ok(CaseId::C),
            "D" => Ok(CaseId::D),
            _ => Err(format!("unknown case {s:?} (expected A, B, C or D)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("horizon has {len} steps, at least 2 required")]
    HorizonTooShort { len: usize },
    #[error("step_hours must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("horizon step {horizon} h differs from configured step {config} h")]
    StepMismatch { horizon: f64, config: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("solver finished with status {0}")]
    NotOptimal(Status),
}

/// Column indices of every decision symbol. Series absent from a case are
/// empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexMap {
    pub p_grid: Vec<usize>,
    pub p_batt: Vec<usize>,
    pub e_batt: Vec<usize>,
    pub p_curt: Vec<usize>,
    pub p_diesel: Vec<usize>,
    pub p_batt_max: usize,
    pub e_batt_max: usize,
    pub p_diesel_max: Option<usize>,
}

impl IndexMap {
    pub fn series(&self, name: &str) -> Option<&[usize]> {
        match name {
            "p_grid" => Some(&self.p_grid),
            "p_batt" => Some(&self.p_batt),
            "e_batt" => Some(&self.e_batt),
            "p_curt" => Some(&self.p_curt),
            "p_diesel" => Some(&self.p_diesel),
            _ => None,
        }
    }

    pub fn get(&self, name: &str, step: usize) -> Option<usize> {
        self.series(name).and_then(|s| s.get(step).copied())
    }

    pub fn sizing(&self, name: &str) -> Option<usize> {
        match name {
            "p_batt_max" => Some(self.p_batt_max),
            "e_batt_max" => Some(self.e_batt_max),
            "p_diesel_max" => self.p_diesel_max,
            _ => None,
        }
    }

    /// Every `(name, step, column)` triple; sizing columns carry no step.
    pub fn entries(&self) -> Vec<(&'static str, Option<usize>, usize)> {
        let mut out = Vec::new();
        for (name, cols) in [
            ("p_grid", &self.p_grid),
            ("p_batt", &self.p_batt),
            ("e_batt", &self.e_batt),
            ("p_curt", &self.p_curt),
            ("p_diesel", &self.p_diesel),
        ] {
            out.extend(cols.iter().enumerate().map(|(k, &c)| (name, Some(k), c)));
        }
        out.push(("p_batt_max", None, self.p_batt_max));
        out.push(("e_batt_max", None, self.e_batt_max));
        if let Some(c) = self.p_diesel_max {
            out.push(("p_diesel_max", None, c));
        }
        out
    }
}

/// Objective coefficients as assembled into the program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    /// $ per kW of `P_G` in one step.
    pub revenue_per_kw_step: f64,
    /// $ per kW of `P_D` in one step.
    pub fuel_per_kw_step: f64,
    /// $ per kW of `P_bMAX`.
    pub battery_power_cost: f64,
    /// $ per kWh of `E_bMAX`.
    pub battery_energy_cost: f64,
    /// $ per kW of `P_DMAX`.
    pub diesel_power_cost: f64,
    /// Constant term, $.
    pub offset: f64,
}

#[derive(Clone, Debug)]
pub struct CaseFormulation {
    pub case_id: CaseId,
    pub problem: LpProblem,
    pub index_map: IndexMap,
    pub horizon: Horizon,
    pub config: ConstraintConfig,
    pub factors: PresentWorthFactors,
    pub annualization: f64,
    pub terms: ObjectiveTerms,
    /// Horizon fuel-energy cap, kWh (diesel cases).
    pub e_diesel_max_cap: Option<f64>,
    pub soc_min_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub case_id: CaseId,
    /// Original sample index of each horizon step.
    pub steps: Vec<usize>,
    pub p_pv: Vec<f64>,
    pub p_grid: Vec<f64>,
    pub p_batt: Vec<f64>,
    pub e_batt: Vec<f64>,
    pub p_curt: Vec<f64>,
    pub p_diesel: Vec<f64>,
    pub p_batt_max: f64,
    pub e_batt_max: f64,
    pub p_diesel_max: Option<f64>,
    pub net_benefit: f64,
    /// Dispatch-independent part of `net_benefit`, $.
    pub objective_offset: f64,
    /// kWh over the horizon
    pub diesel_energy: f64,
    pub e_diesel_max_cap: Option<f64>,
    pub step_hours: f64,
}

impl DispatchSolution {
    pub fn len(&self) -> usize {
        self.p_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_grid.is_empty()
    }

    pub fn max_curtailment(&self) -> f64 {
        self.p_curt.iter().copied().fold(0.0, f64::max)
    }
}

fn check_inputs(horizon: &Horizon, cfg: &ConstraintConfig) -> Result<(), FormulationError> {
    if !(cfg.step_hours > 0.0) {
        return Err(FormulationError::NonPositiveStep(cfg.step_hours));
    }
    cfg.validate().map_err(FormulationError::Config)?;
    if horizon.len() < 2 {
        return Err(FormulationError::HorizonTooShort { len: horizon.len() });
    }
    if (horizon.step_hours - cfg.step_hours).abs() > 1e-9 * cfg.step_hours {
        return Err(FormulationError::StepMismatch {
            horizon: horizon.step_hours,
            config: cfg.step_hours,
        });
    }
    Ok(())
}

/// Fuel-energy cap over the horizon, kWh.
pub fn diesel_energy_cap(diesel: &DieselSpec, annualization: f64) -> f64 {
    diesel.annual_fuel_cap_liters / diesel.fuel_per_kwh / annualization
}

pub fn build_case_a(
    horizon: &Horizon,
    batt: &BatterySpec,
    econ: &EconomicParams,
    cfg: &ConstraintConfig,
) -> Result<CaseFormulation, FormulationError> {
    build_case(CaseId::A, horizon, batt, None, econ, cfg)
}

pub fn build_case_b(
    horizon: &Horizon,
    batt: &BatterySpec,
    econ: &EconomicParams,
    cfg: &ConstraintConfig,
) -> Result<CaseFormulation, FormulationError> {
    build_case(CaseId::B, horizon, batt, None, econ, cfg)
}

pub fn build_case_c(
    horizon: &Horizon,
    batt: &BatterySpec,
    diesel: &DieselSpec,
    econ: &EconomicParams,
    cfg: &ConstraintConfig,
) -> Result<CaseFormulation, FormulationError> {
    build_case(CaseId::C, horizon, batt, Some(diesel), econ, cfg)
}

pub fn build_case_d(
    horizon: &Horizon,
    batt: &BatterySpec,
    diesel: &DieselSpec,
    econ: &EconomicParams,
    cfg: &ConstraintConfig,
) -> Result<CaseFormulation, FormulationError> {
    build_case(CaseId::D, horizon, batt, Some(diesel), econ, cfg)
}

/// Case A with the ramp limit removed: the no-smoothing reference.
pub fn build_baseline(
    horizon: &Horizon,
    batt: &BatterySpec,
    econ: &EconomicParams,
    cfg: &ConstraintConfig,
) -> Result<CaseFormulation, FormulationError> {
    let cfg = ConstraintConfig {
        fluctuation_limit: f64::INFINITY,
        ..cfg.clone()
    };
    build_case(CaseId::A, horizon, batt, None, econ, &cfg)
}

/// Builds any case. Diesel cases require `diesel`.
pub fn build_case(
    case_id: CaseId,
    horizon: &Horizon,
    batt: &BatterySpec,
    diesel: Option<&DieselSpec>,
    econ: &EconomicParams,
    cfg: &ConstraintConfig,
) -> Result<CaseFormulation, FormulationError> {
    check_inputs(horizon, cfg)?;
    batt.validate().map_err(FormulationError::Config)?;
    econ.validate().map_err(FormulationError::Config)?;
    let diesel = if case_id.has_diesel() {
        let d = diesel.ok_or_else(|| {
            FormulationError::Config(format!("case {case_id} needs a diesel spec"))
        })?;
        d.validate().map_err(FormulationError::Config)?;
        Some(d)
    } else {
        None
    };
    let default_diesel;
    let factors = match diesel {
        Some(d) => present_worth_factors(batt, d, econ),
        None => {
            default_diesel = crate::presets::diesel(crate::presets::DEFAULT_DIESEL)
                .expect("bundled diesel preset");
            present_worth_factors(batt, &default_diesel, econ)
        }
    };

    let n = horizon.len();
    let h = cfg.step_hours;
    let annualization = cfg.annualization_for(horizon);
    let m = factors.revenue_multiplier;
    let literal = cfg.literal_hybrid_costs && case_id != CaseId::A;

    let (cp, ce) = if literal {
        (batt.capital_power, batt.capital_energy)
    } else {
        (factors.beta, factors.gamma)
    };
    let mut terms = ObjectiveTerms {
        revenue_per_kw_step: econ.energy_price * h * annualization * m,
        fuel_per_kw_step: 0.0,
        battery_power_cost: cp / batt.eff_power,
        battery_energy_cost: ce / batt.eff_energy,
        diesel_power_cost: 0.0,
        offset: 0.0,
    };
    let mut e_diesel_max_cap = None;
    if let Some(d) = diesel {
        let fuel_years = if literal { 1.0 } else { m };
        terms.fuel_per_kw_step = annualization * fuel_years * h * d.fuel_per_kwh * d.fuel_price;
        terms.diesel_power_cost = factors.sigma / d.efficiency;
        terms.offset = -d.emission_charge_total;
        e_diesel_max_cap = Some(diesel_energy_cap(d, annualization));
    }

    let mut b = ProblemBuilder::new(Sense::Maximize);
    let p_diesel_ub = e_diesel_max_cap.map_or(0.0, |cap| cap / h);
    let mut map = IndexMap {
        p_grid: Vec::with_capacity(n),
        p_batt: Vec::with_capacity(n),
        e_batt: Vec::with_capacity(n),
        p_curt: Vec::new(),
        p_diesel: Vec::new(),
        p_batt_max: 0,
        e_batt_max: 0,
        p_diesel_max: None,
    };
    for k in 0..n {
        let pv = horizon.p_pv[k];
        map.p_grid.push(b.add_column(
            Column::new(0.0, cfg.grid_cap, terms.revenue_per_kw_step).named(format!("PG_{k}")),
        ));
        // P_G >= 0 and P_G <= grid_cap imply these bounds on P_b.
        map.p_batt.push(b.add_column(
            Column::new(-(pv + p_diesel_ub), cfg.grid_cap, 0.0).named(format!("PB_{k}")),
        ));
        map.e_batt.push(b.add_column(
            Column::new(0.0, f64::INFINITY, 0.0).named(format!("EB_{k}")),
        ));
        if case_id.has_curtailment() {
            map.p_curt
                .push(b.add_column(Column::new(0.0, pv, 0.0).named(format!("PC_{k}"))));
        }
        if diesel.is_some() {
            map.p_diesel.push(b.add_column(
                Column::new(0.0, p_diesel_ub, -terms.fuel_per_kw_step).named(format!("PD_{k}")),
            ));
        }
    }
    map.p_batt_max = b.add_column(
        Column::new(0.0, f64::INFINITY, -terms.battery_power_cost).named("PBMAX"),
    );
    map.e_batt_max = b.add_column(
        Column::new(0.0, f64::INFINITY, -terms.battery_energy_cost).named("EBMAX"),
    );
    if diesel.is_some() {
        map.p_diesel_max = Some(b.add_column(
            Column::new(0.0, f64::INFINITY, -terms.diesel_power_cost).named("PDMAX"),
        ));
    }
    b.set_offset(terms.offset);

    let x_min = batt.soc_min_fraction;
    for k in 0..n {
        let mut bal = vec![(map.p_grid[k], 1.0), (map.p_batt[k], -1.0)];
        if case_id.has_curtailment() {
            bal.push((map.p_curt[k], 1.0));
        }
        if diesel.is_some() {
            bal.push((map.p_diesel[k], -1.0));
        }
        b.add_row(Row::new(bal, Relation::Eq, horizon.p_pv[k]).named(format!("BAL_{k}")));

        if horizon.continues(k) && cfg.fluctuation_limit.is_finite() {
            let ramp = vec![(map.p_grid[k], 1.0), (map.p_grid[k - 1], -1.0)];
            b.add_row(
                Row::new(ramp.clone(), Relation::Le, cfg.fluctuation_limit)
                    .named(format!("RUP_{k}")),
            );
            b.add_row(
                Row::new(ramp, Relation::Ge, -cfg.fluctuation_limit).named(format!("RDN_{k}")),
            );
        }
        if k > 0 {
            b.add_row(
                Row::new(
                    vec![
                        (map.e_batt[k], 1.0),
                        (map.e_batt[k - 1], -1.0),
                        (map.p_batt[k - 1], h),
                    ],
                    Relation::Eq,
                    0.0,
                )
                .named(format!("SOC_{k}")),
            );
        }
        b.add_row(
            Row::new(
                vec![(map.e_batt[k], 1.0), (map.e_batt_max, -x_min)],
                Relation::Ge,
                0.0,
            )
            .named(format!("SLO_{k}")),
        );
        b.add_row(
            Row::new(vec![(map.e_batt[k], 1.0), (map.e_batt_max, -1.0)], Relation::Le, 0.0)
                .named(format!("SHI_{k}")),
        );
        b.add_row(
            Row::new(vec![(map.p_batt[k], 1.0), (map.p_batt_max, -1.0)], Relation::Le, 0.0)
                .named(format!("PHI_{k}")),
        );
        b.add_row(
            Row::new(vec![(map.p_batt[k], 1.0), (map.p_batt_max, 1.0)], Relation::Ge, 0.0)
                .named(format!("PLO_{k}")),
        );
        if let Some(pdmax) = map.p_diesel_max {
            b.add_row(
                Row::new(vec![(map.p_diesel[k], 1.0), (pdmax, -1.0)], Relation::Le, 0.0)
                    .named(format!("DCAP_{k}")),
            );
        }
    }
    if let Some(cap) = e_diesel_max_cap {
        let fuel = map.p_diesel.iter().map(|&c| (c, h)).collect();
        b.add_row(Row::new(fuel, Relation::Le, cap).named("FUEL"));
    }
    if let InitialSoc::FixedFraction(r) = cfg.initial_soc {
        b.add_row(
            Row::new(vec![(map.e_batt[0], 1.0), (map.e_batt_max, -r)], Relation::Eq, 0.0)
                .named("INIT"),
        );
    }
    if cfg.cyclic_soc {
        // state after the last step must not fall below the starting state
        b.add_row(
            Row::new(
                vec![
                    (map.e_batt[n - 1], 1.0),
                    (map.p_batt[n - 1], -h),
                    (map.e_batt[0], -1.0),
                ],
                Relation::Ge,
                0.0,
            )
            .named("CYCLE"),
        );
    }

    let problem = b.build()?.with_name(format!("CASE{case_id}"));
    Ok(CaseFormulation {
        case_id,
        problem,
        index_map: map,
        horizon: horizon.clone(),
        config: cfg.clone(),
        factors,
        annualization,
        terms,
        e_diesel_max_cap,
        soc_min_fraction: x_min,
    })
}

pub fn extract_solution(
    f: &CaseFormulation,
    s: &LpSolution,
) -> Result<DispatchSolution, FormulationError> {
    if s.status != Status::Optimal {
        return Err(FormulationError::NotOptimal(s.status));
    }
    let pick = |cols: &[usize]| cols.iter().map(|&c| s.x[c]).collect::<Vec<f64>>();
    let p_diesel = pick(&f.index_map.p_diesel);
    let diesel_energy = f.config.step_hours * p_diesel.iter().sum::<f64>();
    Ok(DispatchSolution {
        case_id: f.case_id,
        steps: f.horizon.steps.clone(),
        p_pv: f.horizon.p_pv.clone(),
        p_grid: pick(&f.index_map.p_grid),
        p_batt: pick(&f.index_map.p_batt),
        e_batt: pick(&f.index_map.e_batt),
        p_curt: pick(&f.index_map.p_curt),
        p_diesel,
        p_batt_max: s.x[f.index_map.p_batt_max],
        e_batt_max: s.x[f.index_map.e_batt_max],
        p_diesel_max: f.index_map.p_diesel_max.map(|c| s.x[c]),
        net_benefit: s.objective_value,
        objective_offset: f.problem.offset(),
        diesel_energy,
        e_diesel_max_cap: f.e_diesel_max_cap,
        step_hours: f.config.step_hours,
    })
}

/// Solves a built case and decodes it.
pub fn solve_case(
    f: &CaseFormulation,
    options: &SolveOptions,
) -> Result<(LpSolution, DispatchSolution), FormulationError> {
    let s = lp::solve(&f.problem, options);
    let d = extract_solution(f, &s)?;
    Ok((s, d))
}
