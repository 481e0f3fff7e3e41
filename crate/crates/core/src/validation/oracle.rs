//! Exhaustive search over a discretized dispatch grid for horizons of at
//! most four steps.
//!
//! For a fixed dispatch the cheapest feasible sizing has a closed form:
//! `P_bMAX = max |P_b|`, `P_DMAX = max P_D`, and `E_bMAX` is the SOC swing
//! stretched so the lowest point sits at `X_min * E_bMAX`, rounded up to the
//! energy grid. Curtailment and diesel share one signed variable per step
//! since running both at once is never better than running neither.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ObjectiveModel;
use crate::economics::{BatterySpec, DieselSpec, EconomicParams};
use crate::formulation::{CaseId, ConstraintConfig, DispatchSolution, InitialSoc};
use crate::timeseries::Horizon;

pub const MAX_ORACLE_STEPS: usize = 4;
pub const MAX_ORACLE_POINTS: f64 = 2e9;

const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleGrid {
    pub power_step_kw: f64,
    pub energy_step_kwh: f64,
    /// Largest |P_b|, P_c and P_D enumerated.
    pub power_span_kw: f64,
}

impl OracleGrid {
    pub fn new(power_step_kw: f64, energy_step_kwh: f64, power_span_kw: f64) -> Self {
        OracleGrid {
            power_step_kw,
            energy_step_kwh,
            power_span_kw,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub objective: f64,
    pub dispatch: DispatchSolution,
    /// Grid points visited, pruned branches excluded.
    pub points: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("oracle horizon has {len} steps, at most {MAX_ORACLE_STEPS} allowed")]
    HorizonTooLong { len: usize },
    #[error("oracle horizon is empty")]
    EmptyHorizon,
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("grid has {0:.3e} points, above the enumeration limit")]
    GridTooLarge(f64),
    #[error("case {0} needs a diesel spec")]
    MissingDiesel(CaseId),
    #[error("no feasible grid point")]
    Infeasible,
}

struct Search<'a> {
    horizon: &'a Horizon,
    cfg: &'a ConstraintConfig,
    model: ObjectiveModel,
    x_min: f64,
    energy_step: f64,
    fuel_cap: f64,
    batt_levels: Vec<f64>,
    other_levels: Vec<Vec<f64>>,
    p_batt: Vec<f64>,
    other: Vec<f64>,
    p_grid: Vec<f64>,
    best: Option<Best>,
    points: u64,
}

struct Best {
    value: f64,
    p_batt: Vec<f64>,
    other: Vec<f64>,
    e_batt: Vec<f64>,
    e_max: f64,
}

impl Search<'_> {
    fn descend(&mut self, k: usize) {
        let n = self.horizon.len();
        if k == n {
            self.points += 1;
            self.leaf();
            return;
        }
        for bi in 0..self.batt_levels.len() {
            let pb = self.batt_levels[bi];
            for ui in 0..self.other_levels[k].len() {
                let u = self.other_levels[k][ui];
                let pg = self.horizon.p_pv[k] + pb + u;
                if pg < -FEAS_TOL || pg > self.cfg.grid_cap + FEAS_TOL {
                    continue;
                }
                if self.horizon.continues(k)
                    && (pg - self.p_grid[k - 1]).abs() > self.cfg.fluctuation_limit + FEAS_TOL
                {
                    continue;
                }
                self.p_batt[k] = pb;
                self.other[k] = u;
                self.p_grid[k] = pg;
                self.descend(k + 1);
            }
        }
    }

    /// Smallest energy rating on the grid that carries the SOC swing, with
    /// the matching initial state.
    fn energy_sizing(&self, offsets: &[f64]) -> Option<(f64, f64)> {
        let lo = offsets.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let x = self.x_min;
        let raw = match self.cfg.initial_soc {
            InitialSoc::FreeBounded => (hi - lo) / (1.0 - x),
            InitialSoc::FixedFraction(r) => {
                let mut e: f64 = 0.0;
                if hi > 0.0 {
                    e = e.max(if r < 1.0 { hi / (1.0 - r) } else { f64::INFINITY });
                }
                if lo < 0.0 {
                    e = e.max(if r > x { -lo / (r - x) } else { f64::INFINITY });
                }
                e
            }
        };
        if !raw.is_finite() {
            return None;
        }
        let e = (raw / self.energy_step - 1e-9).ceil().max(0.0) * self.energy_step;
        let e0 = match self.cfg.initial_soc {
            InitialSoc::FreeBounded => x * e - lo,
            InitialSoc::FixedFraction(r) => r * e,
        };
        let ok = offsets
            .iter()
            .all(|o| e0 + o >= x * e - FEAS_TOL && e0 + o <= e + FEAS_TOL);
        ok.then_some((e, e0))
    }

    fn leaf(&mut self) {
        let n = self.horizon.len();
        let h = self.cfg.step_hours;
        let mut offsets = vec![0.0; n];
        for k in 1..n {
            offsets[k] = offsets[k - 1] - h * self.p_batt[k - 1];
        }
        if self.cfg.cyclic_soc && offsets[n - 1] - h * self.p_batt[n - 1] < -FEAS_TOL {
            return;
        }
        let Some((e_max, e0)) = self.energy_sizing(&offsets) else {
            return;
        };
        let p_bmax = self.p_batt.iter().fold(0.0, |m: f64, p| m.max(p.abs()));
        let diesel: f64 = self.other.iter().map(|u| u.max(0.0)).sum();
        if h * diesel > self.fuel_cap + FEAS_TOL {
            return;
        }
        let p_dmax = self.other.iter().fold(0.0, |m: f64, u| m.max(*u));
        let m = &self.model;
        let value = m.revenue * self.p_grid.iter().sum::<f64>()
            - m.fuel * diesel
            - m.battery_power * p_bmax
            - m.battery_energy * e_max
            - m.diesel_power * p_dmax
            + m.offset;
        if self.best.as_ref().is_none_or(|b| value > b.value) {
            self.best = Some(Best {
                value,
                p_batt: self.p_batt.clone(),
                other: self.other.clone(),
                e_batt: offsets.iter().map(|o| e0 + o).collect(),
                e_max,
            });
        }
    }
}

fn levels(step: f64, count: usize, sign: f64) -> Vec<f64> {
    (0..=count).map(|j| sign * j as f64 * step).collect()
}

pub fn brute_force_optimum(
    case: CaseId,
    horizon: &Horizon,
    batt: &BatterySpec,
    diesel: Option<&DieselSpec>,
    econ: &EconomicParams,
    cfg: &ConstraintConfig,
    grid: OracleGrid,
) -> Result<OracleResult, OracleError> {
    let n = horizon.len();
    if n == 0 {
        return Err(OracleError::EmptyHorizon);
    }
    if n > MAX_ORACLE_STEPS {
        return Err(OracleError::HorizonTooLong { len: n });
    }
    for (name, v) in [
        ("power_step_kw", grid.power_step_kw),
        ("energy_step_kwh", grid.energy_step_kwh),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(OracleError::BadGrid(format!("{name} must be positive")));
        }
    }
    if !(grid.power_span_kw >= 0.0 && grid.power_span_kw.is_finite()) {
        return Err(OracleError::BadGrid("power_span_kw must be non-negative".into()));
    }
    if case.has_diesel() && diesel.is_none() {
        return Err(OracleError::MissingDiesel(case));
    }

    let step = grid.power_step_kw;
    let span = (grid.power_span_kw / step + 1e-9).floor() as usize;
    let mut batt_levels: Vec<f64> = levels(step, span, -1.0).into_iter().rev().collect();
    batt_levels.extend(levels(step, span, 1.0).into_iter().skip(1));

    let mut other_levels = Vec::with_capacity(n);
    for k in 0..n {
        let mut lv = Vec::new();
        if case.has_curtailment() {
            let c = span.min((horizon.p_pv[k] / step + 1e-9).floor() as usize);
            lv.extend(levels(step, c, -1.0).into_iter().rev());
        } else {
            lv.push(0.0);
        }
        if case.has_diesel() {
            lv.extend(levels(step, span, 1.0).into_iter().skip(1));
        }
        other_levels.push(lv);
    }
    let total: f64 = other_levels
        .iter()
        .map(|lv| (lv.len() * batt_levels.len()) as f64)
        .product();
    if total > MAX_ORACLE_POINTS {
        return Err(OracleError::GridTooLarge(total));
    }

    let diesel = if case.has_diesel() { diesel } else { None };
    let fuel_cap = match diesel {
        Some(d) => super::fuel_energy_cap(d, cfg, horizon),
        None => f64::INFINITY,
    };
    let mut search = Search {
        horizon,
        cfg,
        model: ObjectiveModel::new(case, batt, diesel, econ, cfg, horizon.span_hours),
        x_min: batt.soc_min_fraction,
        energy_step: grid.energy_step_kwh,
        fuel_cap,
        batt_levels,
        other_levels,
        p_batt: vec![0.0; n],
        other: vec![0.0; n],
        p_grid: vec![0.0; n],
        best: None,
        points: 0,
    };
    search.descend(0);

    let Best {
        value: objective,
        p_batt,
        other,
        e_batt,
        e_max,
    } = search.best.ok_or(OracleError::Infeasible)?;
    let p_grid: Vec<f64> = (0..n)
        .map(|k| horizon.p_pv[k] + p_batt[k] + other[k])
        .collect();
    let p_curt = if case.has_curtailment() {
        other.iter().map(|u| (-u).max(0.0)).collect()
    } else {
        Vec::new()
    };
    let p_diesel: Vec<f64> = if case.has_diesel() {
        other.iter().map(|u| u.max(0.0)).collect()
    } else {
        Vec::new()
    };
    let dispatch = DispatchSolution {
        case_id: case,
        steps: horizon.steps.clone(),
        p_pv: horizon.p_pv.clone(),
        p_grid,
        p_batt_max: p_batt.iter().fold(0.0, |m: f64, p| m.max(p.abs())),
        p_batt,
        e_batt,
        e_batt_max: e_max,
        p_diesel_max: case
            .has_diesel()
            .then(|| p_diesel.iter().copied().fold(0.0, f64::max)),
        diesel_energy: cfg.step_hours * p_diesel.iter().sum::<f64>(),
        p_curt,
        p_diesel,
        net_benefit: objective,
        objective_offset: search.model.offset,
        e_diesel_max_cap: diesel.map(|_| fuel_cap),
        step_hours: cfg.step_hours,
    };
    Ok(OracleResult {
        objective,
        dispatch,
        points: search.points,
    })
}

/// Objective change available from moving every power variable by one grid
/// step and the energy rating by one energy step, from the objective
/// coefficients.
pub fn grid_gap_bound(
    case: CaseId,
    n_steps: usize,
    batt: &BatterySpec,
    diesel: Option<&DieselSpec>,
    econ: &EconomicParams,
    cfg: &ConstraintConfig,
    span_hours: f64,
    grid: OracleGrid,
) -> f64 {
    let m = ObjectiveModel::new(case, batt, diesel, econ, cfg, span_hours);
    let n = n_steps as f64;
    let d = grid.power_step_kw;
    let swing = 2.0 * cfg.step_hours * n / (1.0 - batt.soc_min_fraction);
    d * (2.0 * n * m.revenue + n * m.fuel + m.battery_power + m.diesel_power + m.battery_energy * swing)
        + m.battery_energy * grid.energy_step_kwh
}
