//! Weather to PV to formulate to solve to validate to report.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{CaseSelector, ConfigError, RunConfig};
use crate::economics::BatterySpec;
use crate::formulation::{
    build_baseline, build_case, extract_solution, CaseFormulation, CaseId, DispatchSolution,
    FormulationError,
};
use crate::lp::{self, mps, Status};
use crate::timeseries::{
    filter_low_irradiance, load_weather, pv_power, synth_weather, Horizon, PowerSeries,
    WeatherError, WeatherSeries,
};
use crate::validation::{check_dispatch, compare_cases, CaseComparison, ValidationReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("weather: {0}")]
    Weather(#[from] WeatherError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
}

impl PipelineError {
    /// Errors caused by the configuration or input files rather than by a
    /// solve.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            PipelineError::Config(_)
                | PipelineError::Weather(_)
                | PipelineError::Io { .. }
                | PipelineError::Input(_)
                | PipelineError::Formulation(
                    FormulationError::Config(_)
                        | FormulationError::HorizonTooShort { .. }
                        | FormulationError::NonPositiveStep(_)
                        | FormulationError::StepMismatch { .. }
                )
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub struct Inputs {
    pub weather: WeatherSeries,
    pub pv: PowerSeries,
    pub horizon: Horizon,
}

pub fn prepare_inputs(cfg: &RunConfig) -> Result<Inputs, PipelineError> {
    let w = &cfg.weather;
    let raw = match &w.path {
        Some(p) => load_weather(p)?,
        None => synth_weather(w.days, w.seed, w.variability),
    };
    let weather = filter_low_irradiance(&raw, w.low_irradiance_threshold);
    let pv = pv_power(&weather, &cfg.plant);
    let horizon = Horizon::from_series(&weather, &pv);
    info!(
        "{} samples, {} retained for optimization",
        weather.len(),
        horizon.len()
    );
    Ok(Inputs {
        weather,
        pv,
        horizon,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: String,
    pub description: String,
    pub status: Status,
    pub iterations: usize,
    pub max_primal_residual: f64,
    pub horizon_steps: usize,
    pub net_benefit: Option<f64>,
    pub objective_offset: Option<f64>,
    pub p_batt_max: Option<f64>,
    pub e_batt_max: Option<f64>,
    pub p_diesel_max: Option<f64>,
    pub max_curtailed: Option<f64>,
    pub diesel_energy: Option<f64>,
    pub e_diesel_max_cap: Option<f64>,
    pub validation: Option<ValidationReport>,
    pub ok: bool,
}

#[derive(Clone, Debug)]
pub struct CaseRun {
    pub label: String,
    pub case_id: CaseId,
    pub dispatch: Option<DispatchSolution>,
    pub report: Option<ValidationReport>,
    pub summary: CaseSummary,
}

impl CaseRun {
    pub fn ok(&self) -> bool {
        self.summary.ok
    }
}

/// Formulation for a case label, with the battery overridden if given.
pub fn formulate(
    cfg: &RunConfig,
    inputs: &Inputs,
    which: CaseSelector,
    battery: Option<&BatterySpec>,
) -> Result<CaseFormulation, PipelineError> {
    let batt = battery.unwrap_or(&cfg.battery);
    let f = match which {
        CaseSelector::Baseline => build_baseline(&inputs.horizon, batt, &cfg.econ, &cfg.constraints)?,
        other => {
            let case = other
                .case_id()
                .ok_or_else(|| PipelineError::Input(format!("{other} is not an optimization case")))?;
            build_case(
                case,
                &inputs.horizon,
                batt,
                Some(&cfg.diesel),
                &cfg.econ,
                &cfg.constraints,
            )?
        }
    };
    Ok(f)
}

pub fn solve_one(
    cfg: &RunConfig,
    inputs: &Inputs,
    which: CaseSelector,
    battery: Option<&BatterySpec>,
) -> Result<CaseRun, PipelineError> {
    let f = formulate(cfg, inputs, which, battery)?;
    let batt = battery.unwrap_or(&cfg.battery);
    let s = lp::solve(&f.problem, &cfg.solver.options());
    info!(
        "case {which}: {} after {} iterations, objective {}",
        s.status, s.iterations, s.objective_value
    );
    let mut summary = CaseSummary {
        case: which.to_string(),
        description: match which {
            CaseSelector::Baseline => "no smoothing".to_string(),
            _ => f.case_id.description().to_string(),
        },
        status: s.status,
        iterations: s.iterations,
        max_primal_residual: s.max_primal_residual,
        horizon_steps: inputs.horizon.len(),
        net_benefit: None,
        objective_offset: None,
        p_batt_max: None,
        e_batt_max: None,
        p_diesel_max: None,
        max_curtailed: None,
        diesel_energy: None,
        e_diesel_max_cap: None,
        validation: None,
        ok: false,
    };
    let (dispatch, report) = match extract_solution(&f, &s) {
        Ok(d) => {
            let constraints = f.config.clone();
            let report = check_dispatch(
                &d,
                &inputs.horizon,
                &constraints,
                batt,
                f.case_id.has_diesel().then_some(&cfg.diesel),
            )
            .map_err(|e| PipelineError::Input(e.to_string()))?;
            if !report.pass {
                for c in report.failures() {
                    warn!(
                        "case {which}: {} residual {} at step {:?}",
                        c.name, c.max_residual, c.worst_step
                    );
                }
            }
            summary.net_benefit = Some(d.net_benefit);
            summary.objective_offset = Some(d.objective_offset);
            summary.p_batt_max = Some(d.p_batt_max);
            summary.e_batt_max = Some(d.e_batt_max);
            summary.p_diesel_max = d.p_diesel_max;
            summary.max_curtailed = f.case_id.has_curtailment().then(|| d.max_curtailment());
            summary.diesel_energy = f.case_id.has_diesel().then_some(d.diesel_energy);
            summary.e_diesel_max_cap = d.e_diesel_max_cap;
            summary.validation = Some(report.clone());
            summary.ok = report.pass;
            (Some(d), Some(report))
        }
        Err(e) => {
            warn!("case {which}: {e}");
            (None, None)
        }
    };
    Ok(CaseRun {
        label: which.to_string(),
        case_id: f.case_id,
        dispatch,
        report,
        summary,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub rank: usize,
    pub name: String,
    pub status: Status,
    pub net_benefit: Option<f64>,
    /// Revenue given up relative to the unsmoothed plant, percent (negative).
    pub imposed_cost_pct: Option<f64>,
    pub p_batt_max: Option<f64>,
    pub e_batt_max: Option<f64>,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatterySelection {
    pub baseline_net_benefit: f64,
    pub rows: Vec<SelectionRow>,
}

impl BatterySelection {
    pub fn ok(&self) -> bool {
        self.rows.iter().all(|r| r.valid)
    }

    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>, p: usize| v.map_or_else(|| "-".into(), |x| format!("{x:.p$}"));
        let header = [
            "Rank",
            "Battery",
            "Net benefit (USD)",
            "Imposed cost %",
            "Power rating (kW)",
            "Energy rating (kWh)",
        ];
        let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            table.push(vec![
                r.rank.to_string(),
                r.name.clone(),
                fmt(r.net_benefit, 2),
                r.imposed_cost_pct.map_or_else(|| "-".into(), |x| format!("{x:.2}%")),
                fmt(r.p_batt_max, 3),
                fmt(r.e_batt_max, 3),
            ]);
        }
        render_table(&table)
    }
}

fn render_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut widths = vec![0usize; cols];
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (i, (w, c)) in widths.iter().zip(r).enumerate() {
            if i == 0 {
                let _ = write!(line, "{c:<w$}");
            } else {
                let _ = write!(line, "  {c:>w$}");
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Case A for every battery in `cfg.battery_select`, best net benefit first;
/// ties keep input order.
pub fn battery_select(cfg: &RunConfig, inputs: &Inputs) -> Result<BatterySelection, PipelineError> {
    if cfg.battery_select.len() < 2 {
        return Err(PipelineError::Input(
            "battery selection needs at least two battery specs".into(),
        ));
    }
    let baseline = solve_one(cfg, inputs, CaseSelector::Baseline, None)?;
    let base = baseline
        .summary
        .net_benefit
        .ok_or_else(|| PipelineError::Input(format!("baseline is {}", baseline.summary.status)))?;
    let runs: Vec<Result<CaseRun, PipelineError>> = cfg
        .battery_select
        .par_iter()
        .map(|b| solve_one(cfg, inputs, CaseSelector::A, Some(b)))
        .collect();
    let mut rows = Vec::new();
    for (b, run) in cfg.battery_select.iter().zip(runs) {
        let run = run?;
        rows.push(SelectionRow {
            rank: 0,
            name: b.name.clone(),
            status: run.summary.status,
            net_benefit: run.summary.net_benefit,
            imposed_cost_pct: run.summary.net_benefit.map(|nb| -100.0 * (base - nb) / base),
            p_batt_max: run.summary.p_batt_max,
            e_batt_max: run.summary.e_batt_max,
            valid: run.ok(),
        });
    }
    // stable: equal benefits keep input order, unsolved cases sink
    rows.sort_by(|a, b| {
        let key = |r: &SelectionRow| r.net_benefit.unwrap_or(f64::NEG_INFINITY);
        key(b).total_cmp(&key(a))
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(BatterySelection {
        baseline_net_benefit: base,
        rows,
    })
}

pub struct RunOutcome {
    pub inputs: Inputs,
    pub cases: Vec<CaseRun>,
    pub comparison: Option<CaseComparison>,
    pub comparison_error: Option<String>,
    pub selection: Option<BatterySelection>,
}

impl RunOutcome {
    /// True iff every case solved to optimality, validated, and the
    /// comparison (if any) raised no nesting error.
    pub fn ok(&self) -> bool {
        self.cases.iter().all(|c| c.ok())
            && self.comparison_error.is_none()
            && self.selection.as_ref().is_none_or(|s| s.ok())
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome, PipelineError> {
    let inputs = prepare_inputs(cfg)?;
    let mut selected: Vec<CaseSelector> = Vec::new();
    for c in &cfg.cases {
        if *c != CaseSelector::BatterySelect && !selected.contains(c) {
            selected.push(*c);
        }
    }
    let runs: Vec<Result<CaseRun, PipelineError>> = selected
        .par_iter()
        .map(|&c| solve_one(cfg, &inputs, c, None))
        .collect();
    let cases = runs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut comparison = None;
    let mut comparison_error = None;
    if selected.len() >= 2 {
        let baseline = match cases.iter().find(|c| c.label == "baseline") {
            Some(b) => b.dispatch.clone(),
            None => solve_one(cfg, &inputs, CaseSelector::Baseline, None)?.dispatch,
        };
        let solved: Vec<DispatchSolution> = cases
            .iter()
            .filter(|c| c.label != "baseline")
            .filter_map(|c| c.dispatch.clone())
            .collect();
        match baseline {
            Some(base) => match compare_cases(&solved, &base) {
                Ok(c) => comparison = Some(c),
                Err(e) => {
                    warn!("comparison: {e}");
                    comparison_error = Some(e.to_string());
                }
            },
            None => comparison_error = Some("baseline did not solve".into()),
        }
    }

    let selection = if cfg.cases.contains(&CaseSelector::BatterySelect) {
        Some(battery_select(cfg, &inputs)?)
    } else {
        None
    };
    Ok(RunOutcome {
        inputs,
        cases,
        comparison,
        comparison_error,
        selection,
    })
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub const DISPATCH_HEADER: &str = "step,p_pv,p_grid,p_batt,e_batt,p_curt,p_diesel";

pub fn dispatch_to_csv(d: &DispatchSolution) -> String {
    let mut out = String::from(DISPATCH_HEADER);
    out.push('\n');
    let opt = |s: &[f64], k: usize| s.get(k).map(|&v| num(v)).unwrap_or_default();
    for k in 0..d.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            d.steps[k],
            num(d.p_pv[k]),
            num(d.p_grid[k]),
            num(d.p_batt[k]),
            num(d.e_batt[k]),
            opt(&d.p_curt, k),
            opt(&d.p_diesel, k)
        );
    }
    out
}

fn plot_csvs(d: &DispatchSolution) -> (String, String) {
    let mut power = String::from("time_h,p_pv_before,p_grid_after\n");
    let mut storage = String::from("time_h,p_batt,e_batt,p_curt,p_diesel\n");
    let opt = |s: &[f64], k: usize| s.get(k).map(|&v| num(v)).unwrap_or_default();
    for k in 0..d.len() {
        let t = num(d.steps[k] as f64 * d.step_hours);
        let _ = writeln!(power, "{t},{},{}", num(d.p_pv[k]), num(d.p_grid[k]));
        let _ = writeln!(
            storage,
            "{t},{},{},{},{}",
            num(d.p_batt[k]),
            num(d.e_batt[k]),
            opt(&d.p_curt, k),
            opt(&d.p_diesel, k)
        );
    }
    (power, storage)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct RunSummary<'a> {
    ok: bool,
    samples: usize,
    horizon_steps: usize,
    cases: Vec<&'a CaseSummary>,
    comparison: Option<&'a CaseComparison>,
    comparison_error: Option<&'a str>,
    battery_selection: Option<&'a BatterySelection>,
}

/// Writes every artifact of a run into `dir`; returns the files written.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files: Vec<(String, String)> = vec![("pv_power.csv".into(), outcome.inputs.pv.to_csv_string())];
    for c in &outcome.cases {
        let stem = if c.label == "baseline" {
            "baseline".to_string()
        } else {
            format!("case_{}", c.label)
        };
        files.push((format!("{stem}_summary.json"), to_json(&c.summary)));
        if let Some(d) = &c.dispatch {
            files.push((format!("{stem}_dispatch.csv"), dispatch_to_csv(d)));
            let (power, storage) = plot_csvs(d);
            files.push((format!("{stem}_plot_power.csv"), power));
            files.push((format!("{stem}_plot_storage.csv"), storage));
        }
    }
    if let Some(cmp) = &outcome.comparison {
        files.push(("comparison.txt".into(), cmp.to_text()));
        files.push(("comparison.json".into(), to_json(cmp)));
    }
    if let Some(sel) = &outcome.selection {
        files.push(("battery_selection.txt".into(), sel.to_text()));
        files.push(("battery_selection.json".into(), to_json(sel)));
    }
    let summary = RunSummary {
        ok: outcome.ok(),
        samples: outcome.inputs.weather.len(),
        horizon_steps: outcome.inputs.horizon.len(),
        cases: outcome.cases.iter().map(|c| &c.summary).collect(),
        comparison: outcome.comparison.as_ref(),
        comparison_error: outcome.comparison_error.as_deref(),
        battery_selection: outcome.selection.as_ref(),
    };
    files.push(("run_summary.json".into(), to_json(&summary)));

    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes the selected case as fixed-format MPS.
pub fn export_mps(
    cfg: &RunConfig,
    which: CaseSelector,
    path: &Path,
) -> Result<(), PipelineError> {
    let inputs = prepare_inputs(cfg)?;
    let f = formulate(cfg, &inputs, which, None)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    mps::write_mps(&f.problem, path).map_err(|e| match e {
        mps::MpsError::Io(source) => PipelineError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => PipelineError::Input(other.to_string()),
    })
}

/// Sizing columns of a written summary.
#[derive(Debug, Deserialize)]
struct SizingRecord {
    p_batt_max: Option<f64>,
    e_batt_max: Option<f64>,
    p_diesel_max: Option<f64>,
}

/// Parses a dispatch CSV. The case is inferred from which optional columns
/// carry values; sizing comes from `summary_json` when given, else the
/// smallest ratings consistent with the series.
pub fn read_dispatch_csv<R: Read>(
    reader: R,
    step_hours: f64,
    summary_json: Option<&str>,
) -> Result<DispatchSolution, PipelineError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| PipelineError::Input(format!("dispatch csv: {e}")))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != DISPATCH_HEADER {
        return Err(PipelineError::Input(format!(
            "dispatch csv header must be {DISPATCH_HEADER:?}, got {header:?}"
        )));
    }
    let mut steps = Vec::new();
    let mut cols: [Vec<Option<f64>>; 6] = Default::default();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| PipelineError::Input(format!("dispatch csv row {row}: {e}")))?;
        let step: usize = rec
            .get(0)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| PipelineError::Input(format!("dispatch csv row {row}, column step: not an index")))?;
        steps.push(step);
        for (j, col) in cols.iter_mut().enumerate() {
            let cell = rec.get(j + 1).unwrap_or("").trim();
            let v = if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|_| {
                    PipelineError::Input(format!(
                        "dispatch csv row {row}, column {}: not a number",
                        DISPATCH_HEADER.split(',').nth(j + 1).unwrap_or("?")
                    ))
                })?)
            };
            col.push(v);
        }
    }
    let full = |j: usize, name: &str| -> Result<Vec<f64>, PipelineError> {
        cols[j]
            .iter()
            .map(|v| v.ok_or_else(|| PipelineError::Input(format!("dispatch csv: {name} has empty cells"))))
            .collect()
    };
    let optional = |j: usize, name: &str| -> Result<Vec<f64>, PipelineError> {
        if cols[j].iter().all(|v| v.is_none()) {
            Ok(Vec::new())
        } else {
            full(j, name)
        }
    };
    let p_pv = full(0, "p_pv")?;
    let p_grid = full(1, "p_grid")?;
    let p_batt = full(2, "p_batt")?;
    let e_batt = full(3, "e_batt")?;
    let p_curt = optional(4, "p_curt")?;
    let p_diesel = optional(5, "p_diesel")?;
    let case_id = match (!p_curt.is_empty(), !p_diesel.is_empty()) {
        (false, false) => CaseId::A,
        (true, false) => CaseId::B,
        (false, true) => CaseId::C,
        (true, true) => CaseId::D,
    };
    let sizing = match summary_json {
        Some(text) => Some(
            serde_json::from_str::<SizingRecord>(text)
                .map_err(|e| PipelineError::Input(format!("summary json: {e}")))?,
        ),
        None => None,
    };
    let implied_pb = p_batt.iter().fold(0.0, |m: f64, p| m.max(p.abs()));
    let implied_eb = e_batt.iter().copied().fold(0.0, f64::max);
    let implied_pd = p_diesel.iter().copied().fold(0.0, f64::max);
    let pick = |s: Option<f64>, implied: f64| s.unwrap_or(implied);
    let (pb, eb, pd) = match &sizing {
        Some(s) => (
            pick(s.p_batt_max, implied_pb),
            pick(s.e_batt_max, implied_eb),
            pick(s.p_diesel_max, implied_pd),
        ),
        None => (implied_pb, implied_eb, implied_pd),
    };
    let diesel_energy = step_hours * p_diesel.iter().sum::<f64>();
    Ok(DispatchSolution {
        case_id,
        steps,
        p_pv,
        p_grid,
        p_batt,
        e_batt,
        p_curt,
        p_diesel_max: case_id.has_diesel().then_some(pd),
        p_diesel,
        p_batt_max: pb,
        e_batt_max: eb,
        net_benefit: f64::NAN,
        objective_offset: 0.0,
        diesel_energy,
        e_diesel_max_cap: None,
        step_hours,
    })
}

/// Checks a dispatch CSV against the constraints of `cfg`.
pub fn validate_dispatch_file(
    csv_path: &Path,
    cfg: &RunConfig,
    summary_path: Option<&Path>,
) -> Result<ValidationReport, PipelineError> {
    let file = fs::File::open(csv_path).map_err(io_err(csv_path))?;
    let summary = match summary_path {
        Some(p) => Some(fs::read_to_string(p).map_err(io_err(p))?),
        None => None,
    };
    let d = read_dispatch_csv(file, cfg.constraints.step_hours, summary.as_deref())?;
    if d.is_empty() {
        return Err(PipelineError::Input("dispatch csv has no rows".into()));
    }
    let inputs = prepare_inputs(cfg)?;
    let horizon = Horizon {
        step_hours: cfg.constraints.step_hours,
        steps: d.steps.clone(),
        p_pv: d.p_pv.clone(),
        span_hours: inputs.horizon.span_hours,
    };
    check_dispatch(
        &d,
        &horizon,
        &cfg.constraints,
        &cfg.battery,
        d.case_id.has_diesel().then_some(&cfg.diesel),
    )
    .map_err(|e| PipelineError::Input(e.to_string()))
}
