//! Side-by-side summary of solved cases against the unsmoothed baseline.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{CaseId, DispatchSolution};

/// Relative tolerance of the nesting checks.
pub const NESTING_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub case_id: CaseId,
    pub description: String,
    pub net_benefit: f64,
    /// `(baseline - net_benefit) / baseline`
    pub decrement: f64,
    pub p_batt_max: f64,
    pub e_batt_max: f64,
    pub p_diesel_max: Option<f64>,
    pub max_curtailed: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseComparison {
    pub baseline_net_benefit: f64,
    pub rows: Vec<CaseRow>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ComparisonError {
    #[error("case {0} was solved on different inputs than the baseline")]
    InputMismatch(CaseId),
    #[error("case {0} appears more than once")]
    Duplicate(CaseId),
    #[error("baseline net benefit {0} is not positive")]
    BadBaseline(f64),
    #[error("nesting violated: case {lower} ({lower_value}) exceeds case {upper} ({upper_value})")]
    Nesting {
        lower: CaseId,
        upper: CaseId,
        lower_value: f64,
        upper_value: f64,
    },
}

/// Pairs `(smaller, larger)` whose feasible sets nest.
const CHAIN: [(CaseId, CaseId); 4] = [
    (CaseId::A, CaseId::B),
    (CaseId::B, CaseId::D),
    (CaseId::A, CaseId::C),
    (CaseId::C, CaseId::D),
];

/// Net benefit without the dispatch-independent constant, the quantity the
/// feasible-set nesting actually orders.
pub fn variable_benefit(sol: &DispatchSolution) -> f64 {
    sol.net_benefit - sol.objective_offset
}

pub fn compare_cases(
    results: &[DispatchSolution],
    baseline: &DispatchSolution,
) -> Result<CaseComparison, ComparisonError> {
    if !(baseline.net_benefit > 0.0) {
        return Err(ComparisonError::BadBaseline(baseline.net_benefit));
    }
    let mut sorted: Vec<&DispatchSolution> = results.iter().collect();
    sorted.sort_by_key(|s| s.case_id);
    for pair in sorted.windows(2) {
        if pair[0].case_id == pair[1].case_id {
            return Err(ComparisonError::Duplicate(pair[0].case_id));
        }
    }
    for s in &sorted {
        if s.steps != baseline.steps || s.p_pv != baseline.p_pv {
            return Err(ComparisonError::InputMismatch(s.case_id));
        }
    }
    let find = |c: CaseId| sorted.iter().find(|s| s.case_id == c);
    for (lo, hi) in CHAIN {
        if let (Some(a), Some(b)) = (find(lo), find(hi)) {
            let (va, vb) = (variable_benefit(a), variable_benefit(b));
            let scale = va.abs().max(vb.abs()).max(1.0);
            if va > vb + NESTING_TOL * scale {
                return Err(ComparisonError::Nesting {
                    lower: lo,
                    upper: hi,
                    lower_value: va,
                    upper_value: vb,
                });
            }
        }
    }
    let base = baseline.net_benefit;
    let rows = sorted
        .iter()
        .map(|s| CaseRow {
            case_id: s.case_id,
            description: s.case_id.description().to_string(),
            net_benefit: s.net_benefit,
            decrement: (base - s.net_benefit) / base,
            p_batt_max: s.p_batt_max,
            e_batt_max: s.e_batt_max,
            p_diesel_max: s.p_diesel_max,
            max_curtailed: s.case_id.has_curtailment().then(|| s.max_curtailment()),
        })
        .collect();
    Ok(CaseComparison {
        baseline_net_benefit: base,
        rows,
    })
}

impl CaseComparison {
    pub fn row(&self, case: CaseId) -> Option<&CaseRow> {
        self.rows.iter().find(|r| r.case_id == case)
    }

    /// Aligned plain-text table, one column per case.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        let mut lines: Vec<(String, Vec<String>)> = vec![
            (
                "".into(),
                self.rows.iter().map(|r| format!("{} ({})", r.case_id, r.description)).collect(),
            ),
            (
                "Net revenue (USD)".into(),
                self.rows.iter().map(|r| format!("{:.2}", r.net_benefit)).collect(),
            ),
            (
                "Decrement vs no smoothing".into(),
                self.rows.iter().map(|r| format!("{:.2}%", 100.0 * r.decrement)).collect(),
            ),
            (
                "Maximum curtailed power (kW)".into(),
                self.rows.iter().map(|r| opt(r.max_curtailed)).collect(),
            ),
            (
                "Battery power rating (kW)".into(),
                self.rows.iter().map(|r| format!("{:.3}", r.p_batt_max)).collect(),
            ),
            (
                "Battery energy rating (kWh)".into(),
                self.rows.iter().map(|r| format!("{:.3}", r.e_batt_max)).collect(),
            ),
            (
                "Diesel power capacity (kW)".into(),
                self.rows.iter().map(|r| opt(r.p_diesel_max)).collect(),
            ),
        ];
        lines.push((
            "Baseline net revenue (USD)".into(),
            vec![format!("{:.2}", self.baseline_net_benefit)],
        ));
        let label_w = lines.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        let mut col_w = vec![0usize; self.rows.len()];
        for (_, cells) in &lines {
            for (w, c) in col_w.iter_mut().zip(cells) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        for (label, cells) in &lines {
            let mut line = format!("{label:<label_w$}");
            for (w, c) in col_w.iter().zip(cells) {
                let _ = write!(line, "  {c:>w$}");
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}
