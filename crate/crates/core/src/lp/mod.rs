//! Linear programs, a bounded-variable revised simplex solver and MPS
//! interchange.
//!
//! The solver works on the computational form `A x - s = 0` where every row
//! gets a logical variable `s` carrying the row's bounds (`<=` rows get
//! `(-inf, rhs]`, `>=` rows `[rhs, inf)` and equality rows the fixed range
//! `[rhs, rhs]`). Phase one minimises the sum of bound violations of the
//! basic variables, so a fixed logical that starts basic and infeasible
//! plays the role of a phase-one artificial. Once it leaves the basis it is
//! fixed and can never re-enter.
//!
//! The basis is kept as a sparse LU factorization (Markowitz pivot order
//! with threshold partial pivoting) plus a product-form eta file, rebuilt
//! every `refactor_interval` pivots.

mod lu;
pub mod mps;
mod problem;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use problem::{Column, LpProblem, ProblemBuilder, Relation, Row, Sense};
pub use simplex::solve;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("row {row} references column {column} but the problem has {n_vars} columns")]
    IndexOutOfRange {
        row: usize,
        column: usize,
        n_vars: usize,
    },
    #[error("row {row} references column {column} more than once")]
    DuplicateIndex { row: usize, column: usize },
    #[error("non-finite value in {what}")]
    NonFinite { what: String },
    #[error("column {column} has lower bound {lower} above upper bound {upper}")]
    InvalidBounds {
        column: usize,
        lower: f64,
        upper: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::IterationLimit => "iteration-limit",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PivotRule {
    /// Most negative reduced cost, falling back to Bland's rule on stalls.
    Dantzig,
    /// Smallest eligible index throughout.
    Bland,
}

/// Where a column ended up in the final basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free column resting at zero.
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Primal feasibility tolerance (absolute).
    pub feasibility_tol: f64,
    /// Reduced-cost tolerance, applied to the internally normalised costs.
    pub optimality_tol: f64,
    /// Defaults to `50 * (rows + cols)` when unset.
    pub max_iterations: Option<usize>,
    pub pivot_rule: PivotRule,
    pub refactor_interval: usize,
    /// Consecutive non-improving pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            max_iterations: None,
            pivot_rule: PivotRule::Dantzig,
            refactor_interval: 50,
            bland_after: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: Status,
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub max_primal_residual: f64,
    pub max_bound_violation: f64,
    /// Row multipliers in the problem's own sense, so that the reduced cost
    /// of column `j` is `c_j - sum_r y_r a_rj`.
    pub row_duals: Vec<f64>,
    pub column_status: Vec<ColumnStatus>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}
