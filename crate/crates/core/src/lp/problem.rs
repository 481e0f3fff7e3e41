use std::fmt;

use serde::{Deserialize, Serialize};

use super::LpError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// A decision variable: bounds, objective coefficient and an optional label.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
    pub name: Option<String>,
}

impl Column {
    pub fn new(lower: f64, upper: f64, cost: f64) -> Self {
        Column {
            lower,
            upper,
            cost,
            name: None,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }
}

/// A sparse constraint row `sum(a_j * x_j) <relation> rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub entries: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub name: Option<String>,
}

impl Row {
    pub fn new(entries: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Row {
            entries,
            relation,
            rhs,
            name: None,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Row activity `sum(a_j * x_j)` at the given point.
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.entries.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which the row is violated at `x` (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.relation {
            Relation::Le => (act - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - act).max(0.0),
            Relation::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A validated linear program. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    name: Option<String>,
    sense: Sense,
    offset: f64,
    columns: Vec<Column>,
    rows: Vec<Row>,
}

impl LpProblem {
    /// Validates and assembles a problem. Bounds may be infinite, everything
    /// else must be finite.
    pub fn build(
        sense: Sense,
        columns: Vec<Column>,
        rows: Vec<Row>,
        offset: f64,
    ) -> Result<Self, LpError> {
        if !offset.is_finite() {
            return Err(LpError::NonFinite {
                what: "objective offset".into(),
            });
        }
        for (j, col) in columns.iter().enumerate() {
            if col.lower.is_nan() || col.upper.is_nan() {
                return Err(LpError::NonFinite {
                    what: format!("bound of column {j}"),
                });
            }
            if col.lower > col.upper || col.lower == f64::INFINITY || col.upper == f64::NEG_INFINITY
            {
                return Err(LpError::InvalidBounds {
                    column: j,
                    lower: col.lower,
                    upper: col.upper,
                });
            }
            if !col.cost.is_finite() {
                return Err(LpError::NonFinite {
                    what: format!("objective coefficient of column {j}"),
                });
            }
        }
        let n = columns.len();
        let mut seen = vec![usize::MAX; n];
        for (i, row) in rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::NonFinite {
                    what: format!("right-hand side of row {i}"),
                });
            }
            for &(j, a) in &row.entries {
                if j >= n {
                    return Err(LpError::IndexOutOfRange {
                        row: i,
                        column: j,
                        n_vars: n,
                    });
                }
                if seen[j] == i {
                    return Err(LpError::DuplicateIndex { row: i, column: j });
                }
                seen[j] = i;
                if !a.is_finite() {
                    return Err(LpError::NonFinite {
                        what: format!("coefficient ({i}, {j})"),
                    });
                }
            }
        }
        Ok(LpProblem {
            name: None,
            sense,
            offset,
            columns,
            rows,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn n_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.offset
            + self
                .columns
                .iter()
                .zip(x)
                .map(|(c, &v)| c.cost * v)
                .sum::<f64>()
    }

    /// Returns the same program with every objective coefficient (and the
    /// offset) multiplied by `factor`.
    pub fn scaled_objective(&self, factor: f64) -> LpProblem {
        let mut out = self.clone();
        out.offset *= factor;
        for c in &mut out.columns {
            c.cost *= factor;
        }
        out
    }

    /// Largest absolute right-hand side, the scale for row residual checks.
    pub fn rhs_inf_norm(&self) -> f64 {
        self.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max)
    }

    /// Residual pass that works only from the problem data and the point.
    /// Returns `(max_row_violation, max_bound_violation)`.
    pub fn residuals(&self, x: &[f64]) -> (f64, f64) {
        let rows = self
            .rows
            .iter()
            .map(|r| r.violation(x))
            .fold(0.0, f64::max);
        let bounds = self
            .columns
            .iter()
            .zip(x)
            .map(|(c, &v)| (c.lower - v).max(v - c.upper).max(0.0))
            .fold(0.0, f64::max);
        (rows, bounds)
    }
}

/// Incremental construction helper; `build` runs the same validation as
/// [`LpProblem::build`].
#[derive(Clone, Debug)]
pub struct ProblemBuilder {
    sense: Sense,
    offset: f64,
    columns: Vec<Column>,
    rows: Vec<Row>,
}

impl ProblemBuilder {
    pub fn new(sense: Sense) -> Self {
        ProblemBuilder {
            sense,
            offset: 0.0,
            columns: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_column(&mut self, column: Column) -> usize {
        self.columns.push(column);
        self.columns.len() - 1
    }

    pub fn add_row(&mut self, row: Row) -> usize {
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn set_offset(&mut self, offset: f64) {
        self.offset = offset;
    }

    pub fn n_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn build(self) -> Result<LpProblem, LpError> {
        LpProblem::build(self.sense, self.columns, self.rows, self.offset)
    }
}
