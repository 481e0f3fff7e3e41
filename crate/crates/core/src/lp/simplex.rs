use super::lu::LuFactors;
use super::{ColumnStatus, LpProblem, LpSolution, PivotRule, Relation, Sense, SolveOptions, Status};

const NONE: usize = usize::MAX;
const PIVOT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarState {
    Basic,
    Lower,
    Upper,
    Free,
}

/// Column-compressed copy of the constraint matrix.
struct Csc {
    start: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Csc {
    fn from_problem(p: &LpProblem) -> Csc {
        let n = p.n_vars();
        let mut counts = vec![0usize; n + 1];
        for row in p.rows() {
            for &(j, _) in &row.entries {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let nnz = counts[n];
        let mut fill = counts.clone();
        let mut idx = vec![0; nnz];
        let mut val = vec![0.0; nnz];
        for (i, row) in p.rows().iter().enumerate() {
            for &(j, a) in &row.entries {
                idx[fill[j]] = i;
                val[fill[j]] = a;
                fill[j] += 1;
            }
        }
        Csc {
            start: counts,
            idx,
            val,
        }
    }

    fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.start[j]..self.start[j + 1];
        self.idx[r.clone()].iter().copied().zip(self.val[r].iter().copied())
    }
}

enum Step {
    Flip(f64),
    Pivot { pos: usize, t: f64, to_upper: bool },
    Unbounded,
}

struct Solver<'a> {
    opts: &'a SolveOptions,
    m: usize,
    n: usize,
    a: Csc,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    pos_of: Vec<usize>,
    lu: LuFactors,
    iterations: usize,
}

/// Solves `problem` with the bounded-variable primal simplex method.
///
/// Deterministic: the same problem and options always follow the same pivot
/// sequence.
pub fn solve(problem: &LpProblem, options: &SolveOptions) -> LpSolution {
    let mut s = Solver::new(problem, options);
    let max_iter = options
        .max_iterations
        .unwrap_or(50 * (problem.n_rows() + problem.n_vars()).max(1));
    let (status, y) = s.run(max_iter);
    s.finish(problem, status, y)
}

impl<'a> Solver<'a> {
    fn new(p: &LpProblem, opts: &'a SolveOptions) -> Solver<'a> {
        let n = p.n_vars();
        let m = p.n_rows();
        let cmax = p
            .columns()
            .iter()
            .map(|c| c.cost.abs())
            .fold(0.0, f64::max);
        let scale = if cmax > 0.0 { 1.0 / cmax } else { 1.0 };
        let sign = match p.sense() {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        let mut cost = vec![0.0; n + m];
        for (j, c) in p.columns().iter().enumerate() {
            lower.push(c.lower);
            upper.push(c.upper);
            cost[j] = sign * scale * c.cost;
        }
        for r in p.rows() {
            let (l, u) = match r.relation {
                Relation::Le => (f64::NEG_INFINITY, r.rhs),
                Relation::Ge => (r.rhs, f64::INFINITY),
                Relation::Eq => (r.rhs, r.rhs),
            };
            lower.push(l);
            upper.push(u);
        }
        let mut x = vec![0.0; n + m];
        let mut state = vec![VarState::Basic; n + m];
        for j in 0..n {
            let (l, u) = (lower[j], upper[j]);
            let (st, v) = match (l.is_finite(), u.is_finite()) {
                (true, true) if u.abs() < l.abs() => (VarState::Upper, u),
                (true, _) => (VarState::Lower, l),
                (false, true) => (VarState::Upper, u),
                (false, false) => (VarState::Free, 0.0),
            };
            state[j] = st;
            x[j] = v;
        }
        let basis: Vec<usize> = (n..n + m).collect();
        let mut pos_of = vec![NONE; n + m];
        for (p, &v) in basis.iter().enumerate() {
            pos_of[v] = p;
        }
        let mut s = Solver {
            opts,
            m,
            n,
            a: Csc::from_problem(p),
            lower,
            upper,
            cost,
            x,
            state,
            basis,
            pos_of,
            lu: LuFactors::factorize(0, &[]).expect("empty factorization"),
            iterations: 0,
        };
        s.refactor();
        s
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            self.a.col(j).collect()
        } else {
            vec![(j - self.n, -1.0)]
        }
    }

    fn dot_col(&self, y: &[f64], j: usize) -> f64 {
        if j < self.n {
            self.a.col(j).map(|(i, v)| y[i] * v).sum()
        } else {
            -y[j - self.n]
        }
    }

    fn nonbasic_at(&self, j: usize) -> (VarState, f64) {
        let (l, u) = (self.lower[j], self.upper[j]);
        let v = self.x[j];
        match (l.is_finite(), u.is_finite()) {
            (true, true) if (u - v).abs() < (v - l).abs() => (VarState::Upper, u),
            (true, _) => (VarState::Lower, l),
            (false, true) => (VarState::Upper, u),
            (false, false) => (VarState::Free, 0.0),
        }
    }

    /// Rebuilds the factorization from scratch, repairing a singular basis
    /// by swapping in logicals for the uncovered rows.
    fn refactor(&mut self) {
        loop {
            let cols: Vec<Vec<(usize, f64)>> =
                self.basis.iter().map(|&v| self.column(v)).collect();
            match LuFactors::factorize(self.m, &cols) {
                Ok(lu) => {
                    self.lu = lu;
                    break;
                }
                Err(sing) => {
                    log::debug!("singular basis, replacing {} columns", sing.positions.len());
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.basis[pos];
                        let (st, v) = self.nonbasic_at(out);
                        self.state[out] = st;
                        self.x[out] = v;
                        self.pos_of[out] = NONE;
                        let logical = self.n + row;
                        self.basis[pos] = logical;
                        self.state[logical] = VarState::Basic;
                        self.pos_of[logical] = pos;
                    }
                }
            }
        }
        self.recompute_basics();
    }

    fn recompute_basics(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic || self.x[j] == 0.0 {
                continue;
            }
            let v = self.x[j];
            if j < self.n {
                for (i, a) in self.a.col(j) {
                    rhs[i] -= a * v;
                }
            } else {
                rhs[j - self.n] += v;
            }
        }
        let xb = self.lu.ftran(&rhs);
        for (p, &v) in self.basis.iter().enumerate() {
            self.x[v] = xb[p];
        }
    }

    fn infeasibility(&self) -> f64 {
        let tol = self.opts.feasibility_tol;
        self.basis
            .iter()
            .map(|&v| {
                let x = self.x[v];
                if x < self.lower[v] - tol {
                    self.lower[v] - x
                } else if x > self.upper[v] + tol {
                    x - self.upper[v]
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn phase_one_costs(&self) -> Vec<f64> {
        let tol = self.opts.feasibility_tol;
        self.basis
            .iter()
            .map(|&v| {
                let x = self.x[v];
                if x < self.lower[v] - tol {
                    -1.0
                } else if x > self.upper[v] + tol {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn objective(&self) -> f64 {
        self.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    /// Picks the entering variable and its direction (+1 increase, -1
    /// decrease).
    fn price(&self, y: &[f64], phase_one: bool, bland: bool) -> Option<(usize, f64)> {
        let tol = if phase_one {
            1e-9
        } else {
            self.opts.optimality_tol
        };
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            let st = self.state[j];
            if st == VarState::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let cj = if phase_one { 0.0 } else { self.cost[j] };
            let d = cj - self.dot_col(y, j);
            let dir = match st {
                VarState::Lower if d < -tol => 1.0,
                VarState::Upper if d > tol => -1.0,
                VarState::Free if d.abs() > tol => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Step {
        let tol = self.opts.feasibility_tol;
        let range = self.upper[q] - self.lower[q];
        // exact and relaxed ratio plus target bound for each candidate
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() < PIVOT_TOL {
                continue;
            }
            let v = self.basis[p];
            let delta = -dir * a;
            let (x, l, u) = (self.x[v], self.lower[v], self.upper[v]);
            if x < l - tol {
                if delta > 0.0 {
                    let r = (l - x) / delta;
                    cands.push((p, r, r, false));
                }
            } else if x > u + tol {
                if delta < 0.0 {
                    let r = (x - u) / -delta;
                    cands.push((p, r, r, true));
                }
            } else if delta < 0.0 {
                if l.is_finite() {
                    cands.push((p, (x - l) / -delta, (x - l + tol) / -delta, false));
                }
            } else if u.is_finite() {
                cands.push((p, (u - x) / delta, (u - x + tol) / delta, true));
            }
        }
        if bland {
            let mut best: Option<(usize, f64, bool)> = None;
            for &(p, r, _, up) in &cands {
                let r = r.max(0.0);
                match best {
                    None => best = Some((p, r, up)),
                    Some((bp, br, _)) => {
                        let tie = (r - br).abs() <= 1e-12 * (1.0 + br);
                        if r < br && !tie || tie && self.basis[p] < self.basis[bp] {
                            best = Some((p, r, up));
                        }
                    }
                }
            }
            return match best {
                Some((_, t, _)) if range <= t => Step::Flip(range),
                Some((pos, t, to_upper)) => Step::Pivot { pos, t, to_upper },
                None if range.is_finite() => Step::Flip(range),
                None => Step::Unbounded,
            };
        }
        let tmax = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
        if range.is_finite() && range <= tmax {
            return Step::Flip(range);
        }
        if !tmax.is_finite() {
            return Step::Unbounded;
        }
        let mut best: Option<(usize, f64, bool)> = None;
        let mut best_alpha = 0.0;
        for &(p, r, _, up) in &cands {
            if r <= tmax && alpha[p].abs() > best_alpha {
                best_alpha = alpha[p].abs();
                best = Some((p, r.max(0.0), up));
            }
        }
        let (pos, t, to_upper) = best.expect("candidate below relaxed bound");
        Step::Pivot { pos, t, to_upper }
    }

    fn run(&mut self, max_iter: usize) -> (Status, Vec<f64>) {
        let always_bland = self.opts.pivot_rule == PivotRule::Bland;
        let mut bland = always_bland;
        let mut stall = 0usize;
        let mut last_obj = f64::INFINITY;
        let mut last_phase_one = true;
        loop {
            let infeas = self.infeasibility();
            let phase_one = infeas > 0.0;
            let c_b: Vec<f64> = if phase_one {
                self.phase_one_costs()
            } else {
                self.basis.iter().map(|&v| self.cost[v]).collect()
            };
            let y = self.lu.btran(&c_b);
            if self.iterations >= max_iter {
                return (Status::IterationLimit, y);
            }
            let obj = if phase_one { infeas } else { self.objective() };
            if phase_one != last_phase_one {
                stall = 0;
                last_obj = f64::INFINITY;
                last_phase_one = phase_one;
            }
            if obj < last_obj - 1e-12 * last_obj.abs().max(1.0) {
                stall = 0;
                bland = always_bland;
            } else {
                stall += 1;
                if stall >= self.opts.bland_after {
                    bland = true;
                }
            }
            last_obj = obj;

            let Some((q, dir)) = self.price(&y, phase_one, bland) else {
                if self.lu.n_etas() > 0 {
                    self.refactor();
                    continue;
                }
                let status = if phase_one {
                    Status::Infeasible
                } else {
                    Status::Optimal
                };
                return (status, y);
            };
            let mut aq = vec![0.0; self.m];
            for (i, v) in self.column(q) {
                aq[i] = v;
            }
            let alpha = self.lu.ftran(&aq);
            match self.ratio_test(q, dir, &alpha, bland) {
                Step::Unbounded => {
                    if self.lu.n_etas() > 0 {
                        self.refactor();
                        continue;
                    }
                    if phase_one {
                        // cannot happen in exact arithmetic; give up on this basis
                        return (Status::Infeasible, y);
                    }
                    return (Status::Unbounded, y);
                }
                Step::Flip(t) => {
                    self.advance(q, dir, t, &alpha);
                    if dir > 0.0 {
                        self.state[q] = VarState::Upper;
                        self.x[q] = self.upper[q];
                    } else {
                        self.state[q] = VarState::Lower;
                        self.x[q] = self.lower[q];
                    }
                }
                Step::Pivot { pos, t, to_upper } => {
                    self.advance(q, dir, t, &alpha);
                    let out = self.basis[pos];
                    if to_upper {
                        self.state[out] = VarState::Upper;
                        self.x[out] = self.upper[out];
                    } else {
                        self.state[out] = VarState::Lower;
                        self.x[out] = self.lower[out];
                    }
                    self.pos_of[out] = NONE;
                    self.basis[pos] = q;
                    self.pos_of[q] = pos;
                    self.state[q] = VarState::Basic;
                    self.lu.push_eta(pos, &alpha);
                    if self.lu.n_etas() >= self.opts.refactor_interval {
                        self.refactor();
                    }
                }
            }
            self.iterations += 1;
        }
    }

    fn advance(&mut self, q: usize, dir: f64, t: f64, alpha: &[f64]) {
        if t == 0.0 {
            return;
        }
        for (p, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                let v = self.basis[p];
                self.x[v] -= dir * a * t;
            }
        }
        self.x[q] += dir * t;
    }

    fn finish(&self, p: &LpProblem, status: Status, y_int: Vec<f64>) -> LpSolution {
        let mut x: Vec<f64> = self.x[..self.n].to_vec();
        for (v, c) in x.iter_mut().zip(p.columns()) {
            *v = v.clamp(c.lower, c.upper);
        }
        let (max_primal_residual, max_bound_violation) = p.residuals(&x);
        let cmax = p
            .columns()
            .iter()
            .map(|c| c.cost.abs())
            .fold(0.0, f64::max);
        let scale = if cmax > 0.0 { 1.0 / cmax } else { 1.0 };
        let sign = match p.sense() {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let row_duals = y_int.iter().map(|y| y / (sign * scale)).collect();
        let column_status = self.state[..self.n]
            .iter()
            .map(|s| match s {
                VarState::Basic => ColumnStatus::Basic,
                VarState::Lower => ColumnStatus::AtLower,
                VarState::Upper => ColumnStatus::AtUpper,
                VarState::Free => ColumnStatus::Free,
            })
            .collect();
        LpSolution {
            status,
            objective_value: p.objective_at(&x),
            x,
            iterations: self.iterations,
            max_primal_residual,
            max_bound_violation,
            row_duals,
            column_status,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Column, Row};
    use super::*;

    fn lp(sense: Sense, cols: Vec<Column>, rows: Vec<Row>) -> LpProblem {
        LpProblem::build(sense, cols, rows, 0.0).unwrap()
    }

    #[test]
    fn box_constrained_maximum() {
        let p = lp(
            Sense::Maximize,
            vec![Column::new(0.0, 1.0, 1.0), Column::new(0.0, 2.0, 1.0)],
            vec![],
        );
        let s = solve(&p, &SolveOptions::default());
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.objective_value, 3.0);
        assert_eq!(s.x, vec![1.0, 2.0]);
    }

    #[test]
    fn row_constrained_maximum() {
        // x <= 1 and y <= 2 as rows instead of bounds
        let p = lp(
            Sense::Maximize,
            vec![
                Column::new(0.0, f64::INFINITY, 1.0),
                Column::new(0.0, f64::INFINITY, 1.0),
            ],
            vec![
                Row::new(vec![(0, 1.0)], Relation::Le, 1.0),
                Row::new(vec![(1, 1.0)], Relation::Le, 2.0),
            ],
        );
        let s = solve(&p, &SolveOptions::default());
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective_value - 3.0).abs() < 1e-12);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn detects_unbounded() {
        let p = lp(
            Sense::Maximize,
            vec![Column::new(0.0, f64::INFINITY, 1.0)],
            vec![],
        );
        assert_eq!(solve(&p, &SolveOptions::default()).status, Status::Unbounded);
    }

    #[test]
    fn detects_infeasible() {
        let p = lp(
            Sense::Minimize,
            vec![Column::new(0.0, 1.0, 1.0), Column::new(0.0, 1.0, 1.0)],
            vec![Row::new(vec![(0, 1.0), (1, 1.0)], Relation::Ge, 3.0)],
        );
        assert_eq!(solve(&p, &SolveOptions::default()).status, Status::Infeasible);
    }

    #[test]
    fn equality_rows_and_free_columns() {
        // min x + y, x - y = 1, x + y >= 3, y free
        let p = lp(
            Sense::Minimize,
            vec![
                Column::new(0.0, f64::INFINITY, 1.0),
                Column::new(f64::NEG_INFINITY, f64::INFINITY, 1.0),
            ],
            vec![
                Row::new(vec![(0, 1.0), (1, -1.0)], Relation::Eq, 1.0),
                Row::new(vec![(0, 1.0), (1, 1.0)], Relation::Ge, 3.0),
            ],
        );
        let s = solve(&p, &SolveOptions::default());
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective_value - 3.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn iteration_limit_is_reported() {
        let p = lp(
            Sense::Maximize,
            vec![
                Column::new(0.0, f64::INFINITY, 1.0),
                Column::new(0.0, f64::INFINITY, 1.0),
            ],
            vec![Row::new(vec![(0, 1.0), (1, 2.0)], Relation::Le, 4.0)],
        );
        let opts = SolveOptions {
            max_iterations: Some(0),
            ..SolveOptions::default()
        };
        assert_eq!(solve(&p, &opts).status, Status::IterationLimit);
    }

    #[test]
    fn bland_rule_agrees_with_dantzig() {
        let p = lp(
            Sense::Maximize,
            vec![
                Column::new(0.0, 4.0, 3.0),
                Column::new(0.0, f64::INFINITY, 2.0),
                Column::new(-1.0, 5.0, -1.0),
            ],
            vec![
                Row::new(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Relation::Le, 6.0),
                Row::new(vec![(0, 2.0), (1, -1.0)], Relation::Ge, -2.0),
                Row::new(vec![(1, 1.0), (2, 3.0)], Relation::Eq, 2.0),
            ],
        );
        let a = solve(&p, &SolveOptions::default());
        let b = solve(
            &p,
            &SolveOptions {
                pivot_rule: PivotRule::Bland,
                ..SolveOptions::default()
            },
        );
        assert_eq!(a.status, Status::Optimal);
        assert_eq!(b.status, Status::Optimal);
        assert!((a.objective_value - b.objective_value).abs() < 1e-9);
    }
}
