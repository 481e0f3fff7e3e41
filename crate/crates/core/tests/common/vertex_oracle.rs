//! Brute-force LP oracle: enumerate every basic solution of a small LP.
//!
//! All rows and finite bounds become inequalities `a x <= b` (equalities
//! are checked as such). Every choice of `n` constraints is solved as a
//! square system; feasible solutions are vertices. Infinite bounds are
//! replaced by a box of half-width `BOX`; when doubling the box changes the
//! best value the program is reported unbounded.

use pvsmooth::lp::{LpProblem, Relation, Sense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BOX: f64 = 1e4;
const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleResult {
    Optimal(f64),
    Unbounded,
    Infeasible,
}

struct Cons {
    a: Vec<f64>,
    b: f64,
    eq: bool,
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[piv][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for c in k..n {
                    a[i][c] -= f * a[k][c];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| a[k][c] * x[c]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

fn best_vertex(p: &LpProblem, half_width: f64) -> Option<f64> {
    let n = p.n_vars();
    let mut cons = Vec::new();
    for row in p.rows() {
        let mut a = vec![0.0; n];
        for &(j, v) in &row.entries {
            a[j] = v;
        }
        match row.relation {
            Relation::Le => cons.push(Cons { a, b: row.rhs, eq: false }),
            Relation::Ge => cons.push(Cons {
                a: a.iter().map(|v| -v).collect(),
                b: -row.rhs,
                eq: false,
            }),
            Relation::Eq => cons.push(Cons { a, b: row.rhs, eq: true }),
        }
    }
    for (j, col) in p.columns().iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let lower = if col.lower.is_finite() { col.lower } else { -half_width };
        let upper = if col.upper.is_finite() { col.upper } else { half_width };
        cons.push(Cons { a: e.iter().map(|v| -v).collect(), b: -lower, eq: false });
        cons.push(Cons { a: e, b: upper, eq: false });
    }
    let sign = match p.sense() {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let mut best: Option<f64> = None;
    combinations(cons.len(), n, &mut |idx| {
        let a = idx.iter().map(|&k| cons[k].a.clone()).collect();
        let b = idx.iter().map(|&k| cons[k].b).collect();
        let Some(x) = solve_square(a, b) else { return };
        let feasible = cons.iter().all(|c| {
            let act: f64 = c.a.iter().zip(&x).map(|(a, v)| a * v).sum();
            let scale = 1.0 + c.b.abs();
            if c.eq {
                (act - c.b).abs() <= FEAS_TOL * scale
            } else {
                act <= c.b + FEAS_TOL * scale
            }
        });
        if feasible {
            let obj = p.objective_at(&x);
            if best.is_none_or(|b| sign * obj > sign * b) {
                best = Some(obj);
            }
        }
    });
    best
}

pub fn vertex_oracle(p: &LpProblem) -> OracleResult {
    match (best_vertex(p, BOX), best_vertex(p, 2.0 * BOX)) {
        (None, _) | (_, None) => OracleResult::Infeasible,
        (Some(a), Some(b)) => {
            if (a - b).abs() > 1e-7 * (1.0 + a.abs()) {
                OracleResult::Unbounded
            } else {
                OracleResult::Optimal(a)
            }
        }
    }
}

/// Random feasible LP with up to `max_vars` columns and `max_rows` rows,
/// mixing finite, half-infinite and free bounds and all three relations.
pub fn random_lp(seed: u64, max_vars: usize, max_rows: usize) -> LpProblem {
    use pvsmooth::lp::{Column, Row};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(1..=max_rows);
    let mut cols = Vec::new();
    let mut x0 = Vec::new();
    for _ in 0..n {
        let lower = match rng.gen_range(0..4) {
            0 | 1 => 0.0,
            2 => -3.0,
            _ => f64::NEG_INFINITY,
        };
        let upper = match rng.gen_range(0..3) {
            0 => f64::INFINITY,
            1 => 4.0,
            _ => 10.0,
        };
        let lo = if lower.is_finite() { lower } else { -5.0 };
        let hi = if upper.is_finite() { upper } else { lo + 8.0 };
        x0.push(rng.gen_range(lo..=hi));
        let cost = rng.gen_range(-5i32..=5) as f64;
        cols.push(Column::new(lower, upper, cost));
    }
    let mut rows = Vec::new();
    for _ in 0..m {
        let mut entries = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                let a = rng.gen_range(-5i32..=5) as f64;
                if a != 0.0 {
                    entries.push((j, a));
                }
            }
        }
        let act: f64 = entries.iter().map(|&(j, a)| a * x0[j]).sum();
        let slack = rng.gen_range(0.0..5.0);
        let (relation, rhs) = match rng.gen_range(0..5) {
            0 => (Relation::Eq, act),
            1 | 2 => (Relation::Le, act + slack),
            _ => (Relation::Ge, act - slack),
        };
        rows.push(Row::new(entries, relation, rhs));
    }
    let sense = if rng.gen_bool(0.5) { Sense::Maximize } else { Sense::Minimize };
    LpProblem::build(sense, cols, rows, 0.0).unwrap()
}
