//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! Factorization is right-looking Gaussian elimination. Pivots are picked
//! by Markowitz count among candidates passing a column threshold test
//! (`|a_ij| >= THRESHOLD * max_k |a_kj|`), searching rows and columns in
//! order of increasing count. The result is stored as a sequence of row
//! elimination multipliers (`L`) and the eliminated pivot rows (`U`).
//! Basis columns are addressed by position `0..m`, rows by row index.

const NONE: usize = usize::MAX;
const THRESHOLD: f64 = 0.1;
const ABS_PIVOT_TOL: f64 = 1e-11;
const SEARCH_LIMIT: usize = 4;

#[derive(Clone, Debug)]
struct LEta {
    row: usize,
    entries: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
struct URow {
    row: usize,
    col: usize,
    diag: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

/// Basis positions and rows left without a pivot when the basis is
/// (numerically) singular. Both lists have the same length.
#[derive(Clone, Debug)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct LuFactors {
    m: usize,
    l_etas: Vec<LEta>,
    u_rows: Vec<URow>,
    etas: Vec<Eta>,
}

/// Doubly linked lists of items keyed by their current nonzero count.
struct Buckets {
    head: Vec<usize>,
    next: Vec<usize>,
    prev: Vec<usize>,
    count: Vec<usize>,
}

impl Buckets {
    fn new(n_items: usize, max_count: usize) -> Self {
        Buckets {
            head: vec![NONE; max_count + 2],
            next: vec![NONE; n_items],
            prev: vec![NONE; n_items],
            count: vec![NONE; n_items],
        }
    }

    fn insert(&mut self, item: usize, count: usize) {
        let count = count.min(self.head.len() - 1);
        let h = self.head[count];
        self.next[item] = h;
        self.prev[item] = NONE;
        if h != NONE {
            self.prev[h] = item;
        }
        self.head[count] = item;
        self.count[item] = count;
    }

    fn remove(&mut self, item: usize) {
        let c = self.count[item];
        if c == NONE {
            return;
        }
        let (p, n) = (self.prev[item], self.next[item]);
        if p != NONE {
            self.next[p] = n;
        } else {
            self.head[c] = n;
        }
        if n != NONE {
            self.prev[n] = p;
        }
        self.count[item] = NONE;
    }

    fn update(&mut self, item: usize, count: usize) {
        if self.count[item] != NONE {
            self.remove(item);
            self.insert(item, count);
        }
    }
}

struct Active {
    rows: Vec<Vec<(usize, f64)>>,
    col_rows: Vec<Vec<usize>>,
    row_b: Buckets,
    col_b: Buckets,
}

impl Active {
    fn value(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|e| e.0 == j)
            .map(|e| e.1)
            .unwrap_or(0.0)
    }

    fn col_max(&self, j: usize) -> f64 {
        self.col_rows[j]
            .iter()
            .map(|&i| self.value(i, j).abs())
            .fold(0.0, f64::max)
    }

    fn find_pivot(&self, m: usize) -> Option<(usize, usize)> {
        // (cost, row, col)
        let mut best: Option<(usize, usize, usize)> = None;
        let mut examined = 0;
        for cnt in 1..=m {
            let mut j = self.col_b.head[cnt];
            while j != NONE {
                let cmax = self.col_max(j);
                for &i in &self.col_rows[j] {
                    let v = self.value(i, j).abs();
                    if v >= ABS_PIVOT_TOL && v >= THRESHOLD * cmax {
                        let cost = (cnt - 1) * (self.rows[i].len() - 1);
                        if best.is_none_or(|b| cost < b.0) {
                            best = Some((cost, i, j));
                        }
                    }
                }
                examined += 1;
                if let Some(b) = best {
                    if examined >= SEARCH_LIMIT || b.0 <= (cnt - 1) * (cnt - 1) {
                        return Some((b.1, b.2));
                    }
                }
                j = self.col_b.next[j];
            }
            let mut i = self.row_b.head[cnt];
            while i != NONE {
                for &(j, v) in &self.rows[i] {
                    let v = v.abs();
                    if v < ABS_PIVOT_TOL {
                        continue;
                    }
                    let cc = self.col_rows[j].len();
                    let cost = (cc - 1) * (cnt - 1);
                    if best.is_none_or(|b| cost < b.0) && v >= THRESHOLD * self.col_max(j) {
                        best = Some((cost, i, j));
                    }
                }
                examined += 1;
                if let Some(b) = best {
                    if examined >= SEARCH_LIMIT || b.0 <= cnt * (cnt - 1) {
                        return Some((b.1, b.2));
                    }
                }
                i = self.row_b.next[i];
            }
            if let Some(b) = best {
                if b.0 <= cnt * cnt {
                    return Some((b.1, b.2));
                }
            }
        }
        best.map(|b| (b.1, b.2))
    }
}

impl LuFactors {
    /// Factorizes the `m x m` matrix given by its columns (sparse
    /// `(row, value)` lists, one per basis position).
    pub(crate) fn factorize(m: usize, cols: &[Vec<(usize, f64)>]) -> Result<LuFactors, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                if v != 0.0 {
                    rows[i].push((j, v));
                    col_rows[j].push(i);
                }
            }
        }
        let mut row_b = Buckets::new(m, m);
        let mut col_b = Buckets::new(m, m);
        for i in 0..m {
            row_b.insert(i, rows[i].len());
        }
        for j in 0..m {
            col_b.insert(j, col_rows[j].len());
        }
        let mut act = Active {
            rows,
            col_rows,
            row_b,
            col_b,
        };

        let mut l_etas = Vec::new();
        let mut u_rows = Vec::with_capacity(m);
        let mut in_prow = vec![NONE; m];
        let mut seen = vec![NONE; m];
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut w = vec![0.0; m];

        for step in 0..m {
            let Some((r, j)) = act.find_pivot(m) else {
                return Err(Singular {
                    positions: (0..m).filter(|&c| !col_done[c]).collect(),
                    rows: (0..m).filter(|&i| !row_done[i]).collect(),
                });
            };
            let prow = std::mem::take(&mut act.rows[r]);
            let p = prow.iter().find(|e| e.0 == j).map(|e| e.1).unwrap();
            for &(c, v) in &prow {
                if c == j {
                    continue;
                }
                let list = &mut act.col_rows[c];
                if let Some(pos) = list.iter().position(|&i| i == r) {
                    list.swap_remove(pos);
                }
                let len = list.len();
                act.col_b.update(c, len);
                w[c] = v;
                in_prow[c] = step;
            }
            let col_list = std::mem::take(&mut act.col_rows[j]);
            let mut l_entries = Vec::new();
            for &i in &col_list {
                if i == r {
                    continue;
                }
                let row = &mut act.rows[i];
                let pos = row.iter().position(|e| e.0 == j).unwrap();
                let a = row.swap_remove(pos).1;
                let l = a / p;
                l_entries.push((i, l));
                for e in row.iter_mut() {
                    if in_prow[e.0] == step {
                        e.1 -= l * w[e.0];
                        seen[e.0] = i;
                    }
                }
                for &(c, v) in &prow {
                    if c != j && seen[c] != i {
                        act.rows[i].push((c, -l * v));
                        act.col_rows[c].push(i);
                        let len = act.col_rows[c].len();
                        act.col_b.update(c, len);
                    }
                }
                // reset markers for the next row
                for &(c, _) in &prow {
                    if seen[c] == i {
                        seen[c] = NONE;
                    }
                }
                let len = act.rows[i].len();
                act.row_b.update(i, len);
            }
            act.row_b.remove(r);
            act.col_b.remove(j);
            row_done[r] = true;
            col_done[j] = true;
            if !l_entries.is_empty() {
                l_etas.push(LEta {
                    row: r,
                    entries: l_entries,
                });
            }
            u_rows.push(URow {
                row: r,
                col: j,
                diag: p,
                entries: prow.into_iter().filter(|e| e.0 != j).collect(),
            });
        }
        Ok(LuFactors {
            m,
            l_etas,
            u_rows,
            etas: Vec::new(),
        })
    }

    pub(crate) fn n_etas(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B z = b`. Input is indexed by row, output by basis position.
    pub(crate) fn ftran(&self, b: &[f64]) -> Vec<f64> {
        let mut b = b.to_vec();
        for le in &self.l_etas {
            let br = b[le.row];
            if br != 0.0 {
                for &(i, l) in &le.entries {
                    b[i] -= l * br;
                }
            }
        }
        let mut z = vec![0.0; self.m];
        for u in self.u_rows.iter().rev() {
            let mut s = b[u.row];
            for &(c, v) in &u.entries {
                s -= v * z[c];
            }
            z[u.col] = s / u.diag;
        }
        for eta in &self.etas {
            let zp = z[eta.pos];
            if zp != 0.0 {
                let zp = zp / eta.pivot;
                z[eta.pos] = zp;
                for &(i, a) in &eta.entries {
                    z[i] -= a * zp;
                }
            }
        }
        z
    }

    /// Solves `B^T y = c`. Input is indexed by basis position, output by row.
    pub(crate) fn btran(&self, c: &[f64]) -> Vec<f64> {
        let mut c = c.to_vec();
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * c[i];
            }
            c[eta.pos] = s / eta.pivot;
        }
        let mut acc = vec![0.0; self.m];
        let mut w = vec![0.0; self.m];
        for u in &self.u_rows {
            let wr = (c[u.col] - acc[u.col]) / u.diag;
            w[u.row] = wr;
            if wr != 0.0 {
                for &(cc, v) in &u.entries {
                    acc[cc] += v * wr;
                }
            }
        }
        for le in self.l_etas.iter().rev() {
            let mut s = w[le.row];
            for &(i, l) in &le.entries {
                s -= l * w[i];
            }
            w[le.row] = s;
        }
        w
    }

    /// Records the basis change that puts a column with `alpha = B^-1 a_q`
    /// into position `pos`.
    pub(crate) fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a != 0.0)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_cols(a: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        let m = a.len();
        (0..m)
            .map(|j| {
                (0..m)
                    .filter(|&i| a[i][j] != 0.0)
                    .map(|i| (i, a[i][j]))
                    .collect()
            })
            .collect()
    }

    fn matvec(a: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|row| row.iter().zip(z).map(|(x, y)| x * y).sum())
            .collect()
    }

    fn mat_t_vec(a: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let m = a.len();
        (0..m).map(|j| (0..m).map(|i| a[i][j] * y[i]).sum()).collect()
    }

    fn sample() -> Vec<Vec<f64>> {
        vec![
            vec![4.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 2.0, 1.0],
            vec![1.0, 3.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, -2.0],
        ]
    }

    #[test]
    fn solves_both_directions() {
        let a = sample();
        let lu = LuFactors::factorize(4, &dense_to_cols(&a)).unwrap();
        let b = vec![1.0, -2.0, 0.5, 3.0];
        let z = lu.ftran(&b);
        for (x, y) in matvec(&a, &z).iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let y = lu.btran(&b);
        for (x, y) in mat_t_vec(&a, &y).iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_update_matches_fresh_factorization() {
        let mut a = sample();
        let mut lu = LuFactors::factorize(4, &dense_to_cols(&a)).unwrap();
        let new_col = vec![1.0, 1.0, 1.0, 1.0];
        let alpha = lu.ftran(&new_col);
        lu.push_eta(1, &alpha);
        for (i, row) in a.iter_mut().enumerate() {
            row[1] = new_col[i];
        }
        let b = vec![0.3, 1.0, -1.0, 2.0];
        let z = lu.ftran(&b);
        for (x, y) in matvec(&a, &z).iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let y = lu.btran(&b);
        for (x, y) in mat_t_vec(&a, &y).iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn reports_singular_columns() {
        let a = vec![
            vec![1.0, 2.0, 0.0],
            vec![2.0, 4.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let err = LuFactors::factorize(3, &dense_to_cols(&a)).unwrap_err();
        assert_eq!(err.positions.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }

    #[test]
    fn random_sparse_matrices_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = rng.gen_range(1..30);
            let mut a = vec![vec![0.0; m]; m];
            for (i, row) in a.iter_mut().enumerate() {
                row[i] = rng.gen_range(1.0..3.0);
                for _ in 0..2 {
                    let j = rng.gen_range(0..m);
                    row[j] += rng.gen_range(-1.0..1.0);
                }
            }
            let Ok(lu) = LuFactors::factorize(m, &dense_to_cols(&a)) else {
                continue;
            };
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let z = lu.ftran(&b);
            for (x, y) in matvec(&a, &z).iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
            let y = lu.btran(&b);
            for (x, y) in mat_t_vec(&a, &y).iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
