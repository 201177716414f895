//! Minimum-cost assignment by shortest augmenting paths, O(n³).
//!
//! Rectangular problems are padded to square with a constant cost, which
//! leaves the optimum over real pairs unchanged. Among all optimal
//! assignments the lexicographically smallest (by row, then column) is
//! returned: every optimal assignment is a perfect matching on the edges
//! that are tight under the final dual potentials, so rows are fixed one at
//! a time to their smallest tight column that still admits such a matching.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "cost matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("cost matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged cost matrix".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }
}

/// Total cost of `pairs`, summed in order.
pub fn assignment_cost(costs: &CostMatrix, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(r, c)| costs.get(r, c)).sum()
}

const UNMATCHED: usize = usize::MAX;

/// Optimal one-to-one assignment of `min(rows, cols)` pairs, sorted by row.
pub fn hungarian_min_cost(costs: &CostMatrix) -> Vec<(usize, usize)> {
    if costs.is_empty() {
        return Vec::new();
    }
    let n = costs.rows.max(costs.cols);
    let pad = costs.data.iter().copied().fold(f64::MIN, f64::max);
    let a = |i: usize, j: usize| {
        if i < costs.rows && j < costs.cols {
            costs.get(i, j)
        } else {
            pad
        }
    };

    // Potentials and matching, 1-indexed with column 0 as the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_of_col = vec![UNMATCHED; n];
    let mut col_of_row = vec![UNMATCHED; n];
    for j in 1..=n {
        row_of_col[j - 1] = p[j] - 1;
        col_of_row[p[j] - 1] = j - 1;
    }

    let scale = costs.data.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-10 * scale * (n as f64 + 1.0);
    let tight = |i: usize, j: usize| a(i, j) - u[i + 1] - v[j + 1] <= tol;

    let mut refine = Refiner {
        n,
        real_cols: costs.cols,
        tight: &tight,
        row_of_col,
        col_of_row,
    };
    for i in 0..costs.rows {
        refine.fix_row(i);
    }

    (0..costs.rows)
        .filter_map(|i| {
            let j = refine.col_of_row[i];
            (j < costs.cols).then_some((i, j))
        })
        .collect()
}

struct Refiner<'a, F: Fn(usize, usize) -> bool> {
    n: usize,
    real_cols: usize,
    tight: &'a F,
    row_of_col: Vec<usize>,
    col_of_row: Vec<usize>,
}

impl<F: Fn(usize, usize) -> bool> Refiner<'_, F> {
    /// Moves row `i` to its smallest feasible tight real column. Rows
    /// before `i` are already fixed.
    fn fix_row(&mut self, i: usize) {
        let current = self.col_of_row[i];
        for j in 0..self.real_cols {
            if j == current {
                return;
            }
            if (self.tight)(i, j) && self.try_reroute(i, j) {
                return;
            }
        }
        // Otherwise row i stays on a padding column.
    }

    fn try_reroute(&mut self, i: usize, j: usize) -> bool {
        let displaced = self.row_of_col[j];
        if displaced < i {
            return false;
        }
        let old = self.col_of_row[i];
        let mut row_of_col = self.row_of_col.clone();
        let mut col_of_row = self.col_of_row.clone();
        row_of_col[old] = UNMATCHED;
        row_of_col[j] = i;
        col_of_row[i] = j;
        col_of_row[displaced] = UNMATCHED;
        let mut visited = vec![false; self.n];
        if self.augment(displaced, i, &mut visited, &mut row_of_col, &mut col_of_row) {
            self.row_of_col = row_of_col;
            self.col_of_row = col_of_row;
            true
        } else {
            false
        }
    }

    /// Whether `row` may be (re)matched to `col` while rows `..=fixed` keep
    /// their decisions. A fixed row on a padding column may swap to another
    /// padding column since that does not change the reported pairs.
    fn movable(&self, row: usize, col: usize, fixed: usize, col_of_row: &[usize]) -> bool {
        if row > fixed {
            return true;
        }
        if row == fixed {
            return false;
        }
        let pad = |c: usize| c >= self.real_cols && c != UNMATCHED;
        pad(col_of_row[row]) && pad(col)
    }

    fn augment(
        &self,
        row: usize,
        fixed: usize,
        visited: &mut [bool],
        row_of_col: &mut [usize],
        col_of_row: &mut [usize],
    ) -> bool {
        for col in 0..self.n {
            if visited[col] || !(self.tight)(row, col) || !self.movable(row, col, fixed, col_of_row) {
                continue;
            }
            visited[col] = true;
            let holder = row_of_col[col];
            if holder == UNMATCHED || self.augment(holder, fixed, visited, row_of_col, col_of_row) {
                row_of_col[col] = row;
                col_of_row[row] = col;
                return true;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// All injective maps from the smaller side into the larger one.
    fn brute_force(costs: &CostMatrix) -> (f64, Vec<(usize, usize)>) {
        let (r, c) = (costs.rows(), costs.cols());
        let transpose = r > c;
        let (small, large) = if transpose { (c, r) } else { (r, c) };
        let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
        let mut chosen = Vec::with_capacity(small);
        let mut used = vec![false; large];
        fn rec(
            k: usize,
            small: usize,
            large: usize,
            transpose: bool,
            costs: &CostMatrix,
            chosen: &mut Vec<usize>,
            used: &mut [bool],
            best: &mut Option<(f64, Vec<(usize, usize)>)>,
        ) {
            if k == small {
                let mut pairs: Vec<(usize, usize)> = chosen
                    .iter()
                    .enumerate()
                    .map(|(s, &l)| if transpose { (l, s) } else { (s, l) })
                    .collect();
                pairs.sort_unstable();
                let cost = assignment_cost(costs, &pairs);
                let better = match best {
                    None => true,
                    Some((bc, bp)) => cost < *bc || (cost == *bc && pairs < *bp),
                };
                if better {
                    *best = Some((cost, pairs));
                }
                return;
            }
            for l in 0..large {
                if !used[l] {
                    used[l] = true;
                    chosen.push(l);
                    rec(k + 1, small, large, transpose, costs, chosen, used, best);
                    chosen.pop();
                    used[l] = false;
                }
            }
        }
        rec(0, small, large, transpose, costs, &mut chosen, &mut used, &mut best);
        best.unwrap_or((0.0, Vec::new()))
    }

    #[test]
    fn diagonal_zero_matrix() {
        let m = CostMatrix::from_rows(&[
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ])
        .unwrap();
        assert_eq!(hungarian_min_cost(&m), vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn two_by_two_example() {
        let m = CostMatrix::from_rows(&[vec![4.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let pairs = hungarian_min_cost(&m);
        assert_eq!(pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(assignment_cost(&m, &pairs), 3.0);
    }

    #[test]
    fn empty_and_rejects_non_finite() {
        assert!(hungarian_min_cost(&CostMatrix::new(0, 0, vec![]).unwrap()).is_empty());
        assert!(hungarian_min_cost(&CostMatrix::new(0, 4, vec![]).unwrap()).is_empty());
        assert!(CostMatrix::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(CostMatrix::new(1, 2, vec![0.0]).is_err());
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let flat = CostMatrix::new(3, 3, vec![1.0; 9]).unwrap();
        assert_eq!(hungarian_min_cost(&flat), vec![(0, 0), (1, 1), (2, 2)]);
        let tall = CostMatrix::new(3, 1, vec![5.0; 3]).unwrap();
        assert_eq!(hungarian_min_cost(&tall), vec![(0, 0)]);
        let wide = CostMatrix::new(1, 3, vec![2.0, 1.0, 1.0]).unwrap();
        assert_eq!(hungarian_min_cost(&wide), vec![(0, 1)]);
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..3000 {
            let rows = rng.random_range(0..=6);
            let cols = rng.random_range(0..=6);
            // Small integer costs make ties common, exercising the tie-break.
            let integer = trial % 2 == 0;
            let data = (0..rows * cols)
                .map(|_| {
                    if integer {
                        rng.random_range(0..4) as f64
                    } else {
                        rng.random_range(-1.0..1.0)
                    }
                })
                .collect();
            let m = CostMatrix::new(rows, cols, data).unwrap();
            let pairs = hungarian_min_cost(&m);
            let (best_cost, best_pairs) = brute_force(&m);
            assert_eq!(pairs.len(), rows.min(cols));
            assert_eq!(pairs, best_pairs, "matrix {m:?}");
            assert_eq!(assignment_cost(&m, &pairs), best_cost);
        }
    }

    proptest! {
        #[test]
        fn row_and_column_shifts_keep_assignment(
            n in 1usize..6,
            seed in any::<u64>(),
            shift in -5.0..5.0f64,
            which in 0usize..6,
            column in any::<bool>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect();
            let m = CostMatrix::new(n, n, data.clone()).unwrap();
            let which = which % n;
            let shifted: Vec<f64> = data
                .iter()
                .enumerate()
                .map(|(k, &c)| {
                    let (r, cc) = (k / n, k % n);
                    if (column && cc == which) || (!column && r == which) { c + shift } else { c }
                })
                .collect();
            let s = CostMatrix::new(n, n, shifted).unwrap();
            let a = hungarian_min_cost(&m);
            let b = hungarian_min_cost(&s);
            prop_assert_eq!(&a, &b);
            prop_assert!((assignment_cost(&s, &b) - assignment_cost(&m, &a) - shift).abs() < 1e-9);
        }
    }
}
