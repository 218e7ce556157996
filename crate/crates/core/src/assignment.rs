//! Minimum-cost assignment and best-first enumeration of alternatives.
//!
//! [`solve`] is an O(n^3) shortest-augmenting-path Hungarian solver on a
//! square cost matrix. [`MurtyStream`] enumerates distinct solutions in
//! nondecreasing cost order by the classic partitioning scheme: emit the
//! optimum of a subproblem, then split the subproblem by successively
//! forbidding each of its pairs while forcing the preceding ones.
//!
//! Forbidden entries are encoded as costs at or above [`FORBIDDEN`];
//! solutions that would use one are treated as infeasible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Cost used for forbidden pairings. Any solution whose optimum includes an
/// entry at or above `FORBIDDEN / 2` is infeasible.
pub const FORBIDDEN: f64 = 1e15;

/// Dense square cost matrix, row-major.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    n: usize,
    costs: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            costs: vec![0.0; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.costs[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, cost: f64) {
        self.costs[row * self.n + col] = cost;
    }
}

/// An assignment: `row_to_col[r]` is the column matched to row `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub row_to_col: Vec<usize>,
    pub cost: f64,
}

impl Assignment {
    /// True when no forbidden entry was used.
    pub fn is_feasible(&self) -> bool {
        self.cost < FORBIDDEN / 2.0
    }
}

/// Minimum-cost perfect assignment on a square matrix.
///
/// Shortest-augmenting-path formulation with row/column potentials; always
/// returns a perfect matching (possibly through forbidden entries — check
/// [`Assignment::is_feasible`]).
pub fn solve(matrix: &CostMatrix) -> Assignment {
    let n = matrix.n;
    if n == 0 {
        return Assignment {
            row_to_col: Vec::new(),
            cost: 0.0,
        };
    }
    // 1-based internal arrays; col_to_row[0] is the working slot.
    let mut pot_row = vec![0.0; n + 1];
    let mut pot_col = vec![0.0; n + 1];
    let mut col_to_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        col_to_row[0] = row;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_to_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = matrix.get(i0 - 1, j - 1) - pot_row[i0] - pot_col[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    pot_row[col_to_row[j]] += delta;
                    pot_col[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if col_to_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_to_row[j0] = col_to_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[col_to_row[j] - 1] = j - 1;
    }
    let cost = row_to_col
        .iter()
        .enumerate()
        .map(|(r, &c)| matrix.get(r, c))
        .sum();
    Assignment { row_to_col, cost }
}

/// A subproblem in Murty's partitioning: the base matrix with some pairs
/// forced and one set forbidden, plus its solved optimum.
struct Node {
    matrix: CostMatrix,
    solution: Assignment,
    /// Rows whose pairing is forced in this subproblem (excluded from
    /// further partitioning).
    forced_rows: Vec<usize>,
    seq: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.solution.cost == other.solution.cost && self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on cost; deterministic FIFO on ties.
        other
            .solution
            .cost
            .total_cmp(&self.solution.cost)
            .then(other.seq.cmp(&self.seq))
    }
}

/// Streams feasible assignments of a cost matrix in nondecreasing cost order.
///
/// Partitioning branches only on pairs for which `meaningful(row, col)`
/// holds; two solutions identical on all meaningful pairs are considered the
/// same and emitted once. This presumes non-meaningful entries that can end
/// up in a solution all carry equal cost (zero, in the tracker's matrix).
pub struct MurtyStream<F> {
    heap: BinaryHeap<Node>,
    meaningful: F,
    seq: u64,
}

impl<F: Fn(usize, usize) -> bool> MurtyStream<F> {
    pub fn new(matrix: CostMatrix, meaningful: F) -> Self {
        let solution = solve(&matrix);
        let mut heap = BinaryHeap::new();
        if solution.is_feasible() {
            heap.push(Node {
                matrix,
                solution,
                forced_rows: Vec::new(),
                seq: 0,
            });
        }
        Self {
            heap,
            meaningful,
            seq: 1,
        }
    }
}

impl<F: Fn(usize, usize) -> bool> Iterator for MurtyStream<F> {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        let node = self.heap.pop()?;
        let n = node.matrix.size();

        // Partition: walk the emitted solution's meaningful pairs in row
        // order; child k forbids pair k and forces pairs 0..k.
        let mut working = node.matrix.clone();
        let mut forced: Vec<usize> = node.forced_rows.clone();
        for row in 0..n {
            if node.forced_rows.contains(&row) {
                continue;
            }
            let col = node.solution.row_to_col[row];
            if !(self.meaningful)(row, col) {
                continue;
            }
            // Child: same constraints as `working`, plus (row, col) forbidden.
            let mut child = working.clone();
            child.set(row, col, FORBIDDEN);
            let solution = solve(&child);
            if solution.is_feasible() {
                self.heap.push(Node {
                    matrix: child,
                    solution,
                    forced_rows: forced.clone(),
                    seq: self.seq,
                });
                self.seq += 1;
            }
            // Force (row, col) for subsequent children.
            for j in 0..n {
                if j != col {
                    working.set(row, j, FORBIDDEN);
                }
            }
            forced.push(row);
        }

        Some(node.solution)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix_from(rows: &[&[f64]]) -> CostMatrix {
        let n = rows.len();
        let mut m = CostMatrix::new(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n);
            for (j, &c) in row.iter().enumerate() {
                m.set(i, j, c);
            }
        }
        m
    }

    fn brute_force_min(matrix: &CostMatrix) -> f64 {
        fn recurse(m: &CostMatrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == m.size() {
                *best = best.min(acc);
                return;
            }
            for col in 0..m.size() {
                if !used[col] {
                    used[col] = true;
                    recurse(m, row + 1, used, acc + m.get(row, col), best);
                    used[col] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        recurse(matrix, 0, &mut vec![false; matrix.size()], 0.0, &mut best);
        best
    }

    #[test]
    fn solve_matches_brute_force_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(1..=6);
            let mut m = CostMatrix::new(n);
            for i in 0..n {
                for j in 0..n {
                    m.set(i, j, rng.gen_range(0.0..10.0));
                }
            }
            let got = solve(&m);
            let want = brute_force_min(&m);
            assert!((got.cost - want).abs() < 1e-9, "got {} want {}", got.cost, want);
        }
    }

    #[test]
    fn solve_crossed_pair() {
        let m = matrix_from(&[&[0.1, 0.4], &[0.4, 0.1]]);
        let got = solve(&m);
        assert_eq!(got.row_to_col, vec![0, 1]);
        assert!((got.cost - 0.2).abs() < 1e-12);
    }

    #[test]
    fn solve_respects_forbidden() {
        let m = matrix_from(&[&[FORBIDDEN, 1.0], &[2.0, FORBIDDEN]]);
        let got = solve(&m);
        assert_eq!(got.row_to_col, vec![1, 0]);
        assert!(got.is_feasible());
    }

    #[test]
    fn murty_enumerates_all_permutations_in_order() {
        let m = matrix_from(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[3.0, 6.0, 9.0]]);
        let stream = MurtyStream::new(m, |_, _| true);
        let costs: Vec<f64> = stream.map(|a| a.cost).collect();
        assert_eq!(costs.len(), 6); // all 3! permutations, each exactly once
        for w in costs.windows(2) {
            assert!(w[0] <= w[1] + 1e-12, "not sorted: {costs:?}");
        }
        assert!((costs[0] - 10.0).abs() < 1e-12); // 3 + 4 + 3, the anti-diagonal
        assert!((costs[5] - 14.0).abs() < 1e-12); // 1 + 4 + 9
        assert!((costs.iter().sum::<f64>() - 72.0).abs() < 1e-12);
    }

    #[test]
    fn murty_collapses_non_meaningful_permutations() {
        // Only row 0's column choice matters; rows 1-2 are interchangeable
        // dummies. The stream must emit one solution per distinct row-0 pair.
        let m = matrix_from(&[&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        let stream = MurtyStream::new(m, |row, _| row == 0);
        let solutions: Vec<Assignment> = stream.collect();
        assert_eq!(solutions.len(), 3);
        let mut cols: Vec<usize> = solutions.iter().map(|a| a.row_to_col[0]).collect();
        cols.sort();
        assert_eq!(cols, vec![0, 1, 2]);
    }

    #[test]
    fn murty_empty_matrix() {
        let stream = MurtyStream::new(CostMatrix::new(0), |_, _| true);
        let solutions: Vec<Assignment> = stream.collect();
        assert_eq!(solutions.len(), 1);
        assert_eq!(solutions[0].cost, 0.0);
    }

    #[test]
    fn murty_skips_infeasible_children() {
        let m = matrix_from(&[&[1.0, FORBIDDEN], &[FORBIDDEN, 1.0]]);
        let stream = MurtyStream::new(m, |_, _| true);
        let solutions: Vec<Assignment> = stream.collect();
        assert_eq!(solutions.len(), 1);
    }
}
