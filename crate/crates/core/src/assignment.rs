//! Linear assignment and Murty's ranked assignment over rectangular cost
//! matrices.
//!
//! Every row must be assigned to a distinct column, so a problem needs
//! `rows <= cols`. Forbidden pairings are `f64::INFINITY`; internally they
//! become [`FORBIDDEN`] so the shortest-augmenting-path arithmetic stays
//! finite, and a solution touching one is reported infeasible.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::{Error, Result};

/// Internal stand-in for a forbidden pairing.
pub const FORBIDDEN: f64 = 1e30;

/// Dense row-major cost matrix. Non-finite entries are forbidden pairings.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    /// A matrix with every pairing forbidden.
    pub fn forbidden(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![f64::INFINITY; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Contract("cost matrix rows must have equal length"));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
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

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    fn is_allowed(&self, row: usize, col: usize) -> bool {
        let v = self.get(row, col);
        v.is_finite() && v < FORBIDDEN
    }
}

/// One complete row-to-column assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row.
    pub columns: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost assignment of every row to a distinct column.
pub fn solve_lap(cost: &CostMatrix) -> Result<Assignment> {
    let n = cost.rows;
    let m = cost.cols;
    if n > m {
        return Err(Error::Infeasible);
    }
    if n == 0 {
        return Ok(Assignment { columns: Vec::new(), cost: 0.0 });
    }
    let entry = |i: usize, j: usize| {
        let v = cost.get(i, j);
        if v.is_finite() && v < FORBIDDEN {
            v
        } else {
            FORBIDDEN
        }
    };

    // Shortest augmenting paths with row/column potentials; column 0 and
    // row 0 are virtual, so real indices are shifted by one.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut min_to = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        min_to.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = entry(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            if delta >= FORBIDDEN * 0.5 {
                // every remaining path goes through a forbidden pairing
                return Err(Error::Infeasible);
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut columns = vec![usize::MAX; n];
    for j in 1..=m {
        if owner[j] != 0 {
            columns[owner[j] - 1] = j - 1;
        }
    }
    let mut total = 0.0;
    for (i, &j) in columns.iter().enumerate() {
        if !cost.is_allowed(i, j) {
            return Err(Error::Infeasible);
        }
        total += cost.get(i, j);
    }
    Ok(Assignment { columns, cost: total })
}

/// A Murty subproblem: the base matrix restricted by forced and forbidden
/// pairings, with its optimal assignment.
struct Node {
    solution: Assignment,
    /// Rows whose column is fixed, in fixing order.
    forced: Vec<(usize, usize)>,
    forbidden: Vec<(usize, usize)>,
}

impl Node {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.solution
            .cost
            .total_cmp(&other.solution.cost)
            .then_with(|| self.solution.columns.cmp(&other.solution.columns))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // reversed: BinaryHeap is a max-heap and we pop the cheapest first
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

fn constrained(base: &CostMatrix, forced: &[(usize, usize)], forbidden: &[(usize, usize)]) -> CostMatrix {
    let mut c = base.clone();
    for &(r, col) in forbidden {
        c.set(r, col, f64::INFINITY);
    }
    for &(r, col) in forced {
        for j in 0..c.cols {
            if j != col {
                c.set(r, j, f64::INFINITY);
            }
        }
        for i in 0..c.rows {
            if i != r {
                c.set(i, col, f64::INFINITY);
            }
        }
    }
    c
}

/// The `k` cheapest distinct assignments in nondecreasing cost order, by
/// Murty's partitioning. Fewer are returned when fewer exist; an infeasible
/// problem yields an empty list. Equal costs come out in lexicographic order
/// of the node optima, which keeps the output deterministic.
pub fn murty_kbest(cost: &CostMatrix, k: usize) -> Vec<Assignment> {
    if k == 0 {
        return Vec::new();
    }
    // drop columns no row may use; they cannot appear in any solution
    let live: Vec<usize> = (0..cost.cols).filter(|&j| (0..cost.rows).any(|i| cost.is_allowed(i, j))).collect();
    let compact = if live.len() == cost.cols {
        cost.clone()
    } else {
        let mut c = CostMatrix::forbidden(cost.rows, live.len());
        for i in 0..cost.rows {
            for (jj, &j) in live.iter().enumerate() {
                c.set(i, jj, cost.get(i, j));
            }
        }
        c
    };

    let mut out = Vec::with_capacity(k.min(64));
    let Ok(best) = solve_lap(&compact) else {
        return out;
    };
    let mut heap = BinaryHeap::new();
    heap.push(Node { solution: best, forced: Vec::new(), forbidden: Vec::new() });
    while let Some(node) = heap.pop() {
        let Node { solution, forced, forbidden } = node;
        let mut fixed = forced.clone();
        for row in 0..compact.rows {
            if forced.iter().any(|&(r, _)| r == row) {
                continue;
            }
            let mut child_forbidden = forbidden.clone();
            child_forbidden.push((row, solution.columns[row]));
            let matrix = constrained(&compact, &fixed, &child_forbidden);
            if let Ok(child) = solve_lap(&matrix) {
                let mut child = child;
                // report the cost on the unconstrained matrix
                child.cost = child.columns.iter().enumerate().map(|(i, &j)| compact.get(i, j)).sum();
                heap.push(Node { solution: child, forced: fixed.clone(), forbidden: child_forbidden });
            }
            fixed.push((row, solution.columns[row]));
        }
        let columns = solution.columns.iter().map(|&j| live[j]).collect();
        out.push(Assignment { columns, cost: solution.cost });
        if out.len() == k {
            break;
        }
    }
    out
}
