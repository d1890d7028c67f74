use std::fmt::Debug;
use std::ops::{Add, Neg, Sub};

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Scalar usable as an assignment cost. Exact types compare sums exactly;
/// floating point allows a small relative slack when detecting ties.
pub trait Cost: Copy + PartialOrd + Debug + Add<Output = Self> + Sub<Output = Self> + Neg<Output = Self> {
    fn zero() -> Self;

    fn is_valid(&self) -> bool {
        true
    }

    fn magnitude(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }

    /// Difference below which two totals of `terms` entries bounded by
    /// `max_abs` are considered equal.
    fn tie_slack(_max_abs: Self, _terms: usize) -> Self {
        Self::zero()
    }
}

impl Cost for f64 {
    fn zero() -> Self {
        0.0
    }

    fn is_valid(&self) -> bool {
        self.is_finite()
    }

    fn tie_slack(max_abs: Self, terms: usize) -> Self {
        1e-9 * (1.0 + max_abs * terms as f64)
    }
}

impl Cost for i64 {
    fn zero() -> Self {
        0
    }
}

impl Cost for Ratio<i64> {
    fn zero() -> Self {
        Ratio::from_integer(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    #[default]
    Minimize,
    Maximize,
}

/// Dense rectangular cost matrix plus optimization direction.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProblem<T = f64> {
    rows: usize,
    cols: usize,
    cost: Vec<T>,
    objective: Objective,
}

/// Chosen `(row, col)` pairs sorted by row, and their summed cost in the
/// caller's units (not negated for maximization).
#[derive(Debug, Clone, PartialEq)]
pub struct Matching<T = f64> {
    pub pairs: Vec<(usize, usize)>,
    pub total: T,
}

impl<T: Cost> AssignmentProblem<T> {
    pub fn new(cost: &[Vec<T>], objective: Objective) -> Result<Self> {
        let rows = cost.len();
        let cols = cost.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::BadCost("cost matrix must have at least one row and one column".into()));
        }
        if let Some(r) = cost.iter().position(|r| r.len() != cols) {
            return Err(Error::BadCost(format!("row {r} has {} entries, expected {cols}", cost[r].len())));
        }
        Self::from_fn(rows, cols, |i, j| cost[i][j], objective)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T, objective: Objective) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::BadCost("cost matrix must have at least one row and one column".into()));
        }
        let mut cost = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let c = f(i, j);
                if !c.is_valid() {
                    return Err(Error::BadCost(format!("entry ({i}, {j}) is {c:?}")));
                }
                cost.push(c);
            }
        }
        Ok(AssignmentProblem { rows, cols, cost, objective })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn cost(&self, i: usize, j: usize) -> T {
        self.cost[i * self.cols + j]
    }

    fn min_cost(&self, i: usize, j: usize) -> T {
        match self.objective {
            Objective::Minimize => self.cost(i, j),
            Objective::Maximize => -self.cost(i, j),
        }
    }
}

/// Minimum-cost matching of size `min(|rows|, |cols|)` between the given
/// index subsets, via the shortest augmenting path method with potentials.
fn hungarian<T: Cost>(p: &AssignmentProblem<T>, rows: &[usize], cols: &[usize]) -> (T, Vec<(usize, usize)>) {
    if rows.is_empty() || cols.is_empty() {
        return (T::zero(), Vec::new());
    }
    let transpose = rows.len() > cols.len();
    let (n, m) = if transpose { (cols.len(), rows.len()) } else { (rows.len(), cols.len()) };
    let a = |i: usize, j: usize| {
        if transpose {
            p.min_cost(rows[j - 1], cols[i - 1])
        } else {
            p.min_cost(rows[i - 1], cols[j - 1])
        }
    };

    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        // None stands for +infinity
        let mut minv: Vec<Option<T>> = vec![None; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta: Option<T> = None;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a(i0, j) - u[i0] - v[j];
                if minv[j].is_none_or(|mv| cur < mv) {
                    minv[j] = Some(cur);
                    way[j] = j0;
                }
                if delta.is_none_or(|d| minv[j].unwrap() < d) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            let delta = delta.expect("a free column always exists while rows <= cols");
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] = u[owner[j]] + delta;
                    v[j] = v[j] - delta;
                } else if let Some(mv) = minv[j] {
                    minv[j] = Some(mv - delta);
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

    let mut pairs = Vec::with_capacity(n);
    let mut total = T::zero();
    for j in 1..=m {
        if owner[j] != 0 {
            let (r, c) = if transpose { (rows[j - 1], cols[owner[j] - 1]) } else { (rows[owner[j] - 1], cols[j - 1]) };
            total = total + p.min_cost(r, c);
            pairs.push((r, c));
        }
    }
    pairs.sort_unstable();
    (total, pairs)
}

/// Optimal matching of size `min(n, m)`. Among optimal matchings the
/// lexicographically smallest row-sorted pair list is returned, so equal
/// inputs always give equal outputs regardless of solver internals.
/// Floating-point totals within a relative `1e-9` of each other count as
/// tied; exact cost types compare exactly.
pub fn solve_assignment<T: Cost>(p: &AssignmentProblem<T>) -> Matching<T> {
    let all_rows: Vec<usize> = (0..p.rows).collect();
    let all_cols: Vec<usize> = (0..p.cols).collect();
    let (optimum, _) = hungarian(p, &all_rows, &all_cols);
    let scale = p.cost.iter().fold(T::zero(), |s, c| if c.magnitude() > s { c.magnitude() } else { s });
    let slack = T::tie_slack(scale, p.rows.min(p.cols));

    let mut free_cols = all_cols;
    let mut needed = p.rows.min(p.cols);
    let mut acc = T::zero();
    let mut pairs = Vec::with_capacity(needed);
    for i in 0..p.rows {
        if needed == 0 {
            break;
        }
        let rest_rows: Vec<usize> = (i + 1..p.rows).collect();
        let mut chosen = None;
        if rest_rows.len() >= needed - 1 {
            for (k, &j) in free_cols.iter().enumerate() {
                let c = p.min_cost(i, j);
                let rest = if needed == 1 {
                    T::zero()
                } else {
                    let mut cols = free_cols.clone();
                    cols.remove(k);
                    hungarian(p, &rest_rows, &cols).0
                };
                if acc + c + rest <= optimum + slack {
                    chosen = Some((k, j, c));
                    break;
                }
            }
        }
        if let Some((k, j, c)) = chosen {
            free_cols.remove(k);
            acc = acc + c;
            needed -= 1;
            pairs.push((i, j));
        }
    }
    debug_assert_eq!(pairs.len(), p.rows.min(p.cols));
    let total = pairs.iter().fold(T::zero(), |t, &(i, j)| t + p.cost(i, j));
    Matching { pairs, total }
}
