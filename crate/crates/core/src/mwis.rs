//! Maximum-weight independent sets on small conflict graphs.

use thiserror::Error;

use crate::scalar::Scalar;

/// Largest vertex count solved exactly by default.
pub const MWIS_EXACT_BUDGET: usize = 30;
const MASK_BITS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MwisError {
    #[error("{0} vertices exceed the exact solver budget of {1}")]
    BudgetExceeded(usize, usize),
    #[error("edge ({0}, {1}) is out of range")]
    EdgeOutOfRange(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MwisSolution<T> {
    pub mass: T,
    /// Ascending vertex indices.
    pub vertices: Vec<usize>,
    /// False when the heuristic was used; `mass` is then only a lower bound.
    pub exact: bool,
}

/// Exact maximum-weight independent set. Ties within the scalar tolerance
/// are broken towards the lexicographically smallest sorted vertex list.
pub fn mwis<T: Scalar>(weights: &[T], edges: &[(usize, usize)]) -> Result<MwisSolution<T>, MwisError> {
    mwis_with(weights, edges, MWIS_EXACT_BUDGET, false)
}

/// Exact up to `budget` vertices; beyond it, greedy plus local swaps if
/// `allow_heuristic`, otherwise [`MwisError::BudgetExceeded`].
pub fn mwis_with<T: Scalar>(
    weights: &[T],
    edges: &[(usize, usize)],
    budget: usize,
    allow_heuristic: bool,
) -> Result<MwisSolution<T>, MwisError> {
    let n = weights.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(MwisError::EdgeOutOfRange(a, b));
        }
        if a != b {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    if n <= budget.min(MASK_BITS) {
        Ok(exact(weights, &adj))
    } else if allow_heuristic {
        Ok(heuristic(weights, &adj))
    } else {
        Err(MwisError::BudgetExceeded(n, budget.min(MASK_BITS)))
    }
}

fn lex_less(a: u64, b: u64) -> bool {
    // Compare the ascending index lists of two sets: the first differing
    // element decides, a proper prefix is smaller.
    let diff = a ^ b;
    if diff == 0 {
        return false;
    }
    let low = diff.trailing_zeros();
    let below = (1u64 << low) - 1;
    if a & (1 << low) != 0 {
        // `a` has the smaller element unless `b` ended before it.
        return b & !below != 0;
    }
    // `b` has the element, `a` does not: `a` is smaller only if it is a
    // prefix of `b`, i.e. has nothing above `low`.
    a & !below == 0
}

struct Search<'a, T> {
    weights: &'a [T],
    nbr: Vec<u64>,
    tol: T,
    best_mass: T,
    best_set: u64,
}

impl<T: Scalar> Search<'_, T> {
    fn offer(&mut self, set: u64, mass: T) {
        if mass > self.best_mass + self.tol || ((mass - self.best_mass).abs() <= self.tol && lex_less(set, self.best_set)) {
            self.best_mass = mass;
            self.best_set = set;
        }
    }

    fn mass_of(&self, set: u64) -> T {
        bits(set).map(|v| self.weights[v]).sum()
    }

    fn run(&mut self, chosen: u64, mass: T, free: u64) {
        let bound = mass + self.mass_of(free);
        if bound < self.best_mass - self.tol {
            return;
        }
        // Pick the free vertex of largest degree inside `free`.
        let mut pivot = None;
        let mut pivot_deg = 0;
        for v in bits(free) {
            let deg = (self.nbr[v] & free).count_ones();
            if deg > pivot_deg {
                pivot_deg = deg;
                pivot = Some(v);
            }
        }
        let Some(v) = pivot else {
            self.offer(chosen | free, bound);
            return;
        };
        let bit = 1u64 << v;
        self.run(chosen | bit, mass + self.weights[v], free & !bit & !self.nbr[v]);
        self.run(chosen, mass, free & !bit);
    }
}

fn bits(mut set: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if set == 0 {
            None
        } else {
            let v = set.trailing_zeros() as usize;
            set &= set - 1;
            Some(v)
        }
    })
}

fn exact<T: Scalar>(weights: &[T], adj: &[Vec<usize>]) -> MwisSolution<T> {
    let n = weights.len();
    let nbr: Vec<u64> = adj.iter().map(|l| l.iter().fold(0u64, |m, &u| m | (1 << u))).collect();
    let greedy = heuristic(weights, adj);
    let start = greedy.vertices.iter().fold(0u64, |m, &v| m | (1 << v));
    let mut search = Search { weights, nbr, tol: T::input_tol(), best_mass: greedy.mass, best_set: start };
    let all = if n == MASK_BITS { u64::MAX } else { (1u64 << n) - 1 };
    search.run(0, T::zero(), all);
    MwisSolution { mass: search.best_mass, vertices: bits(search.best_set).collect(), exact: true }
}

fn heuristic<T: Scalar>(weights: &[T], adj: &[Vec<usize>]) -> MwisSolution<T> {
    let n = weights.len();
    let mut order: Vec<usize> = (0..n).collect();
    let score = |v: usize| weights[v] / T::from_usize_lossy(adj[v].len() + 1);
    order.sort_by(|&a, &b| crate::scalar::cmp(&score(b), &score(a)).then(a.cmp(&b)));
    let mut inside = vec![false; n];
    for &v in &order {
        if adj[v].iter().all(|&u| !inside[u]) {
            inside[v] = true;
        }
    }
    // Insert a vertex and evict its neighbours whenever that gains mass.
    let tol = T::input_tol();
    loop {
        let mut improved = false;
        for v in 0..n {
            if inside[v] {
                continue;
            }
            let lost: T = adj[v].iter().filter(|&&u| inside[u]).map(|&u| weights[u]).sum();
            if weights[v] > lost + tol {
                for &u in &adj[v] {
                    inside[u] = false;
                }
                inside[v] = true;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    let vertices: Vec<usize> = (0..n).filter(|&v| inside[v]).collect();
    let mass = vertices.iter().map(|&v| weights[v]).sum();
    MwisSolution { mass, vertices, exact: false }
}
