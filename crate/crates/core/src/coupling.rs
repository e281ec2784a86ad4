//! Transport plans between finite measures, their gluing and composition,
//! relations on product spaces, and the Prokhorov metric.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::FlowNetwork;
use crate::scalar::{sorted_distinct, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CouplingError {
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("negative or non-finite plan entry at ({0}, {1})")]
    NegativeEntry(usize, usize),
    #[error("marginal mismatch at index {index}: {found} vs {expected}")]
    MarginalMismatch { index: usize, expected: f64, found: f64 },
    #[error("grid step {0} does not divide the marginals")]
    GridIncompatible(f64),
    #[error("relation pair ({0}, {1}) out of range")]
    PairOutOfRange(usize, usize),
}

/// Serialized coupling: `{"plan": [[...]], "muX": [...], "muY": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RawCoupling<T> {
    pub plan: Vec<Vec<T>>,
    #[serde(rename = "muX")]
    pub mu_x: Vec<T>,
    #[serde(rename = "muY")]
    pub mu_y: Vec<T>,
}

/// A nonnegative `rows × cols` matrix with prescribed row and column sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", into = "RawCoupling<T>", try_from = "RawCoupling<T>")]
pub struct Coupling<T: Scalar> {
    rows: usize,
    cols: usize,
    plan: Vec<T>,
    mu_x: Vec<T>,
    mu_y: Vec<T>,
}

impl<T: Scalar> From<Coupling<T>> for RawCoupling<T> {
    fn from(c: Coupling<T>) -> Self {
        RawCoupling { plan: c.plan_rows(), mu_x: c.mu_x, mu_y: c.mu_y }
    }
}

impl<T: Scalar> TryFrom<RawCoupling<T>> for Coupling<T> {
    type Error = CouplingError;

    fn try_from(raw: RawCoupling<T>) -> Result<Self, CouplingError> {
        let cols = raw.mu_y.len();
        if raw.plan.len() != raw.mu_x.len() {
            return Err(CouplingError::SizeMismatch { expected: raw.mu_x.len(), found: raw.plan.len() });
        }
        let mut flat = Vec::with_capacity(raw.plan.len() * cols);
        for row in &raw.plan {
            if row.len() != cols {
                return Err(CouplingError::SizeMismatch { expected: cols, found: row.len() });
            }
            flat.extend_from_slice(row);
        }
        Coupling::new(raw.mu_x.len(), cols, flat, raw.mu_x, raw.mu_y)
    }
}

fn check_marginal<T: Scalar>(expected: &[T], found: &[T]) -> Result<(), CouplingError> {
    for (index, (e, f)) in expected.iter().zip(found).enumerate() {
        if (*e - *f).abs() > T::marginal_tol() {
            return Err(CouplingError::MarginalMismatch { index, expected: e.as_f64(), found: f.as_f64() });
        }
    }
    Ok(())
}

impl<T: Scalar> Coupling<T> {
    /// Validates nonnegativity and both marginals (tolerance
    /// [`Scalar::MARGINAL_TOL`]).
    pub fn new(rows: usize, cols: usize, plan: Vec<T>, mu_x: Vec<T>, mu_y: Vec<T>) -> Result<Self, CouplingError> {
        if plan.len() != rows * cols {
            return Err(CouplingError::SizeMismatch { expected: rows * cols, found: plan.len() });
        }
        if mu_x.len() != rows {
            return Err(CouplingError::SizeMismatch { expected: rows, found: mu_x.len() });
        }
        if mu_y.len() != cols {
            return Err(CouplingError::SizeMismatch { expected: cols, found: mu_y.len() });
        }
        for (k, v) in plan.iter().enumerate() {
            if !(*v >= T::zero()) || !v.is_finite() {
                return Err(CouplingError::NegativeEntry(k / cols, k % cols));
            }
        }
        let c = Coupling { rows, cols, plan, mu_x, mu_y };
        check_marginal(&c.mu_x, &c.row_sums())?;
        check_marginal(&c.mu_y, &c.col_sums())?;
        Ok(c)
    }

    /// Coupling whose marginals are read off the plan.
    pub fn from_plan(rows: usize, cols: usize, plan: Vec<T>) -> Result<Self, CouplingError> {
        if plan.len() != rows * cols {
            return Err(CouplingError::SizeMismatch { expected: rows * cols, found: plan.len() });
        }
        let mu_x = (0..rows).map(|i| plan[i * cols..(i + 1) * cols].iter().copied().sum()).collect();
        let mu_y = (0..cols).map(|j| (0..rows).map(|i| plan[i * cols + j]).sum()).collect();
        Self::new(rows, cols, plan, mu_x, mu_y)
    }

    /// `(id, id)_* mu`.
    pub fn diagonal(mu: &[T]) -> Self {
        let n = mu.len();
        let mut plan = vec![T::zero(); n * n];
        for (i, m) in mu.iter().enumerate() {
            plan[i * n + i] = *m;
        }
        Coupling { rows: n, cols: n, plan, mu_x: mu.to_vec(), mu_y: mu.to_vec() }
    }

    /// `(id, φ)_* mu` for a bijection `φ`; requires `mu_y[φ(i)] = mu[i]`.
    pub fn from_map(mu: &[T], mu_y: &[T], map: &[usize]) -> Result<Self, CouplingError> {
        let n = mu.len();
        let m = mu_y.len();
        let mut plan = vec![T::zero(); n * m];
        for (i, &j) in map.iter().enumerate() {
            if j >= m {
                return Err(CouplingError::PairOutOfRange(i, j));
            }
            plan[i * m + j] += mu[i];
        }
        Self::new(n, m, plan, mu.to_vec(), mu_y.to_vec())
    }

    pub fn product(mu_x: &[T], mu_y: &[T]) -> Self {
        let plan = mu_x.iter().flat_map(|a| mu_y.iter().map(move |b| *a * *b)).collect();
        Coupling { rows: mu_x.len(), cols: mu_y.len(), plan, mu_x: mu_x.to_vec(), mu_y: mu_y.to_vec() }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.plan[i * self.cols + j]
    }

    /// Row-major plan entries.
    pub fn plan(&self) -> &[T] {
        &self.plan
    }

    pub fn plan_rows(&self) -> Vec<Vec<T>> {
        self.plan.chunks(self.cols.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn mu_x(&self) -> &[T] {
        &self.mu_x
    }

    pub fn mu_y(&self) -> &[T] {
        &self.mu_y
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self.get(i, j)).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<T> {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self.get(i, j)).sum()).collect()
    }

    /// `tr_* π`, the coupling with the factors swapped.
    pub fn transpose(&self) -> Self {
        let mut plan = vec![T::zero(); self.plan.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                plan[j * self.rows + i] = self.get(i, j);
            }
        }
        Coupling { rows: self.cols, cols: self.rows, plan, mu_x: self.mu_y.clone(), mu_y: self.mu_x.clone() }
    }

    /// π-mass of a relation.
    pub fn mass_of(&self, rel: &Relation) -> T {
        rel.iter().map(|(i, j)| self.get(i, j)).sum()
    }

    /// Replaces the plan, keeping the marginals; used by local search moves
    /// that preserve row and column sums by construction.
    pub(crate) fn with_plan_unchecked(&self, plan: Vec<T>) -> Self {
        Coupling { plan, ..self.clone() }
    }

    pub(crate) fn from_parts_unchecked(rows: usize, cols: usize, plan: Vec<T>, mu_x: Vec<T>, mu_y: Vec<T>) -> Self {
        Coupling { rows, cols, plan, mu_x, mu_y }
    }

    /// `(p × q)_* π` for index maps `p: X → X'`, `q: Y → Y'`.
    pub fn pushforward(&self, p: &[usize], rows: usize, q: &[usize], cols: usize) -> Result<Self, CouplingError> {
        let mut plan = vec![T::zero(); rows * cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let (a, b) = (p[i], q[j]);
                if a >= rows || b >= cols {
                    return Err(CouplingError::PairOutOfRange(a, b));
                }
                plan[a * cols + b] += self.get(i, j);
            }
        }
        Self::from_plan(rows, cols, plan)
    }
}

/// Support of a coupling: the pairs with mass strictly above `threshold`.
pub fn support<T: Scalar>(pi: &Coupling<T>, threshold: T) -> Relation {
    let mut pairs = BTreeSet::new();
    for i in 0..pi.rows() {
        for j in 0..pi.cols() {
            if pi.get(i, j) > threshold {
                pairs.insert((i, j));
            }
        }
    }
    Relation { rows: pi.rows(), cols: pi.cols(), pairs }
}

/// A set of index pairs in `X × Y`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relation {
    rows: usize,
    cols: usize,
    pairs: BTreeSet<(usize, usize)>,
}

impl Relation {
    pub fn new(rows: usize, cols: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, CouplingError> {
        let pairs: BTreeSet<_> = pairs.into_iter().collect();
        if let Some(&(i, j)) = pairs.iter().find(|(i, j)| *i >= rows || *j >= cols) {
            return Err(CouplingError::PairOutOfRange(i, j));
        }
        Ok(Relation { rows, cols, pairs })
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Relation { rows, cols, pairs: BTreeSet::new() }
    }

    pub fn identity(n: usize) -> Self {
        Relation { rows: n, cols: n, pairs: (0..n).map(|i| (i, i)).collect() }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Relation { rows, cols, pairs: (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).collect() }
    }

    /// Graph `{(i, map[i])}` of a map `X → Y`.
    pub fn graph(map: &[usize], cols: usize) -> Result<Self, CouplingError> {
        Self::new(map.len(), cols, map.iter().copied().enumerate())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.contains(&(i, j))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    /// `T ∘ S = {(i, k) : ∃ j, (i, j) ∈ S, (j, k) ∈ T}` with `self = S`.
    pub fn then(&self, t: &Relation) -> Result<Relation, CouplingError> {
        relation_compose(self, t)
    }

    pub fn inverse(&self) -> Relation {
        relation_inverse(self)
    }

    pub fn dom(&self) -> BTreeSet<usize> {
        relation_dom(self)
    }

    /// `Im(S) := Dom(S⁻¹)`.
    pub fn image(&self) -> BTreeSet<usize> {
        relation_dom(&self.inverse())
    }

    pub fn intersection(&self, other: &Relation) -> Relation {
        Relation {
            rows: self.rows,
            cols: self.cols,
            pairs: self.pairs.intersection(&other.pairs).copied().collect(),
        }
    }

    /// Pairs whose first index lies in `keep`.
    pub fn restrict_dom(&self, keep: &BTreeSet<usize>) -> Relation {
        Relation {
            rows: self.rows,
            cols: self.cols,
            pairs: self.pairs.iter().filter(|(i, _)| keep.contains(i)).copied().collect(),
        }
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().copied().collect()
    }
}

/// `T ∘ S := p₁₃(T • S)`.
pub fn relation_compose(s: &Relation, t: &Relation) -> Result<Relation, CouplingError> {
    if s.cols != t.rows {
        return Err(CouplingError::SizeMismatch { expected: s.cols, found: t.rows });
    }
    let mut by_first: Vec<Vec<usize>> = vec![Vec::new(); t.rows];
    for (j, k) in t.iter() {
        by_first[j].push(k);
    }
    let pairs = s.iter().flat_map(|(i, j)| by_first[j].iter().map(move |&k| (i, k))).collect();
    Ok(Relation { rows: s.rows, cols: t.cols, pairs })
}

pub fn relation_inverse(s: &Relation) -> Relation {
    Relation { rows: s.cols, cols: s.rows, pairs: s.iter().map(|(i, j)| (j, i)).collect() }
}

pub fn relation_dom(s: &Relation) -> BTreeSet<usize> {
    s.iter().map(|(i, _)| i).collect()
}

/// The gluing `τ • σ` on `X × Y × Z`, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct GluedMeasure<T> {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    data: Vec<T>,
}

impl<T: Scalar> GluedMeasure<T> {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[(i * self.ny + j) * self.nz + k]
    }

    /// `(p₁₂)_*`.
    pub fn project_12(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.nx * self.ny];
        for i in 0..self.nx {
            for j in 0..self.ny {
                out[i * self.ny + j] = (0..self.nz).map(|k| self.get(i, j, k)).sum();
            }
        }
        out
    }

    /// `(p₂₃)_*`.
    pub fn project_23(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.ny * self.nz];
        for j in 0..self.ny {
            for k in 0..self.nz {
                out[j * self.nz + k] = (0..self.nx).map(|i| self.get(i, j, k)).sum();
            }
        }
        out
    }

    /// `(p₁₃)_*`.
    pub fn project_13(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.nx * self.nz];
        for i in 0..self.nx {
            for k in 0..self.nz {
                out[i * self.nz + k] = (0..self.ny).map(|j| self.get(i, j, k)).sum();
            }
        }
        out
    }

    /// Mass of `T • S = (X × T) ∩ (S × Z)`.
    pub fn mass_of_chain(&self, s: &Relation, t: &Relation) -> T {
        let mut total = T::zero();
        for (i, j) in s.iter() {
            for k in 0..self.nz {
                if t.contains(j, k) {
                    total += self.get(i, j, k);
                }
            }
        }
        total
    }
}

fn check_shared_marginal<T: Scalar>(sigma: &Coupling<T>, tau: &Coupling<T>) -> Result<(), CouplingError> {
    if sigma.cols() != tau.rows() {
        return Err(CouplingError::SizeMismatch { expected: sigma.cols(), found: tau.rows() });
    }
    check_marginal(sigma.mu_y(), tau.mu_x())
}

/// `t[i][j][k] = σ[i][j] τ[j][k] / μ_Y[j]`; terms with `μ_Y[j] = 0`
/// contribute 0.
pub fn glue<T: Scalar>(sigma: &Coupling<T>, tau: &Coupling<T>) -> Result<GluedMeasure<T>, CouplingError> {
    check_shared_marginal(sigma, tau)?;
    let (nx, ny, nz) = (sigma.rows(), sigma.cols(), tau.cols());
    let mut data = vec![T::zero(); nx * ny * nz];
    for j in 0..ny {
        let m = sigma.mu_y()[j];
        if m <= T::zero() {
            continue;
        }
        for i in 0..nx {
            let s = sigma.get(i, j);
            if s == T::zero() {
                continue;
            }
            for k in 0..nz {
                data[(i * ny + j) * nz + k] = s * tau.get(j, k) / m;
            }
        }
    }
    Ok(GluedMeasure { nx, ny, nz, data })
}

/// `τ ∘ σ := (p₁₃)_*(τ • σ)`.
pub fn compose_couplings<T: Scalar>(sigma: &Coupling<T>, tau: &Coupling<T>) -> Result<Coupling<T>, CouplingError> {
    let glued = glue(sigma, tau)?;
    let plan = glued.project_13();
    Ok(Coupling {
        rows: sigma.rows(),
        cols: tau.cols(),
        plan,
        mu_x: sigma.mu_x().to_vec(),
        mu_y: tau.mu_y().to_vec(),
    })
}

/// `l²`-product metric on `X × Y`, indexed `(i, j) ↦ i·m + j`.
pub fn product_metric<T: Scalar>(dx: &[Vec<T>], dy: &[Vec<T>]) -> Vec<Vec<T>> {
    let (n, m) = (dx.len(), dy.len());
    let mut out = vec![vec![T::zero(); n * m]; n * m];
    for a in 0..n {
        for b in 0..m {
            for c in 0..n {
                for d in 0..m {
                    let x = dx[a][c];
                    let y = dy[b][d];
                    out[a * m + b][c * m + d] = (x * x + y * y).sqrt();
                }
            }
        }
    }
    out
}

/// Least mass off `{d <= eps}` over all couplings of `mu` and `nu`, as
/// `1 - maxflow` on the bipartite graph of admissible pairs.
fn excess_mass<T: Scalar>(mu: &[T], nu: &[T], dist: &[Vec<T>], eps: T) -> T {
    let n = mu.len();
    let (s, t) = (2 * n, 2 * n + 1);
    let mut net = FlowNetwork::new(2 * n + 2, T::lit(1e-15));
    let big = T::lit(2.0);
    for i in 0..n {
        if mu[i] > T::zero() {
            net.add_edge(s, i, mu[i]);
        }
        if nu[i] > T::zero() {
            net.add_edge(n + i, t, nu[i]);
        }
        for j in 0..n {
            if dist[i][j] <= eps {
                net.add_edge(i, n + j, big);
            }
        }
    }
    let total: T = mu.iter().copied().sum();
    (total - net.max_flow(s, t)).max(T::zero())
}

/// Prokhorov distance between two probability vectors on a common finite
/// metric space, via Strassen: the least `eps` admitting a coupling with at
/// most `eps` mass on `{d > eps}`.
///
/// The excess mass is a step function of `eps` that only changes at matrix
/// entries, so the optimum is `min_k max(v_k, excess(v_k))` over the sorted
/// distinct entries; that expression is unimodal in `k` and bisection finds
/// the crossing.
pub fn prokhorov<T: Scalar>(mu: &[T], nu: &[T], dist: &[Vec<T>]) -> Result<T, CouplingError> {
    let n = dist.len();
    for len in [mu.len(), nu.len()] {
        if len != n {
            return Err(CouplingError::SizeMismatch { expected: n, found: len });
        }
    }
    if let Some(row) = dist.iter().find(|r| r.len() != n) {
        return Err(CouplingError::SizeMismatch { expected: n, found: row.len() });
    }
    // Fixed argument order makes the result exactly symmetric.
    let swapped = mu.iter().zip(nu).map(|(a, b)| crate::scalar::cmp(a, b)).find(|o| o.is_ne()) == Some(std::cmp::Ordering::Greater);
    let transposed: Vec<Vec<T>>;
    let (mu, nu, dist) = if swapped {
        transposed = (0..n).map(|i| (0..n).map(|j| dist[j][i]).collect()).collect();
        (nu, mu, transposed.as_slice())
    } else {
        (mu, nu, dist)
    };
    let mut values: Vec<T> = dist.iter().flatten().copied().collect();
    values.push(T::zero());
    let values = sorted_distinct(values);
    let tol = T::marginal_tol();
    let excess = |k: usize| {
        let e = excess_mass(mu, nu, dist, values[k]);
        if e <= tol {
            T::zero()
        } else {
            e
        }
    };
    // First k with values[k] >= excess(k); exists because the excess vanishes
    // at the largest entry.
    let (mut lo, mut hi) = (0usize, values.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if values[mid] >= excess(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let mut best = values[lo];
    if lo > 0 {
        best = best.min(values[lo - 1].max(excess(lo - 1)));
    }
    Ok(best)
}

/// Every coupling whose entries are multiples of `grid`, in lexicographic
/// order of the integer plan. Marginals must be multiples of `grid`.
pub fn grid_couplings<T: Scalar>(mu_x: &[T], mu_y: &[T], grid: T) -> Result<Vec<Coupling<T>>, CouplingError> {
    let units = |mu: &[T]| -> Result<Vec<usize>, CouplingError> {
        mu.iter()
            .map(|m| {
                let u = (*m / grid).round();
                if !(grid > T::zero()) || (u * grid - *m).abs() > T::lit(1e-9) {
                    Err(CouplingError::GridIncompatible(grid.as_f64()))
                } else {
                    Ok(u.to_usize().unwrap_or(0))
                }
            })
            .collect()
    };
    let rows = units(mu_x)?;
    let cols = units(mu_y)?;
    let (n, m) = (rows.len(), cols.len());
    let mut out = Vec::new();
    let mut cell = vec![0usize; n * m];
    let mut col_left = cols.clone();

    #[allow(clippy::too_many_arguments)]
    fn fill<T: Scalar>(
        pos: usize,
        row_left: usize,
        rows: &[usize],
        m: usize,
        cell: &mut Vec<usize>,
        col_left: &mut Vec<usize>,
        grid: T,
        mu_x: &[T],
        mu_y: &[T],
        out: &mut Vec<Coupling<T>>,
    ) {
        let n = rows.len();
        if pos == n * m {
            let plan = cell.iter().map(|&u| T::from_usize_lossy(u) * grid).collect();
            out.push(Coupling { rows: n, cols: m, plan, mu_x: mu_x.to_vec(), mu_y: mu_y.to_vec() });
            return;
        }
        let (i, j) = (pos / m, pos % m);
        if j == m - 1 {
            // Last column takes whatever is left in the row.
            if row_left <= col_left[j] {
                cell[pos] = row_left;
                col_left[j] -= row_left;
                let next_left = if i + 1 < n { rows[i + 1] } else { 0 };
                if i + 1 < n || col_left.iter().all(|&c| c == 0) {
                    fill(pos + 1, next_left, rows, m, cell, col_left, grid, mu_x, mu_y, out);
                }
                col_left[j] += row_left;
            }
            return;
        }
        let cap = row_left.min(col_left[j]);
        for u in 0..=cap {
            cell[pos] = u;
            col_left[j] -= u;
            fill(pos + 1, row_left - u, rows, m, cell, col_left, grid, mu_x, mu_y, out);
            col_left[j] += u;
        }
    }
    if n == 0 || m == 0 {
        return Ok(out);
    }
    fill(0, rows[0], &rows, m, &mut cell, &mut col_left, grid, mu_x, mu_y, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const U2: [f64; 2] = [0.5, 0.5];

    #[test]
    fn support_examples() {
        let diag = Coupling::diagonal(&U2);
        assert_eq!(support(&diag, 0.0).pairs(), vec![(0, 0), (1, 1)]);
        let prod = Coupling::product(&U2, &U2);
        assert_eq!(support(&prod, 0.0).len(), 4);
        assert!(support(&prod, 0.3).is_empty());
    }

    #[test]
    fn rejects_bad_marginals() {
        let e = Coupling::new(2, 2, vec![0.5, 0.0, 0.0, 0.5], vec![0.5, 0.5], vec![0.6, 0.4]);
        assert!(matches!(e, Err(CouplingError::MarginalMismatch { .. })));
        let e = Coupling::new(1, 2, vec![-0.1, 1.1], vec![1.0], vec![-0.1, 1.1]);
        assert!(matches!(e, Err(CouplingError::NegativeEntry(0, 0))));
    }

    #[test]
    fn glue_examples() {
        let diag = Coupling::diagonal(&U2);
        let t = glue(&diag, &diag).unwrap();
        assert_eq!(t.get(0, 0, 0), 0.5);
        assert_eq!(t.get(1, 1, 1), 0.5);
        assert_eq!(t.get(0, 1, 1), 0.0);
        let prod = Coupling::product(&U2, &U2);
        let t = glue(&prod, &prod).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert!((t.get(i, j, k) - 0.125).abs() < 1e-15);
                }
            }
        }
        let wrong = Coupling::product(&[1.0], &[0.9, 0.1]);
        assert!(matches!(glue(&wrong, &prod), Err(CouplingError::MarginalMismatch { .. })));
    }

    #[test]
    fn compose_examples() {
        let pi = Coupling::from_plan(2, 2, vec![0.3f64, 0.2, 0.1, 0.4]).unwrap();
        let left = compose_couplings(&Coupling::diagonal(pi.mu_x()), &pi).unwrap();
        let right = compose_couplings(&pi, &Coupling::diagonal(pi.mu_y())).unwrap();
        for k in 0..4 {
            assert!((left.plan()[k] - pi.plan()[k]).abs() < 1e-15);
            assert!((right.plan()[k] - pi.plan()[k]).abs() < 1e-15);
        }
        let a = Coupling::product(&[0.2, 0.8], &U2);
        let b = Coupling::product(&U2, &[0.7, 0.3]);
        let ab = compose_couplings(&a, &b).unwrap();
        let expect = Coupling::product(&[0.2, 0.8], &[0.7, 0.3]);
        for k in 0..4 {
            assert!((ab.plan()[k] - expect.plan()[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn relation_examples() {
        let id = Relation::identity(3);
        assert_eq!(relation_compose(&id, &id).unwrap(), id);
        let s = Relation::new(2, 2, [(0, 1)]).unwrap();
        let t = Relation::new(2, 2, [(1, 0)]).unwrap();
        assert_eq!(relation_compose(&s, &t).unwrap().pairs(), vec![(0, 0)]);
        assert_eq!(s.inverse().inverse(), s);
        assert_eq!(id.dom(), (0..3).collect());
        let fan = Relation::new(1, 3, [(0, 1), (0, 2)]).unwrap();
        assert_eq!(fan.dom(), BTreeSet::from([0]));
        assert_eq!(fan.image(), BTreeSet::from([1, 2]));
        assert!(relation_compose(&fan, &s).is_err());
        assert!(Relation::new(2, 2, [(2, 0)]).is_err());
    }

    #[test]
    fn prokhorov_examples() {
        let d = vec![vec![0.0, 0.4], vec![0.4, 0.0]];
        assert_eq!(prokhorov(&U2, &U2, &d).unwrap(), 0.0);
        assert_eq!(prokhorov(&[1.0, 0.0], &[0.0, 1.0], &d).unwrap(), 0.4);
        let d1 = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!((prokhorov(&U2, &[0.9, 0.1], &d1).unwrap() - 0.4).abs() < 1e-12);
        assert!(prokhorov(&U2, &[1.0], &d1).is_err());
    }

    #[test]
    fn product_metric_examples() {
        assert_eq!(product_metric(&[vec![0.0]], &[vec![0.0]]), vec![vec![0.0]]);
        let dx = vec![vec![0.0, 3.0], vec![3.0, 0.0]];
        let dy = vec![vec![0.0, 4.0], vec![4.0, 0.0]];
        let p = product_metric(&dx, &dy);
        assert_eq!(p[0][3], 5.0);
        assert_eq!(p[1][2], 5.0);
        assert_eq!(p[0][1], 4.0);
    }

    #[test]
    fn grid_couplings_enumerate_tables() {
        let all = grid_couplings(&U2, &U2, 0.125).unwrap();
        // 2×2 tables with margins (4,4),(4,4): the top-left cell ranges 0..=4.
        assert_eq!(all.len(), 5);
        let third = [1.0 / 3.0; 3];
        assert_eq!(grid_couplings(&third, &third, 1.0 / 24.0).unwrap().len(), 1035);
        assert!(matches!(grid_couplings(&third, &third, 0.125), Err(CouplingError::GridIncompatible(_))));
    }

    #[test]
    fn pushforward_merges_mass() {
        let pi = Coupling::diagonal(&[0.25; 4]);
        let q = pi.pushforward(&[0, 1, 0, 1], 2, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(q.plan(), &[0.25, 0.25, 0.25, 0.25]);
    }
}
