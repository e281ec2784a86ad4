//! The equivariant box distance.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::{grid_couplings, support, Coupling, CouplingError, Relation};
use crate::group::{enumerate_aut, normalizer, MMAction, Perm};
use crate::mmspace::FiniteMMSpace;
use crate::mwis::{mwis_with, MwisError, MWIS_EXACT_BUDGET};
use crate::scalar::{sorted_distinct, Scalar};
use crate::search::{minimize_over_couplings, SearchConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoxError {
    #[error("map of length {found} does not act on a space of {expected} points")]
    MapMismatch { expected: usize, found: usize },
    #[error("coupling is {rows}×{cols} but the spaces have {n} and {m} points")]
    SpaceMismatch { rows: usize, cols: usize, n: usize, m: usize },
    #[error("support of {0} pairs exceeds the exact independent-set budget")]
    TooLarge(usize),
    #[error("oracle instance with {0} cells exceeds the enumeration budget")]
    OracleTooLarge(usize),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
}

impl From<MwisError> for BoxError {
    fn from(e: MwisError) -> Self {
        match e {
            MwisError::BudgetExceeded(n, _) => BoxError::TooLarge(n),
            MwisError::EdgeOutOfRange(..) => unreachable!("conflict graphs are built in range"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    X,
    Y,
}

/// A self-map of one of the two spaces.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MapPair {
    pub side: Side,
    pub perm: Perm,
}

impl MapPair {
    pub fn on_x(perm: Perm) -> Self {
        MapPair { side: Side::X, perm }
    }

    pub fn on_y(perm: Perm) -> Self {
        MapPair { side: Side::Y, perm }
    }

    /// `f_γ(p, q)` for `p = (x₁, y₁)`, `q = (x₂, y₂)`.
    #[inline]
    fn eval<T: Scalar>(&self, p: (usize, usize), q: (usize, usize), x: &FiniteMMSpace<T>, y: &FiniteMMSpace<T>) -> T {
        match self.side {
            Side::X => x.d(self.perm.apply(p.0), q.0),
            Side::Y => y.d(self.perm.apply(p.1), q.1),
        }
    }

    fn check<T: Scalar>(&self, x: &FiniteMMSpace<T>, y: &FiniteMMSpace<T>) -> Result<(), BoxError> {
        let expected = match self.side {
            Side::X => x.len(),
            Side::Y => y.len(),
        };
        if self.perm.len() == expected {
            Ok(())
        } else {
            Err(BoxError::MapMismatch { expected, found: self.perm.len() })
        }
    }
}

/// `sup_{p, q ∈ S} |f_{γ₁}(p, q) − f_{γ₂}(p, q)|`, with `d^∅ = 0`.
pub fn d_s<T: Scalar>(g1: &MapPair, g2: &MapPair, s: &Relation, x: &FiniteMMSpace<T>, y: &FiniteMMSpace<T>) -> Result<T, BoxError> {
    g1.check(x, y)?;
    g2.check(x, y)?;
    let pts = s.pairs();
    let mut worst = T::zero();
    for &p in &pts {
        for &q in &pts {
            worst = worst.max((g1.eval(p, q, x, y) - g2.eval(p, q, x, y)).abs());
        }
    }
    Ok(worst)
}

/// The optimal subset behind a `d^π` value.
#[derive(Debug, Clone, PartialEq)]
pub struct DPiCertificate<T> {
    /// `max(1 − π(subset), threshold)`.
    pub value: T,
    pub subset: Relation,
    /// `d^S` on `subset`.
    pub threshold: T,
    /// False when an independent set was found heuristically, in which case
    /// `value` is only an upper bound.
    pub exact: bool,
}

/// Independent-set budget and fallback policy for [`d_pi_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DPiOptions {
    pub mwis_budget: usize,
    pub allow_heuristic: bool,
}

impl Default for DPiOptions {
    fn default() -> Self {
        DPiOptions { mwis_budget: MWIS_EXACT_BUDGET, allow_heuristic: false }
    }
}

impl DPiOptions {
    pub fn permissive() -> Self {
        DPiOptions { allow_heuristic: true, ..Self::default() }
    }
}

fn check_coupling<T: Scalar>(pi: &Coupling<T>, x: &FiniteMMSpace<T>, y: &FiniteMMSpace<T>) -> Result<(), BoxError> {
    if pi.rows() == x.len() && pi.cols() == y.len() {
        Ok(())
    } else {
        Err(BoxError::SpaceMismatch { rows: pi.rows(), cols: pi.cols(), n: x.len(), m: y.len() })
    }
}

pub fn d_pi<T: Scalar>(
    g1: &MapPair,
    g2: &MapPair,
    pi: &Coupling<T>,
    x: &FiniteMMSpace<T>,
    y: &FiniteMMSpace<T>,
) -> Result<DPiCertificate<T>, BoxError> {
    d_pi_with(g1, g2, pi, x, y, DPiOptions::default())
}

/// `inf_S max{1 − π(S), d^S(γ₁, γ₂)}` over `S ⊆ supp π`.
///
/// For each candidate threshold ε the admissible subsets are the independent
/// sets of a conflict graph on the support; the heaviest one is found
/// exactly. The objective's two parts move in opposite directions along the
/// sorted thresholds, so a binary search locates the crossing.
pub fn d_pi_with<T: Scalar>(
    g1: &MapPair,
    g2: &MapPair,
    pi: &Coupling<T>,
    x: &FiniteMMSpace<T>,
    y: &FiniteMMSpace<T>,
    opts: DPiOptions,
) -> Result<DPiCertificate<T>, BoxError> {
    g1.check(x, y)?;
    g2.check(x, y)?;
    check_coupling(pi, x, y)?;
    let pts = support(pi, T::zero()).pairs();
    let s = pts.len();
    let weights: Vec<T> = pts.iter().map(|&(i, j)| pi.get(i, j)).collect();
    let mut viol = vec![T::zero(); s * s];
    for (a, &p) in pts.iter().enumerate() {
        for (b, &q) in pts.iter().enumerate() {
            viol[a * s + b] = (g1.eval(p, q, x, y) - g2.eval(p, q, x, y)).abs();
        }
    }
    let mut cands = viol.clone();
    cands.push(T::zero());
    let cands = sorted_distinct(cands);

    let eval = |k: usize| -> Result<DPiCertificate<T>, BoxError> {
        let eps = cands[k];
        let keep: Vec<usize> = (0..s).filter(|&a| viol[a * s + a] <= eps).collect();
        let mut edges = Vec::new();
        for (u, &a) in keep.iter().enumerate() {
            for (w, &b) in keep.iter().enumerate().skip(u + 1) {
                if viol[a * s + b].max(viol[b * s + a]) > eps {
                    edges.push((u, w));
                }
            }
        }
        let kw: Vec<T> = keep.iter().map(|&a| weights[a]).collect();
        let sol = mwis_with(&kw, &edges, opts.mwis_budget, opts.allow_heuristic)?;
        let chosen: Vec<usize> = sol.vertices.iter().map(|&u| keep[u]).collect();
        let mut threshold = T::zero();
        for &a in &chosen {
            for &b in &chosen {
                threshold = threshold.max(viol[a * s + b]);
            }
        }
        let mass: T = chosen.iter().map(|&a| weights[a]).sum();
        let value = (T::one() - mass).max(threshold).max(T::zero());
        let subset = Relation::new(pi.rows(), pi.cols(), chosen.iter().map(|&a| pts[a]))?;
        Ok(DPiCertificate { value, subset, threshold, exact: sol.exact })
    };

    let mut memo: HashMap<usize, DPiCertificate<T>> = HashMap::new();
    let mut get = |k: usize| -> Result<DPiCertificate<T>, BoxError> {
        if let Some(c) = memo.get(&k) {
            return Ok(c.clone());
        }
        let c = eval(k)?;
        memo.insert(k, c.clone());
        Ok(c)
    };
    // First k with cands[k] ≥ 1 − M(cands[k]).
    let (mut lo, mut hi) = (0, cands.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        let c = get(mid)?;
        let mass = pi.mass_of(&c.subset);
        if cands[mid] >= T::one() - mass {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let mut best: Option<DPiCertificate<T>> = None;
    for k in [lo.checked_sub(1), (lo < cands.len()).then_some(lo)].into_iter().flatten() {
        let c = get(k)?;
        if best.as_ref().is_none_or(|b| c.value < b.value) {
            best = Some(c);
        }
    }
    let mut best = best.expect("candidate list contains 0");
    best.exact = best.exact && memo.values().all(|c| c.exact);
    Ok(best)
}

/// `□^π`: Hausdorff distance between the two groups under `d^π`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxPi<T> {
    pub value: T,
    pub exact: bool,
    /// `matrix[g][h] = d^π(g, h)` in group element order.
    pub matrix: Vec<Vec<T>>,
}

impl<T: Scalar> BoxPi<T> {
    /// Element pair attaining the Hausdorff value.
    pub fn critical_pair(&self) -> (usize, usize) {
        hausdorff_witness(&self.matrix).1
    }
}

/// Hausdorff value of a rectangular cost matrix and the pair attaining it.
pub(crate) fn hausdorff_witness<T: Scalar>(matrix: &[Vec<T>]) -> (T, (usize, usize)) {
    let mut best = (T::zero(), (0, 0));
    let cols = matrix.first().map_or(0, Vec::len);
    for (g, row) in matrix.iter().enumerate() {
        let (h, v) = argmin(row.iter().copied());
        if v > best.0 {
            best = (v, (g, h));
        }
    }
    for h in 0..cols {
        let (g, v) = argmin(matrix.iter().map(|r| r[h]));
        if v > best.0 {
            best = (v, (g, h));
        }
    }
    best
}

fn argmin<T: Scalar>(it: impl Iterator<Item = T>) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (k, v) in it.enumerate() {
        if v < best.1 {
            best = (k, v);
        }
    }
    best
}

pub fn box_pi<T: Scalar>(a: &MMAction<T>, b: &MMAction<T>, pi: &Coupling<T>) -> Result<BoxPi<T>, BoxError> {
    box_pi_with(a, b, pi, DPiOptions::default())
}

pub fn box_pi_with<T: Scalar>(
    a: &MMAction<T>,
    b: &MMAction<T>,
    pi: &Coupling<T>,
    opts: DPiOptions,
) -> Result<BoxPi<T>, BoxError> {
    let rows = d_pi_matrix(a, b, pi, opts)?;
    let exact = rows.iter().flatten().all(|c| c.exact);
    let matrix: Vec<Vec<T>> = rows.iter().map(|r| r.iter().map(|c| c.value).collect()).collect();
    let (value, _) = hausdorff_witness(&matrix);
    Ok(BoxPi { value, exact, matrix })
}

/// `d^π(g, h)` certificates for every `g ∈ G`, `h ∈ H`, in element order.
pub fn d_pi_matrix<T: Scalar>(
    a: &MMAction<T>,
    b: &MMAction<T>,
    pi: &Coupling<T>,
    opts: DPiOptions,
) -> Result<Vec<Vec<DPiCertificate<T>>>, BoxError> {
    let (x, y) = (a.space(), b.space());
    check_coupling(pi, x, y)?;
    a.elements()
        .par_iter()
        .map(|g| {
            let g = MapPair::on_x(g.clone());
            b.elements()
                .iter()
                .map(|h| d_pi_with(&g, &MapPair::on_y(h.clone()), pi, x, y, opts))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect()
}

/// Result of a coupling search.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxUpper<T: Scalar> {
    /// Upper bound on the box distance.
    pub value: T,
    pub coupling: Coupling<T>,
    /// False when some `d^π` fell back to the heuristic independent set.
    pub exact_inner: bool,
    pub evaluated: usize,
}

pub fn box_upper<T: Scalar>(a: &MMAction<T>, b: &MMAction<T>, cfg: &SearchConfig) -> Result<BoxUpper<T>, BoxError> {
    box_upper_seeded(a, b, cfg, &[])
}

/// [`box_upper`] with extra starting couplings evaluated before the generic
/// candidates.
pub fn box_upper_seeded<T: Scalar>(
    a: &MMAction<T>,
    b: &MMAction<T>,
    cfg: &SearchConfig,
    seeds: &[Coupling<T>],
) -> Result<BoxUpper<T>, BoxError> {
    let opts = DPiOptions::permissive();
    let out = minimize_over_couplings(a.space(), b.space(), cfg, seeds, |pi| {
        box_pi_with(a, b, pi, opts).map(|r| (r.value, r.exact))
    })?;
    Ok(BoxUpper { value: out.value, coupling: out.coupling, exact_inner: out.exact, evaluated: out.evaluated })
}

/// Brute-force minimum over grid couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxOracle<T: Scalar> {
    pub value: T,
    /// Discretization error bound `n · m · grid`.
    pub err: T,
    pub coupling: Coupling<T>,
    pub enumerated: usize,
}

/// One representative per orbit of `cands` under `π ↦ (σ × τ)_* π` for `σ`
/// normalizing `G` and `τ` normalizing `H` inside the automorphism groups.
/// Box and dconc values are constant on these orbits. Representatives keep
/// their original order.
pub fn orbit_representatives<T: Scalar>(a: &MMAction<T>, b: &MMAction<T>, cands: Vec<Coupling<T>>, grid: T) -> Vec<Coupling<T>> {
    let (x, y) = (a.space(), b.space());
    let (Ok(ax), Ok(ay)) = (enumerate_aut(x), enumerate_aut(y)) else {
        return cands;
    };
    let nx = normalizer(&ax, a);
    let ny = normalizer(&ay, b);
    let (n, m) = (x.len(), y.len());
    let units = |plan: &[T]| -> Vec<i64> { plan.iter().map(|v| (*v / grid).round().to_i64().unwrap_or(0)).collect() };
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for pi in cands {
        let u = units(pi.plan());
        let mut canon = u.clone();
        for s in &nx {
            for t in &ny {
                let mut moved = vec![0i64; n * m];
                for i in 0..n {
                    for j in 0..m {
                        moved[s.apply(i) * m + t.apply(j)] = u[i * m + j];
                    }
                }
                if moved < canon {
                    canon = moved;
                }
            }
        }
        if seen.insert(canon) {
            out.push(pi);
        }
    }
    out
}

/// Largest `n · m` accepted by the grid oracles.
pub const ORACLE_MAX_CELLS: usize = 9;

pub fn box_oracle<T: Scalar>(a: &MMAction<T>, b: &MMAction<T>, grid: T) -> Result<BoxOracle<T>, BoxError> {
    let (x, y) = (a.space(), b.space());
    let cells = x.len() * y.len();
    if cells > ORACLE_MAX_CELLS {
        return Err(BoxError::OracleTooLarge(cells));
    }
    let all = grid_couplings(x.mass(), y.mass(), grid)?;
    let enumerated = all.len();
    let cands = orbit_representatives(a, b, all, grid);
    let values: Vec<T> = cands
        .par_iter()
        .map(|pi| box_pi(a, b, pi).map(|r| r.value))
        .collect::<Result<_, _>>()?;
    let (k, value) = argmin(values.iter().copied());
    Ok(BoxOracle { value, err: T::from_usize_lossy(cells) * grid, coupling: cands[k].clone(), enumerated })
}

/// Oracle grid for a pair of spaces: `1/lcm(8, |X|, |Y|)` for uniform
/// measures.
pub fn default_oracle_grid(n: usize, m: usize) -> f64 {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let lcm = |a: usize, b: usize| a / gcd(a, b) * b;
    1.0 / lcm(lcm(8, n.max(1)), m.max(1)) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::validate_action;

    fn two(d: f64) -> FiniteMMSpace<f64> {
        FiniteMMSpace::uniform(vec![vec![0.0, d], vec![d, 0.0]]).unwrap()
    }

    fn id(n: usize) -> Perm {
        Perm::identity(n)
    }

    fn swap() -> Perm {
        Perm::new(vec![1, 0]).unwrap()
    }

    /// Minimizes the defining formula over every subset of the support.
    fn brute_d_pi(g1: &MapPair, g2: &MapPair, pi: &Coupling<f64>, x: &FiniteMMSpace<f64>, y: &FiniteMMSpace<f64>) -> f64 {
        let pts = support(pi, 0.0).pairs();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << pts.len()) {
            let sel: Vec<(usize, usize)> = (0..pts.len()).filter(|&k| mask >> k & 1 == 1).map(|k| pts[k]).collect();
            let rel = Relation::new(pi.rows(), pi.cols(), sel).unwrap();
            let v = (1.0 - pi.mass_of(&rel)).max(d_s(g1, g2, &rel, x, y).unwrap());
            best = best.min(v.max(0.0));
        }
        best
    }

    #[test]
    fn d_s_examples() {
        let (x, y) = (two(1.0), two(2.0));
        let (gx, gy) = (MapPair::on_x(id(2)), MapPair::on_y(id(2)));
        assert_eq!(d_s(&gx, &gy, &Relation::empty(2, 2), &x, &y).unwrap(), 0.0);
        assert_eq!(d_s(&gx, &gy, &Relation::identity(2), &x, &x).unwrap(), 0.0);
        assert_eq!(d_s(&gx, &gy, &Relation::identity(2), &x, &y).unwrap(), 1.0);
    }

    #[test]
    fn d_pi_examples() {
        let (x, y) = (two(1.0), two(2.0));
        let diag = Coupling::diagonal(x.mass());
        let (gx, gy) = (MapPair::on_x(id(2)), MapPair::on_y(id(2)));
        let c = d_pi(&gx, &gy, &diag, &x, &x).unwrap();
        assert_eq!(c.value, 0.0);
        assert_eq!(c.subset, Relation::identity(2));
        let c = d_pi(&gx, &gy, &diag, &x, &y).unwrap();
        assert_eq!(c.value, 0.5);
        assert_eq!(c.subset.len(), 1);
        let c = d_pi(&gx, &MapPair::on_y(swap()), &diag, &x, &x).unwrap();
        assert_eq!(c.value, 1.0);
        assert!(c.subset.is_empty());
    }

    #[test]
    fn certificate_reproduces_its_threshold() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=3);
            let m = rng.random_range(1..=3);
            let pts = |k: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Vec<f64>> {
                (0..k).map(|i| vec![i as f64 + rng.random_range(0.0..0.9), rng.random_range(0.0..1.0)]).collect()
            };
            let x = FiniteMMSpace::euclidean(&pts(n, &mut rng)).unwrap();
            let y = FiniteMMSpace::euclidean(&pts(m, &mut rng)).unwrap();
            let raw: Vec<f64> = (0..n * m).map(|_| rng.random_range(0..4) as f64).collect();
            let total: f64 = raw.iter().sum();
            if total == 0.0 {
                continue;
            }
            let pi = Coupling::from_plan(n, m, raw.iter().map(|v| v / total).collect()).unwrap();
            let Ok(x) = FiniteMMSpace::new(x.labels().to_vec(), x.dist_rows(), pi.mu_x().to_vec()) else { continue };
            let Ok(y) = FiniteMMSpace::new(y.labels().to_vec(), y.dist_rows(), pi.mu_y().to_vec()) else { continue };
            let (gx, gy) = (MapPair::on_x(id(n)), MapPair::on_y(id(m)));
            let c = d_pi(&gx, &gy, &pi, &x, &y).unwrap();
            assert_eq!(d_s(&gx, &gy, &c.subset, &x, &y).unwrap(), c.threshold);
            assert_eq!(c.value, (1.0 - pi.mass_of(&c.subset)).max(c.threshold).max(0.0));
            assert!((c.value - brute_d_pi(&gx, &gy, &pi, &x, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn box_pi_examples() {
        let x = two(1.0);
        let z2 = validate_action(x.clone(), &[vec![1, 0]]).unwrap();
        let triv = MMAction::trivial(x.clone());
        let diag = Coupling::diagonal(x.mass());
        assert_eq!(box_pi(&z2, &z2, &diag).unwrap().value, 0.0);
        assert_eq!(box_pi(&z2, &triv, &diag).unwrap().value, 1.0);
        let y = MMAction::trivial(two(2.0));
        let v = d_pi(&MapPair::on_x(id(2)), &MapPair::on_y(id(2)), &diag, &x, y.space()).unwrap().value;
        assert_eq!(box_pi(&triv, &y, &diag).unwrap().value, v);
    }

    #[test]
    fn box_upper_and_oracle_examples() {
        let x = MMAction::trivial(two(1.0));
        let y = MMAction::trivial(two(2.0));
        let cfg = SearchConfig::default();
        assert_eq!(box_upper(&x, &x, &cfg).unwrap().value, 0.0);
        assert_eq!(box_upper(&x, &y, &cfg).unwrap().value, 0.5);
        let o = box_oracle(&x, &y, 0.125).unwrap();
        assert_eq!(o.value, 0.5);
        assert_eq!(o.err, 0.5);
        assert_eq!(o.enumerated, 5);
        let z2 = validate_action(two(1.0), &[vec![1, 0]]).unwrap();
        assert_eq!(box_oracle(&z2, &x, 0.125).unwrap().value, 1.0);
        assert_eq!(box_upper(&z2, &x, &cfg).unwrap().value, 1.0);
        let one = MMAction::trivial(FiniteMMSpace::<f64>::uniform(vec![vec![0.0]]).unwrap());
        assert_eq!(box_oracle(&one, &one, 0.125).unwrap().value, 0.0);
    }

    #[test]
    fn default_grid_is_compatible() {
        assert_eq!(default_oracle_grid(2, 2), 0.125);
        assert_eq!(default_oracle_grid(3, 2), 1.0 / 24.0);
        assert_eq!(default_oracle_grid(1, 3), 1.0 / 24.0);
    }
}
