//! Heuristic search over the transportation polytope: northwest-corner
//! vertices, permutation couplings, an assignment seed and 2×2 cycle moves.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::Coupling;
use crate::mmspace::FiniteMMSpace;
use crate::scalar::{cmp, Scalar};

/// Knobs for [`minimize_over_couplings`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub seed: u64,
    /// Random northwest-corner vertices (and random permutations when the
    /// permutation family is too large to enumerate).
    pub budget: usize,
    /// Rounds of local 2×2 moves.
    pub local_rounds: usize,
    /// Moves tried per round.
    pub moves_per_round: usize,
    /// Enumerate every permutation coupling up to this many points.
    pub exhaustive_perm_max: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { seed: 0, budget: 64, local_rounds: 24, moves_per_round: 16, exhaustive_perm_max: 6 }
    }
}

/// Best coupling found and its objective.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome<T: Scalar> {
    pub value: T,
    pub coupling: Coupling<T>,
    /// True when every evaluation reported itself exact.
    pub exact: bool,
    pub evaluated: usize,
}

/// Northwest-corner rule with rows and columns visited in the given orders.
pub fn northwest_corner<T: Scalar>(mu_x: &[T], mu_y: &[T], rows: &[usize], cols: &[usize]) -> Coupling<T> {
    let (n, m) = (mu_x.len(), mu_y.len());
    let mut plan = vec![T::zero(); n * m];
    let mut rleft: Vec<T> = rows.iter().map(|&i| mu_x[i]).collect();
    let mut cleft: Vec<T> = cols.iter().map(|&j| mu_y[j]).collect();
    let (mut a, mut b) = (0, 0);
    let tol = T::marginal_tol() * T::lit(1e-2);
    while a < n && b < m {
        let t = rleft[a].min(cleft[b]).max(T::zero());
        plan[rows[a] * m + cols[b]] += t;
        rleft[a] -= t;
        cleft[b] -= t;
        if rleft[a] <= tol {
            a += 1;
        }
        if cleft[b] <= tol {
            b += 1;
        }
    }
    Coupling::from_parts_unchecked(n, m, plan, mu_x.to_vec(), mu_y.to_vec())
}

/// Minimum-cost perfect matching of a square cost matrix; `result[i]` is the
/// column assigned to row `i`.
pub fn hungarian<T: Scalar>(cost: &[Vec<T>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // Potentials formulation with 1-based sentinels.
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
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
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

fn sorted_row<T: Scalar>(space: &FiniteMMSpace<T>, i: usize) -> Vec<T> {
    let mut r = space.row(i).to_vec();
    r.sort_by(cmp);
    r
}

/// Cost of matching `x_i` with `y_j`: L¹ gap of sorted distance profiles.
fn profile_cost<T: Scalar>(x: &FiniteMMSpace<T>, y: &FiniteMMSpace<T>) -> Vec<Vec<T>> {
    let px: Vec<Vec<T>> = (0..x.len()).map(|i| sorted_row(x, i)).collect();
    let py: Vec<Vec<T>> = (0..y.len()).map(|j| sorted_row(y, j)).collect();
    px.iter()
        .map(|a| py.iter().map(|b| a.iter().zip(b).map(|(s, t)| (*s - *t).abs()).sum()).collect())
        .collect()
}

fn eccentricity_order<T: Scalar>(space: &FiniteMMSpace<T>) -> Vec<usize> {
    let ecc: Vec<T> = (0..space.len())
        .map(|i| space.row(i).iter().zip(space.mass()).map(|(d, m)| *d * *m).sum())
        .collect();
    let mut order: Vec<usize> = (0..space.len()).collect();
    order.sort_by(|&a, &b| cmp(&ecc[a], &ecc[b]).then(a.cmp(&b)));
    order
}

/// Lexicographic successor; false after the last permutation.
fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Deterministic candidate list: identity-order northwest corner, profile
/// orders, permutation couplings when both measures are uniform of equal
/// size, an assignment seed, then seeded random vertices.
pub fn candidate_couplings<T: Scalar>(
    x: &FiniteMMSpace<T>,
    y: &FiniteMMSpace<T>,
    cfg: &SearchConfig,
) -> Vec<Coupling<T>> {
    let (n, m) = (x.len(), y.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let idn: Vec<usize> = (0..n).collect();
    let idm: Vec<usize> = (0..m).collect();
    let mut out = vec![northwest_corner(x.mass(), y.mass(), &idn, &idm)];
    out.push(northwest_corner(x.mass(), y.mass(), &eccentricity_order(x), &eccentricity_order(y)));
    if n == m && x.is_uniform() && y.is_uniform() {
        let assign = hungarian(&profile_cost(x, y));
        out.push(Coupling::from_map(x.mass(), y.mass(), &assign).expect("bijection between uniform spaces"));
        if n <= cfg.exhaustive_perm_max {
            let mut p = idn.clone();
            loop {
                out.push(Coupling::from_map(x.mass(), y.mass(), &p).expect("bijection"));
                if !next_permutation(&mut p) {
                    break;
                }
            }
        } else {
            for _ in 0..cfg.budget {
                let mut p = idn.clone();
                p.shuffle(&mut rng);
                out.push(Coupling::from_map(x.mass(), y.mass(), &p).expect("bijection"));
            }
        }
    }
    for _ in 0..cfg.budget {
        let mut r = idn.clone();
        let mut c = idm.clone();
        r.shuffle(&mut rng);
        c.shuffle(&mut rng);
        out.push(northwest_corner(x.mass(), y.mass(), &r, &c));
    }
    dedup_couplings(out)
}

fn dedup_couplings<T: Scalar>(list: Vec<Coupling<T>>) -> Vec<Coupling<T>> {
    let mut seen = std::collections::HashSet::new();
    list.into_iter()
        .filter(|c| seen.insert(c.plan().iter().map(|v| v.as_f64().to_bits()).collect::<Vec<u64>>()))
        .collect()
}

/// A random 2×2 cycle move: shift `δ` from `(i, j), (k, l)` to `(i, l), (k, j)`.
fn random_move<T: Scalar>(pi: &Coupling<T>, rng: &mut ChaCha8Rng) -> Option<Coupling<T>> {
    let (n, m) = (pi.rows(), pi.cols());
    if n < 2 || m < 2 {
        return None;
    }
    let filled: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).filter(|&(i, j)| pi.get(i, j) > T::zero()).collect();
    for _ in 0..8 {
        let (i, j) = filled[rng.random_range(0..filled.len())];
        let (k, l) = filled[rng.random_range(0..filled.len())];
        if i == k || j == l {
            continue;
        }
        let cap = pi.get(i, j).min(pi.get(k, l));
        let frac = [T::one(), T::lit(0.5), T::lit(0.25)][rng.random_range(0..3)];
        let delta = cap * frac;
        let mut plan = pi.plan().to_vec();
        plan[i * m + j] -= delta;
        plan[k * m + l] -= delta;
        plan[i * m + l] += delta;
        plan[k * m + j] += delta;
        for v in plan.iter_mut() {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        return Some(pi.with_plan_unchecked(plan));
    }
    None
}

/// Minimizes `eval` over the candidate couplings plus `seeds`, then refines
/// the best one with local moves. `eval` returns the objective and whether it
/// was computed exactly. Ties keep the earliest candidate.
pub fn minimize_over_couplings<T, E, F>(
    x: &FiniteMMSpace<T>,
    y: &FiniteMMSpace<T>,
    cfg: &SearchConfig,
    seeds: &[Coupling<T>],
    eval: F,
) -> Result<SearchOutcome<T>, E>
where
    T: Scalar,
    E: Send,
    F: Fn(&Coupling<T>) -> Result<(T, bool), E> + Sync,
{
    let mut cands: Vec<Coupling<T>> = seeds.to_vec();
    cands.extend(candidate_couplings(x, y, cfg));
    let cands = dedup_couplings(cands);
    let scored: Vec<(T, bool)> = cands.par_iter().map(&eval).collect::<Result<_, _>>()?;
    let mut evaluated = cands.len();
    let mut exact = scored.iter().all(|s| s.1);
    let mut best = 0;
    for (k, s) in scored.iter().enumerate() {
        if s.0 < scored[best].0 {
            best = k;
        }
    }
    let mut best_value = scored[best].0;
    let mut best_pi = cands[best].clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    for _ in 0..cfg.local_rounds {
        if best_value <= T::zero() {
            break;
        }
        let moves: Vec<Coupling<T>> =
            (0..cfg.moves_per_round).filter_map(|_| random_move(&best_pi, &mut rng)).collect();
        if moves.is_empty() {
            break;
        }
        let scored: Vec<(T, bool)> = moves.par_iter().map(&eval).collect::<Result<_, _>>()?;
        evaluated += moves.len();
        exact &= scored.iter().all(|s| s.1);
        let mut pick = None;
        for (k, s) in scored.iter().enumerate() {
            if s.0 < best_value - T::input_tol() && pick.is_none_or(|p: usize| s.0 < scored[p].0) {
                pick = Some(k);
            }
        }
        if let Some(k) = pick {
            best_value = scored[k].0;
            best_pi = moves[k].clone();
        }
    }
    Ok(SearchOutcome { value: best_value, coupling: best_pi, exact, evaluated })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn northwest_corner_is_a_coupling() {
        let mu = [0.2, 0.5, 0.3];
        let nu = [0.6, 0.4];
        let pi = northwest_corner(&mu, &nu, &[0, 1, 2], &[0, 1]);
        let want = [0.2f64, 0.0, 0.4, 0.1, 0.0, 0.3];
        assert!(pi.plan().iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-15));
        let pi = northwest_corner(&mu, &nu, &[2, 0, 1], &[1, 0]);
        assert!(Coupling::new(3, 2, pi.plan().to_vec(), mu.to_vec(), nu.to_vec()).is_ok());
        let nonzero = pi.plan().iter().filter(|v| **v > 0.0).count();
        assert!(nonzero <= 4);
    }

    #[test]
    fn hungarian_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(1..=6);
            let cost: Vec<Vec<f64>> =
                (0..n).map(|_| (0..n).map(|_| rng.random_range(0..20) as f64).collect()).collect();
            let a = hungarian(&cost);
            let total = |p: &[usize]| -> f64 { p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum() };
            let mut p: Vec<usize> = (0..n).collect();
            let mut best = f64::INFINITY;
            loop {
                best = best.min(total(&p));
                if !next_permutation(&mut p) {
                    break;
                }
            }
            assert_eq!(total(&a), best);
        }
    }

    #[test]
    fn permutations_are_enumerated_in_order() {
        let mut p = vec![0, 1, 2];
        let mut all = vec![p.clone()];
        while next_permutation(&mut p) {
            all.push(p.clone());
        }
        assert_eq!(all.len(), 6);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn moves_preserve_marginals() {
        let mu = [0.25; 4];
        let pi = Coupling::<f64>::product(&mu, &mu);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut cur = pi;
        for _ in 0..50 {
            cur = random_move(&cur, &mut rng).unwrap();
            assert!(Coupling::new(4, 4, cur.plan().to_vec(), mu.to_vec(), mu.to_vec()).is_ok());
        }
    }
}
