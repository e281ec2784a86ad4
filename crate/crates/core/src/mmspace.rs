//! Finite metric measure spaces, 1-Lipschitz functions, the Ky Fan metric and
//! observable diameter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{cmp, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("nonzero diagonal entry at {0}")]
    NonZeroDiagonal(usize),
    #[error("negative distance at ({0}, {1})")]
    NegativeDistance(usize, usize),
    #[error("distance matrix not symmetric at ({0}, {1})")]
    NonSymmetric(usize, usize),
    #[error("points {0} and {1} are at distance zero")]
    DuplicatePoint(usize, usize),
    #[error("triangle inequality fails: d({0},{1}) > d({0},{2}) + d({2},{1})")]
    TriangleViolation(usize, usize, usize),
    #[error("point {0} has non-positive mass")]
    ZeroMass(usize),
    #[error("masses sum to {0}, not 1")]
    MassNotNormalized(f64),
    #[error("|f({0}) - f({1})| exceeds d({0},{1})")]
    NotLipschitz(usize, usize),
    #[error("kappa must lie in (0, 1), got {0}")]
    KappaOutOfRange(f64),
    #[error("space with {0} points exceeds the brute-force budget")]
    TooLarge(usize),
    #[error("grid step {0} is invalid for this space")]
    InvalidGrid(f64),
}

/// Serialized form of a space: `{"labels": [...], "dist": [[...]], "mass": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RawSpace<T> {
    pub labels: Vec<String>,
    pub dist: Vec<Vec<T>>,
    pub mass: Vec<T>,
}

/// A finite metric space with a full-support probability measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", into = "RawSpace<T>", try_from = "RawSpace<T>")]
pub struct FiniteMMSpace<T: Scalar> {
    labels: Vec<String>,
    n: usize,
    dist: Vec<T>,
    mass: Vec<T>,
}

impl<T: Scalar> From<FiniteMMSpace<T>> for RawSpace<T> {
    fn from(s: FiniteMMSpace<T>) -> Self {
        RawSpace {
            dist: s.dist_rows(),
            labels: s.labels,
            mass: s.mass,
        }
    }
}

impl<T: Scalar> TryFrom<RawSpace<T>> for FiniteMMSpace<T> {
    type Error = SpaceError;

    fn try_from(raw: RawSpace<T>) -> Result<Self, SpaceError> {
        validate_space(raw)
    }
}

/// Checks the standing assumptions on a candidate space and returns the first
/// violated axiom. Inputs are rejected, never repaired.
pub fn validate_space<T: Scalar>(raw: RawSpace<T>) -> Result<FiniteMMSpace<T>, SpaceError> {
    let n = raw.mass.len();
    if raw.labels.len() != n {
        return Err(SpaceError::LengthMismatch { expected: n, found: raw.labels.len() });
    }
    if raw.dist.len() != n {
        return Err(SpaceError::LengthMismatch { expected: n, found: raw.dist.len() });
    }
    if let Some(row) = raw.dist.iter().find(|r| r.len() != n) {
        return Err(SpaceError::LengthMismatch { expected: n, found: row.len() });
    }
    let tol = T::input_tol();
    let d = |i: usize, j: usize| raw.dist[i][j];

    for i in 0..n {
        for j in 0..n {
            if !d(i, j).is_finite() {
                return Err(SpaceError::NonFinite(i, j));
            }
        }
        if !raw.mass[i].is_finite() {
            return Err(SpaceError::NonFinite(i, i));
        }
    }
    for i in 0..n {
        if d(i, i).abs() > tol {
            return Err(SpaceError::NonZeroDiagonal(i));
        }
        for j in 0..n {
            if d(i, j) < -tol {
                return Err(SpaceError::NegativeDistance(i, j));
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if (d(i, j) - d(j, i)).abs() > tol {
                return Err(SpaceError::NonSymmetric(i, j));
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if d(i, j) <= tol {
                return Err(SpaceError::DuplicatePoint(i, j));
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if d(i, j) > d(i, k) + d(k, j) + tol {
                    return Err(SpaceError::TriangleViolation(i, j, k));
                }
            }
        }
    }
    for (i, &m) in raw.mass.iter().enumerate() {
        if m <= T::zero() {
            return Err(SpaceError::ZeroMass(i));
        }
    }
    let total: T = raw.mass.iter().copied().sum();
    if (total - T::one()).abs() > tol {
        return Err(SpaceError::MassNotNormalized(total.as_f64()));
    }

    let mut dist = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            // Store the symmetrized matrix with an exact zero diagonal.
            let v = if i == j {
                T::zero()
            } else if i < j {
                d(i, j)
            } else {
                d(j, i)
            };
            dist.push(v.max(T::zero()));
        }
    }
    Ok(FiniteMMSpace { labels: raw.labels, n, dist, mass: raw.mass })
}

impl<T: Scalar> FiniteMMSpace<T> {
    pub fn new(labels: Vec<String>, dist: Vec<Vec<T>>, mass: Vec<T>) -> Result<Self, SpaceError> {
        validate_space(RawSpace { labels, dist, mass })
    }

    /// Space with labels `"0"`, `"1"`, ...
    pub fn unlabeled(dist: Vec<Vec<T>>, mass: Vec<T>) -> Result<Self, SpaceError> {
        let labels = (0..mass.len()).map(|i| i.to_string()).collect();
        Self::new(labels, dist, mass)
    }

    /// Space with the uniform measure.
    pub fn uniform(dist: Vec<Vec<T>>) -> Result<Self, SpaceError> {
        let n = dist.len();
        let m = T::one() / T::from_usize_lossy(n.max(1));
        Self::unlabeled(dist, vec![m; n])
    }

    /// `n` points at pairwise distance `d`, uniform measure.
    pub fn equidistant(n: usize, d: T) -> Result<Self, SpaceError> {
        let dist = (0..n)
            .map(|i| (0..n).map(|j| if i == j { T::zero() } else { d }).collect())
            .collect();
        Self::uniform(dist)
    }

    /// Euclidean distances between coordinate vectors, uniform measure.
    pub fn euclidean(points: &[Vec<T>]) -> Result<Self, SpaceError> {
        let n = points.len();
        let mut dist = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let s: T = points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| (*a - *b) * (*a - *b))
                    .sum();
                dist[i][j] = s.sqrt();
                dist[j][i] = dist[i][j];
            }
        }
        Self::uniform(dist)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> T {
        self.dist[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn dist_rows(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    #[inline]
    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn diam(&self) -> T {
        self.dist.iter().copied().fold(T::zero(), T::max)
    }

    pub fn is_uniform(&self) -> bool {
        let first = self.mass.first().copied().unwrap_or_else(T::one);
        self.mass.iter().all(|&m| (m - first).abs() <= T::input_tol())
    }

    /// Mass of the closed ball `{y : d(x, y) <= r}`.
    pub fn ball_mass(&self, x: usize, r: T) -> T {
        let r = r + T::input_tol();
        self.row(x)
            .iter()
            .zip(&self.mass)
            .filter(|(d, _)| **d <= r)
            .map(|(_, m)| *m)
            .sum()
    }

    /// The space with points reordered: point `i` of the result is point
    /// `order[i]` of `self`. An mm-isomorphic copy.
    pub fn relabeled(&self, order: &[usize]) -> Result<Self, SpaceError> {
        let dist = order
            .iter()
            .map(|&i| order.iter().map(|&j| self.d(i, j)).collect())
            .collect();
        let mass = order.iter().map(|&i| self.mass[i]).collect();
        let labels = order.iter().map(|&i| self.labels[i].clone()).collect();
        Self::new(labels, dist, mass)
    }

    pub fn to_raw(&self) -> RawSpace<T> {
        self.clone().into()
    }
}

/// A real function on a space's points with `|f(i) - f(j)| <= d(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipFunction<'a, T: Scalar> {
    space: &'a FiniteMMSpace<T>,
    values: Vec<T>,
}

impl<'a, T: Scalar> LipFunction<'a, T> {
    pub fn new(space: &'a FiniteMMSpace<T>, values: Vec<T>) -> Result<Self, SpaceError> {
        let n = space.len();
        if values.len() != n {
            return Err(SpaceError::LengthMismatch { expected: n, found: values.len() });
        }
        if let Some((i, j)) = lipschitz_violation(space, &values) {
            return Err(SpaceError::NotLipschitz(i, j));
        }
        Ok(LipFunction { space, values })
    }

    /// `d(x, .)`.
    pub fn distance_from(space: &'a FiniteMMSpace<T>, x: usize) -> Self {
        LipFunction { space, values: space.row(x).to_vec() }
    }

    pub fn space(&self) -> &'a FiniteMMSpace<T> {
        self.space
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// `f ∘ g` for a point map `g` given as an index table.
    pub fn compose(&self, map: &[usize]) -> Vec<T> {
        map.iter().map(|&i| self.values[i]).collect()
    }
}

/// First pair `(i, j)` breaking the 1-Lipschitz bound, if any.
pub fn lipschitz_violation<T: Scalar>(space: &FiniteMMSpace<T>, values: &[T]) -> Option<(usize, usize)> {
    let tol = T::input_tol();
    let n = space.len();
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).abs() > space.d(i, j) + tol {
                return Some((i, j));
            }
        }
    }
    None
}

/// Ky Fan distance of a gap vector: the least `eps >= 0` with
/// `mu(|gap| > eps) <= eps`. Exact for finitely many atoms.
pub fn ky_fan_from_gaps<T: Scalar>(gaps: &[T], mu: &[T]) -> T {
    let mut atoms: Vec<(T, T)> = gaps.iter().map(|g| g.abs()).zip(mu.iter().copied()).collect();
    ky_fan_atoms(&mut atoms)
}

/// [`ky_fan_from_gaps`] on `(|gap|, mass)` atoms; reorders the buffer.
pub(crate) fn ky_fan_atoms<T: Scalar>(atoms: &mut [(T, T)]) -> T {
    if atoms.is_empty() {
        return T::zero();
    }
    atoms.sort_unstable_by(|a, b| cmp(&b.0, &a.0));
    // Walk the gaps downwards; `tail` is the mass strictly above the current
    // level. On [v, prev) the excess mass is constant, so the best feasible
    // point there is max(v, excess). Every such candidate is feasible.
    let mut best = T::one();
    let mut tail = T::zero();
    let mut k = 0;
    while k < atoms.len() {
        let v = atoms[k].0;
        best = best.min(v.max(tail));
        while k < atoms.len() && atoms[k].0 == v {
            tail += atoms[k].1;
            k += 1;
        }
    }
    // Below the smallest gap everything is excess.
    best.min(tail)
}

/// Ky Fan metric between two functions on a finite probability space.
pub fn ky_fan<T: Scalar>(f: &[T], g: &[T], mu: &[T]) -> Result<T, SpaceError> {
    if f.len() != mu.len() {
        return Err(SpaceError::LengthMismatch { expected: mu.len(), found: f.len() });
    }
    if g.len() != mu.len() {
        return Err(SpaceError::LengthMismatch { expected: mu.len(), found: g.len() });
    }
    let gaps: Vec<T> = f.iter().zip(g).map(|(a, b)| *a - *b).collect();
    Ok(ky_fan_from_gaps(&gaps, mu))
}

/// Ky Fan distance between two self-maps of a space, measured through the
/// displacement `x ↦ d(g(x), h(x))`.
pub fn ky_fan_map<T: Scalar>(g: &[usize], h: &[usize], space: &FiniteMMSpace<T>) -> Result<T, SpaceError> {
    let n = space.len();
    for map in [g, h] {
        if map.len() != n {
            return Err(SpaceError::LengthMismatch { expected: n, found: map.len() });
        }
    }
    let gaps: Vec<T> = (0..n).map(|i| space.d(g[i], h[i])).collect();
    Ok(ky_fan_from_gaps(&gaps, space.mass()))
}

/// A partial-diameter level `kappa ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa<T>(T);

impl<T: Scalar> Kappa<T> {
    pub fn new(kappa: T) -> Result<Self, SpaceError> {
        if kappa > T::zero() && kappa < T::one() {
            Ok(Kappa(kappa))
        } else {
            Err(SpaceError::KappaOutOfRange(kappa.as_f64()))
        }
    }

    pub fn get(self) -> T {
        self.0
    }
}

/// Least length of an interval carrying mass at least `1 - kappa` of the
/// atom list `(value, mass)`. Optimal intervals have atom endpoints.
pub fn partial_diameter<T: Scalar>(atoms: &[(T, T)], kappa: T) -> Result<T, SpaceError> {
    let kappa = Kappa::new(kappa)?.get();
    let mut sorted = atoms.to_vec();
    sorted.sort_by(|a, b| cmp(&a.0, &b.0));
    let need = T::one() - kappa - T::input_tol();
    let mut best: Option<T> = None;
    let mut window = T::zero();
    let mut right = 0;
    for left in 0..sorted.len() {
        while right < sorted.len() && window < need {
            window += sorted[right].1;
            right += 1;
        }
        if window < need {
            break;
        }
        let len = sorted[right - 1].0 - sorted[left].0;
        best = Some(best.map_or(len, |b| b.min(len)));
        window -= sorted[left].1;
    }
    Ok(best.unwrap_or_else(T::zero))
}

fn pushforward_diameter<T: Scalar>(values: &[T], mass: &[T], kappa: T) -> Result<T, SpaceError> {
    let atoms: Vec<(T, T)> = values.iter().copied().zip(mass.iter().copied()).collect();
    partial_diameter(&atoms, kappa)
}

/// Random 1-Lipschitz probes used by [`obs_diam_lower_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObsDiamSampling {
    pub samples: usize,
    pub seed: u64,
}

impl Default for ObsDiamSampling {
    fn default() -> Self {
        ObsDiamSampling { samples: 64, seed: 0 }
    }
}

/// Lower bound on the observable diameter with default sampling.
pub fn obs_diam_lower<T: Scalar>(space: &FiniteMMSpace<T>, kappa: T) -> Result<T, SpaceError> {
    obs_diam_lower_with(space, kappa, ObsDiamSampling::default())
}

/// Certified lower bound on `ObsDiam(X; -kappa)`: the best partial diameter
/// over distance functions and seeded random 1-Lipschitz functions of the
/// form `min_i (c_i + d(x_i, .))`, optionally clipped.
pub fn obs_diam_lower_with<T: Scalar>(
    space: &FiniteMMSpace<T>,
    kappa: T,
    sampling: ObsDiamSampling,
) -> Result<T, SpaceError> {
    Kappa::new(kappa)?;
    let n = space.len();
    let mass = space.mass();
    let mut best = T::zero();
    for i in 0..n {
        best = best.max(pushforward_diameter(space.row(i), mass, kappa)?);
    }
    let diam = space.diam().as_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    for _ in 0..sampling.samples {
        let mut values = vec![T::infinity(); n];
        let mut any = false;
        for anchor in 0..n {
            if rng.random_bool(0.5) || (!any && anchor + 1 == n) {
                any = true;
                let c = T::lit(rng.random_range(0.0..=diam.max(f64::MIN_POSITIVE)));
                for (y, v) in values.iter_mut().enumerate() {
                    *v = v.min(c + space.d(anchor, y));
                }
            }
        }
        if rng.random_bool(0.5) {
            let a = T::lit(rng.random_range(0.0..=diam.max(f64::MIN_POSITIVE)));
            let b = T::lit(rng.random_range(0.0..=2.0 * diam.max(f64::MIN_POSITIVE)));
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for v in values.iter_mut() {
                *v = v.max(lo).min(hi);
            }
        }
        best = best.max(pushforward_diameter(&values, mass, kappa)?);
    }
    Ok(best)
}

/// All 1-Lipschitz vectors with entries `k * grid`, `lo <= k <= hi`, listed
/// in lexicographic order of the integer coefficients. With `pin_first` the
/// first entry is fixed to 0.
pub fn lip_grid_vectors<T: Scalar>(
    space: &FiniteMMSpace<T>,
    grid: T,
    lo: i64,
    hi: i64,
    pin_first: bool,
) -> Vec<Vec<T>> {
    let n = space.len();
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let tol = T::input_tol();
    let mut ks = vec![0i64; n];
    fn rec<T: Scalar>(
        space: &FiniteMMSpace<T>,
        grid: T,
        lo: i64,
        hi: i64,
        tol: T,
        pos: usize,
        ks: &mut Vec<i64>,
        out: &mut Vec<Vec<T>>,
    ) {
        let n = space.len();
        if pos == n {
            out.push(ks.iter().map(|&k| T::from_i64(k).unwrap() * grid).collect());
            return;
        }
        for k in lo..=hi {
            let ok = (0..pos).all(|q| {
                let gap = T::from_i64((k - ks[q]).abs()).unwrap() * grid;
                gap <= space.d(pos, q) + tol
            });
            if ok {
                ks[pos] = k;
                rec(space, grid, lo, hi, tol, pos + 1, ks, out);
            }
        }
    }
    if pin_first {
        ks[0] = 0;
        rec(space, grid, lo, hi, tol, 1, &mut ks, &mut out);
    } else {
        rec(space, grid, lo, hi, tol, 0, &mut ks, &mut out);
    }
    out
}

/// Number of whole grid steps in `span` (rounded down, with tolerance).
pub(crate) fn grid_steps<T: Scalar>(span: T, grid: T) -> Result<i64, SpaceError> {
    if !(grid > T::zero()) || !grid.is_finite() {
        return Err(SpaceError::InvalidGrid(grid.as_f64()));
    }
    let steps = (span / grid + T::input_tol()).floor();
    steps.to_i64().ok_or(SpaceError::InvalidGrid(grid.as_f64()))
}

/// Maximum brute-force size for [`obs_diam_oracle`].
pub const OBS_DIAM_ORACLE_MAX_POINTS: usize = 5;
const OBS_DIAM_ORACLE_MAX_STEPS: i64 = 64;

/// Brute-force observable diameter over the grid-valued 1-Lipschitz
/// functions (first value pinned to 0; the partial diameter is shift
/// invariant). Every enumerated function is 1-Lipschitz, so the result never
/// exceeds the true value.
pub fn obs_diam_oracle<T: Scalar>(space: &FiniteMMSpace<T>, kappa: T, grid: T) -> Result<T, SpaceError> {
    Kappa::new(kappa)?;
    let n = space.len();
    if n > OBS_DIAM_ORACLE_MAX_POINTS {
        return Err(SpaceError::TooLarge(n));
    }
    let steps = grid_steps(space.diam(), grid)?;
    if steps > OBS_DIAM_ORACLE_MAX_STEPS {
        return Err(SpaceError::InvalidGrid(grid.as_f64()));
    }
    let mut best = T::zero();
    for values in lip_grid_vectors(space, grid, -steps, steps, true) {
        best = best.max(pushforward_diameter(&values, space.mass(), kappa)?);
    }
    Ok(best)
}
