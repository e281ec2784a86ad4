//! The equivariant observable distance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxdist::{box_pi, d_pi_matrix, hausdorff_witness, orbit_representatives, BoxError, DPiCertificate, DPiOptions, ORACLE_MAX_CELLS};
use crate::coupling::{grid_couplings, support, Coupling, CouplingError, Relation};
use crate::group::{MMAction, Perm};
use crate::mmspace::{grid_steps, ky_fan_atoms, lip_grid_vectors, FiniteMMSpace, LipFunction, SpaceError};
use crate::scalar::Scalar;
use crate::search::{minimize_over_couplings, SearchConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObsError {
    #[error("function has {found} values but its space has {expected} points")]
    SpaceMismatch { expected: usize, found: usize },
    #[error("relation is empty")]
    EmptyRelation,
    #[error("oracle instance with {0} points exceeds the enumeration budget")]
    TooLarge(usize),
    #[error("value grid {0} is too fine for the oracle")]
    GridTooFine(f64),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Box(#[from] BoxError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
}

/// A pair of 1-Lipschitz functions and their `ρ^π_{g,h}` value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoPair<T> {
    pub f: Vec<T>,
    pub fprime: Vec<T>,
    pub value: T,
}

/// The support of a coupling as weighted pairs.
struct Atoms<T> {
    pts: Vec<(usize, usize)>,
    w: Vec<T>,
}

impl<T: Scalar> Atoms<T> {
    fn of(pi: &Coupling<T>) -> Self {
        let pts = support(pi, T::zero()).pairs();
        let w = pts.iter().map(|&(i, j)| pi.get(i, j)).collect();
        Atoms { pts, w }
    }

    /// `max{dKF^π(f∘p₁, f'∘p₂), dKF^π(f∘g∘p₁, f'∘h∘p₂)}`.
    fn rho(&self, f: &[T], fp: &[T], g: &Perm, h: &Perm, buf: &mut Vec<(T, T)>) -> T {
        buf.clear();
        buf.extend(self.pts.iter().zip(&self.w).map(|(&(i, j), &w)| ((f[i] - fp[j]).abs(), w)));
        let first = ky_fan_atoms(buf);
        buf.clear();
        buf.extend(self.pts.iter().zip(&self.w).map(|(&(i, j), &w)| ((f[g.apply(i)] - fp[h.apply(j)]).abs(), w)));
        first.max(ky_fan_atoms(buf))
    }
}

fn check_len(len: usize, expected: usize) -> Result<(), ObsError> {
    if len == expected {
        Ok(())
    } else {
        Err(ObsError::SpaceMismatch { expected, found: len })
    }
}

/// `ρ^π_{g,h}(f, f')`.
pub fn rho_pi_gh<T: Scalar>(
    f: &LipFunction<'_, T>,
    fprime: &LipFunction<'_, T>,
    g: &Perm,
    h: &Perm,
    pi: &Coupling<T>,
) -> Result<T, ObsError> {
    check_len(f.values().len(), pi.rows())?;
    check_len(fprime.values().len(), pi.cols())?;
    check_len(g.len(), pi.rows())?;
    check_len(h.len(), pi.cols())?;
    let mut buf = Vec::new();
    Ok(Atoms::of(pi).rho(f.values(), fprime.values(), g, h, &mut buf))
}

/// `f̃_S(y) = min_{(x', y') ∈ S} (d_Y(y, y') + f(x'))`.
pub fn mcshane_extend<'a, T: Scalar>(
    f: &LipFunction<'_, T>,
    s: &Relation,
    y: &'a FiniteMMSpace<T>,
) -> Result<LipFunction<'a, T>, ObsError> {
    check_len(f.values().len(), s.rows())?;
    check_len(y.len(), s.cols())?;
    let values = extend_values(f.values(), s, y)?;
    Ok(LipFunction::new(y, values)?)
}

fn extend_values<T: Scalar>(f: &[T], s: &Relation, y: &FiniteMMSpace<T>) -> Result<Vec<T>, ObsError> {
    if s.is_empty() {
        return Err(ObsError::EmptyRelation);
    }
    Ok((0..y.len())
        .map(|v| s.iter().map(|(x1, y1)| y.d(v, y1) + f[x1]).fold(T::infinity(), T::min))
        .collect())
}

/// Probe functions for the constructive side of [`rho_pi_upper`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    /// Random functions `min_i (c_i + d(x_i, ·))` on top of the distance
    /// functions.
    pub samples: usize,
    /// Spaces up to this size also get the full grid family at `diam / 8`.
    pub grid_max_points: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { samples: 16, grid_max_points: 3, seed: 0 }
    }
}

/// Distance functions, their negatives, random McShane combinations and,
/// for small spaces, the grid family.
pub fn probe_family<T: Scalar>(space: &FiniteMMSpace<T>, cfg: &ProbeConfig) -> Vec<Vec<T>> {
    let n = space.len();
    let mut out: Vec<Vec<T>> = Vec::new();
    for i in 0..n {
        out.push(space.row(i).to_vec());
        out.push(space.row(i).iter().map(|v| -*v).collect());
    }
    let diam = space.diam();
    if n <= cfg.grid_max_points && diam > T::zero() {
        out.extend(lip_grid_vectors(space, diam / T::lit(8.0), -8, 8, true));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.samples {
        let mut v = vec![T::infinity(); n];
        for a in 0..n {
            if rng.random_bool(0.5) || a + 1 == n {
                let c = diam * T::lit(rng.random_range(0.0..=1.0));
                for (y, val) in v.iter_mut().enumerate() {
                    *val = val.min(c + space.d(a, y));
                }
            }
        }
        out.push(v);
    }
    out
}

/// Subsets feeding [`rho_pi_upper`]: `S` for `(g, h)`, `S'` for
/// `(g', id_Y)` and `S''` for `(id_X, h')`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoAux<T> {
    pub s: DPiCertificate<T>,
    pub s1: DPiCertificate<T>,
    pub s2: DPiCertificate<T>,
}

impl<T: Scalar> RhoAux<T> {
    /// The largest of the three mass defects and three `d^S` values.
    pub fn eps(&self) -> T {
        self.s.value.max(self.s1.value).max(self.s2.value)
    }
}

/// Upper estimate of `ρ^π(g, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoUpper<T> {
    /// `min(1, lemma_bound, constructive)`.
    pub value: T,
    /// `4ε`.
    pub lemma_bound: T,
    /// Worst probe after matching each probe by a McShane extension.
    pub constructive: T,
}

/// Constructive estimate of `ρ^π(g, h)`: each probe on `X` is matched with
/// its extension over `S ∩ S'`, each probe on `Y` with the extension over
/// `(S ∩ S'')⁻¹`; reported together with `4ε` and the smaller of the two.
#[allow(clippy::too_many_arguments)]
pub fn rho_pi_upper<T: Scalar>(
    x: &FiniteMMSpace<T>,
    y: &FiniteMMSpace<T>,
    g: &Perm,
    h: &Perm,
    pi: &Coupling<T>,
    aux: &RhoAux<T>,
    probes_x: &[Vec<T>],
    probes_y: &[Vec<T>],
) -> Result<RhoUpper<T>, ObsError> {
    check_len(g.len(), x.len())?;
    check_len(h.len(), y.len())?;
    let atoms = Atoms::of(pi);
    let full = support(pi, T::zero());
    let pick = |a: Relation| -> Relation {
        if !a.is_empty() {
            a
        } else if !aux.s.subset.is_empty() {
            aux.s.subset.clone()
        } else {
            full.clone()
        }
    };
    let fwd = pick(aux.s.subset.intersection(&aux.s1.subset));
    let bwd = pick(aux.s.subset.intersection(&aux.s2.subset)).inverse();
    let mut buf = Vec::new();
    let mut constructive = T::zero();
    for f in probes_x {
        let fp = extend_values(f, &fwd, y)?;
        constructive = constructive.max(atoms.rho(f, &fp, g, h, &mut buf));
    }
    for fp in probes_y {
        let f = extend_values(fp, &bwd, x)?;
        constructive = constructive.max(atoms.rho(&f, fp, g, h, &mut buf));
    }
    let lemma_bound = T::lit(4.0) * aux.eps();
    Ok(RhoUpper { value: T::one().min(lemma_bound).min(constructive), lemma_bound, constructive })
}

/// Largest space accepted by [`rho_oracle`].
pub const RHO_ORACLE_MAX_POINTS: usize = 4;
const RHO_ORACLE_MAX_STEPS: i64 = 32;

/// Grid families of 1-Lipschitz functions used by the oracle.
///
/// One direction takes `f` on one side pinned at its first point (the value
/// is invariant under a common shift) and lets the other side range over all
/// grid vectors in `[-diam, diam]` of the pinned side: clipping a competitor
/// into the range of `f` never increases either Ky Fan term.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoGrid<T> {
    pub grid: T,
    x_pinned: Vec<Vec<T>>,
    y_free: Vec<Vec<T>>,
    y_pinned: Vec<Vec<T>>,
    x_free: Vec<Vec<T>>,
}

impl<T: Scalar> RhoGrid<T> {
    pub fn new(x: &FiniteMMSpace<T>, y: &FiniteMMSpace<T>, grid: T) -> Result<Self, ObsError> {
        for s in [x, y] {
            if s.len() > RHO_ORACLE_MAX_POINTS {
                return Err(ObsError::TooLarge(s.len()));
            }
        }
        let sx = grid_steps(x.diam(), grid)?;
        let sy = grid_steps(y.diam(), grid)?;
        if sx.max(sy) > RHO_ORACLE_MAX_STEPS {
            return Err(ObsError::GridTooFine(grid.as_f64()));
        }
        Ok(RhoGrid {
            grid,
            x_pinned: lip_grid_vectors(x, grid, -sx, sx, true),
            y_free: lip_grid_vectors(y, grid, -sx, sx, false),
            y_pinned: lip_grid_vectors(y, grid, -sy, sy, true),
            x_free: lip_grid_vectors(x, grid, -sy, sy, false),
        })
    }

    /// Rounding slack `2 (n − 1) grid` with `n` the larger space.
    pub fn slack(&self) -> T {
        let n = self.x_pinned.first().map_or(1, Vec::len).max(self.y_pinned.first().map_or(1, Vec::len));
        T::lit(2.0) * T::from_usize_lossy(n.saturating_sub(1)) * self.grid
    }
}

/// Result of a cut-off oracle evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Capped<T> {
    Exact(T),
    /// Strictly above the cutoff.
    Above,
}

/// `sup_{f ∈ left} inf_{f' ∈ right} ρ`, abandoning once it exceeds `cutoff`.
fn directed<T: Scalar>(
    left: &[Vec<T>],
    right: &[Vec<T>],
    rho: impl Fn(&[T], &[T], &mut Vec<(T, T)>) -> T,
    cutoff: T,
) -> Capped<T> {
    let mut buf = Vec::new();
    let mut sup = T::zero();
    for f in left {
        let mut inf = T::infinity();
        for fp in right {
            inf = inf.min(rho(f, fp, &mut buf));
            if inf <= sup {
                break;
            }
        }
        sup = sup.max(inf);
        if sup > cutoff {
            return Capped::Above;
        }
    }
    Capped::Exact(sup)
}

fn rho_capped<T: Scalar>(fam: &RhoGrid<T>, atoms: &Atoms<T>, g: &Perm, h: &Perm, cutoff: T) -> Capped<T> {
    let fwd = directed(&fam.x_pinned, &fam.y_free, |f, fp, b| atoms.rho(f, fp, g, h, b), cutoff);
    let Capped::Exact(a) = fwd else { return Capped::Above };
    let bwd = directed(&fam.y_pinned, &fam.x_free, |fp, f, b| atoms.rho(f, fp, g, h, b), cutoff);
    let Capped::Exact(b) = bwd else { return Capped::Above };
    Capped::Exact(a.max(b))
}

/// Grid value of `ρ^π(g, h)` with its rounding slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoOracle<T> {
    pub value: T,
    pub slack: T,
}

/// Brute-force `ρ^π(g, h)`: Hausdorff distance between the grid families of
/// 1-Lipschitz functions on `X` and `Y`.
pub fn rho_oracle<T: Scalar>(
    x: &FiniteMMSpace<T>,
    y: &FiniteMMSpace<T>,
    g: &Perm,
    h: &Perm,
    pi: &Coupling<T>,
    grid: T,
) -> Result<RhoOracle<T>, ObsError> {
    let fam = RhoGrid::new(x, y, grid)?;
    rho_oracle_with(&fam, g, h, pi)
}

pub fn rho_oracle_with<T: Scalar>(fam: &RhoGrid<T>, g: &Perm, h: &Perm, pi: &Coupling<T>) -> Result<RhoOracle<T>, ObsError> {
    check_len(g.len(), pi.rows())?;
    check_len(h.len(), pi.cols())?;
    let atoms = Atoms::of(pi);
    match rho_capped(fam, &atoms, g, h, T::infinity()) {
        Capped::Exact(value) => Ok(RhoOracle { value, slack: fam.slack() }),
        Capped::Above => unreachable!("no cutoff"),
    }
}

/// How `ρ^π(g, h)` is evaluated inside [`dconc_pi`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DconcMode<T> {
    Upper(ProbeConfig),
    Oracle { grid: T },
}

/// `dconc^π` and the per-pair `ρ^π` values behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct DconcPi<T> {
    pub value: T,
    pub matrix: Vec<Vec<T>>,
    /// `(g, h)` attaining the Hausdorff value.
    pub critical_pair: (usize, usize),
    /// Oracle rounding slack, zero in upper mode.
    pub slack: T,
    /// False when a `d^π` certificate used the heuristic independent set.
    pub exact_inner: bool,
}

/// `dconc^π((X, G), (Y, H))`: Hausdorff distance between `G` and `H` under
/// `ρ^π`.
pub fn dconc_pi<T: Scalar>(a: &MMAction<T>, b: &MMAction<T>, pi: &Coupling<T>, mode: DconcMode<T>) -> Result<DconcPi<T>, ObsError> {
    match mode {
        DconcMode::Upper(probes) => dconc_pi_upper(a, b, pi, &probes),
        DconcMode::Oracle { grid } => {
            let fam = RhoGrid::new(a.space(), b.space(), grid)?;
            match dconc_pi_oracle(a, b, pi, &fam, T::infinity())? {
                Some(r) => Ok(r),
                None => unreachable!("no cutoff"),
            }
        }
    }
}

fn dconc_pi_upper<T: Scalar>(a: &MMAction<T>, b: &MMAction<T>, pi: &Coupling<T>, probes: &ProbeConfig) -> Result<DconcPi<T>, ObsError> {
    let (x, y) = (a.space(), b.space());
    let certs = d_pi_matrix(a, b, pi, DPiOptions::permissive())?;
    let exact_inner = certs.iter().flatten().all(|c| c.exact);
    // The identity is the first element of both groups.
    let g1 = (0..certs.len()).min_by(|&p, &q| crate::scalar::cmp(&certs[p][0].value, &certs[q][0].value)).unwrap_or(0);
    let h2 = (0..certs[0].len()).min_by(|&p, &q| crate::scalar::cmp(&certs[0][p].value, &certs[0][q].value)).unwrap_or(0);
    let (s1, s2) = (&certs[g1][0], &certs[0][h2]);
    let px = probe_family(x, probes);
    let py = probe_family(y, probes);
    let matrix: Vec<Vec<T>> = a
        .elements()
        .par_iter()
        .enumerate()
        .map(|(gi, g)| {
            b.elements()
                .iter()
                .enumerate()
                .map(|(hi, h)| {
                    let aux = RhoAux { s: certs[gi][hi].clone(), s1: s1.clone(), s2: s2.clone() };
                    rho_pi_upper(x, y, g, h, pi, &aux, &px, &py).map(|r| r.value)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let (value, critical_pair) = hausdorff_witness(&matrix);
    Ok(DconcPi { value, matrix, critical_pair, slack: T::zero(), exact_inner })
}

/// Oracle `dconc^π`, or `None` once it provably exceeds `cutoff`.
fn dconc_pi_oracle<T: Scalar>(
    a: &MMAction<T>,
    b: &MMAction<T>,
    pi: &Coupling<T>,
    fam: &RhoGrid<T>,
    cutoff: T,
) -> Result<Option<DconcPi<T>>, ObsError> {
    let atoms = Atoms::of(pi);
    let capped: Vec<Vec<Capped<T>>> = a
        .elements()
        .par_iter()
        .map(|g| b.elements().iter().map(|h| rho_capped(fam, &atoms, g, h, cutoff)).collect())
        .collect();
    // Every row and column needs an entry at or below the cutoff.
    let rows_ok = capped.iter().all(|r| r.iter().any(|c| matches!(c, Capped::Exact(_))));
    let cols_ok = (0..b.order()).all(|h| capped.iter().any(|r| matches!(r[h], Capped::Exact(_))));
    if !rows_ok || !cols_ok {
        return Ok(None);
    }
    let matrix: Vec<Vec<T>> = capped
        .iter()
        .map(|r| r.iter().map(|c| if let Capped::Exact(v) = c { *v } else { T::infinity() }).collect())
        .collect();
    let (value, critical_pair) = hausdorff_witness(&matrix);
    Ok(Some(DconcPi { value, matrix, critical_pair, slack: fam.slack(), exact_inner: true }))
}

/// Coupling search result for `dconc`.
#[derive(Debug, Clone, PartialEq)]
pub struct DconcUpper<T: Scalar> {
    pub value: T,
    pub coupling: Coupling<T>,
    pub evaluated: usize,
}

pub fn dconc_upper<T: Scalar>(a: &MMAction<T>, b: &MMAction<T>, cfg: &SearchConfig) -> Result<DconcUpper<T>, ObsError> {
    dconc_upper_seeded(a, b, cfg, &ProbeConfig { seed: cfg.seed, ..ProbeConfig::default() }, &[])
}

pub fn dconc_upper_seeded<T: Scalar>(
    a: &MMAction<T>,
    b: &MMAction<T>,
    cfg: &SearchConfig,
    probes: &ProbeConfig,
    seeds: &[Coupling<T>],
) -> Result<DconcUpper<T>, ObsError> {
    let out = minimize_over_couplings(a.space(), b.space(), cfg, seeds, |pi| {
        dconc_pi_upper(a, b, pi, probes).map(|r| (r.value, r.exact_inner))
    })?;
    Ok(DconcUpper { value: out.value, coupling: out.coupling, evaluated: out.evaluated })
}

/// Brute-force `dconc` over grid couplings and grid function families.
#[derive(Debug, Clone, PartialEq)]
pub struct DconcOracle<T: Scalar> {
    pub value: T,
    /// Coupling discretization `2 n m grid` plus the function rounding slack.
    pub err: T,
    pub coupling: Coupling<T>,
    pub enumerated: usize,
}

const DCONC_ORACLE_BATCH: usize = 32;

/// Minimum of the oracle `dconc^π` over grid couplings. Couplings are tried
/// in order of their box value and each is abandoned as soon as it is
/// certain to exceed the best value found in earlier batches, so the result
/// does not depend on scheduling.
pub fn dconc_oracle<T: Scalar>(a: &MMAction<T>, b: &MMAction<T>, coupling_grid: T, value_grid: T) -> Result<DconcOracle<T>, ObsError> {
    let (x, y) = (a.space(), b.space());
    let cells = x.len() * y.len();
    if cells > ORACLE_MAX_CELLS {
        return Err(ObsError::TooLarge(x.len().max(y.len())));
    }
    let fam = RhoGrid::new(x, y, value_grid)?;
    let all = grid_couplings(x.mass(), y.mass(), coupling_grid)?;
    let enumerated = all.len();
    let cands = orbit_representatives(a, b, all, coupling_grid);
    let keys: Vec<T> = cands.par_iter().map(|pi| box_pi(a, b, pi).map(|r| r.value)).collect::<Result<_, _>>()?;
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&p, &q| crate::scalar::cmp(&keys[p], &keys[q]).then(p.cmp(&q)));
    let mut best: Option<(T, usize)> = None;
    let mut start = 0;
    let mut batch = 1;
    while start < order.len() {
        let chunk = &order[start..(start + batch).min(order.len())];
        start += chunk.len();
        batch = (batch * 2).min(DCONC_ORACLE_BATCH);
        let cutoff = best.map_or(T::infinity(), |b| b.0);
        let results: Vec<Option<DconcPi<T>>> = chunk
            .par_iter()
            .map(|&k| dconc_pi_oracle(a, b, &cands[k], &fam, cutoff))
            .collect::<Result<_, _>>()?;
        for (&k, r) in chunk.iter().zip(results) {
            if let Some(r) = r {
                if best.is_none_or(|b| r.value < b.0) {
                    best = Some((r.value, k));
                }
            }
        }
        if best.is_some_and(|b| b.0 <= T::zero()) {
            break;
        }
    }
    let (value, k) = best.expect("the first batch runs without a cutoff");
    let err = T::lit(2.0) * T::from_usize_lossy(cells) * coupling_grid + fam.slack();
    Ok(DconcOracle { value, err, coupling: cands[k].clone(), enumerated })
}

/// Default value grid for the `ρ` oracle: an eighth of the larger diameter
/// for spaces of at most two points, a quarter otherwise.
pub fn default_value_grid<T: Scalar>(x: &FiniteMMSpace<T>, y: &FiniteMMSpace<T>) -> T {
    let diam = x.diam().max(y.diam());
    if diam <= T::zero() {
        return T::one();
    }
    let parts = if x.len().max(y.len()) <= 2 { 8.0 } else { 4.0 };
    diam / T::lit(parts)
}
