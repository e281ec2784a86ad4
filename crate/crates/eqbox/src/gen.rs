//! Instance generators: cycles, lens-space samples and Gaussian samples.

use std::f64::consts::PI;

use eqbox_core::group::{validate_action, GroupError};
use eqbox_core::search::SearchConfig;
use eqbox_core::{Action, Perm, Space, SpaceError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("{points} points exceed the point budget of {budget}")]
    BudgetExceeded { points: usize, budget: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CycleMetric {
    #[default]
    Geodesic,
    Chord,
}

/// `n` equally spaced points on a circle of circumference 1 with the
/// rotation action of `Z_n`.
pub fn gen_cycle(n: usize, metric: CycleMetric) -> Result<Action, GenError> {
    if n == 0 {
        return Err(GenError::Config("a cycle needs at least one point".into()));
    }
    let arc = |i: usize, j: usize| {
        let k = i.abs_diff(j);
        k.min(n - k) as f64 / n as f64
    };
    let dist = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match metric {
                    CycleMetric::Geodesic => arc(i, j),
                    CycleMetric::Chord => (PI * arc(i, j)).sin() / PI,
                })
                .collect()
        })
        .collect();
    let labels = (0..n).map(|i| format!("c{i}")).collect();
    let space = Space::new(labels, dist, vec![1.0 / n as f64; n])?;
    Ok(validate_action(space, &[Perm::rotation(n, 1).as_slice().to_vec()])?)
}

/// Parameters of the lens and Gaussian samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LensConfig {
    /// Cyclic orders `j`, ascending.
    pub js: Vec<usize>,
    /// Complex dimension for each `j`.
    pub n_of_j: Vec<usize>,
    /// Target axes `a_i`.
    pub a: Vec<f64>,
    /// Axes `a_ij` for each `j`; `a` truncated to `n(j)` when empty.
    pub a_of_j: Vec<Vec<f64>>,
    /// Base points per space.
    pub samples: usize,
    /// Sample counts to sweep; `[samples]` when empty.
    pub sample_sweep: Vec<usize>,
    /// Order of the cyclic group standing in for `U(1)`.
    #[serde(rename = "K")]
    pub k: usize,
    /// Coordinates kept in the Gaussian truncation.
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub point_budget: usize,
    pub search: SearchConfig,
}

impl Default for LensConfig {
    fn default() -> Self {
        LensConfig {
            js: vec![2, 4, 8],
            n_of_j: vec![3, 3, 3],
            a: vec![0.4, 0.2, 0.1],
            a_of_j: Vec::new(),
            samples: 8,
            sample_sweep: Vec::new(),
            k: 8,
            n: 3,
            seed: 0,
            point_budget: 128,
            search: SearchConfig::default(),
        }
    }
}

impl LensConfig {
    pub fn check(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::Config(m.into()));
        if self.n_of_j.len() != self.js.len() {
            return bad("n_of_j must have one entry per j");
        }
        if !self.a_of_j.is_empty() && self.a_of_j.len() != self.js.len() {
            return bad("a_of_j must be empty or have one entry per j");
        }
        if self.js.windows(2).any(|w| w[0] >= w[1]) || self.js.contains(&0) {
            return bad("js must be positive and strictly ascending");
        }
        if self.k == 0 || self.n == 0 || self.samples == 0 || self.sample_sweep.contains(&0) {
            return bad("K, N and sample counts must be positive");
        }
        let axes_ok = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        if !axes_ok(&self.a) || !self.a_of_j.iter().all(|v| axes_ok(v)) {
            return bad("axes must be positive and finite");
        }
        if self.a.len() < self.n {
            return bad("a must provide at least N axes");
        }
        for (idx, &dim) in self.n_of_j.iter().enumerate() {
            let have = self.a_of_j.get(idx).map_or(self.a.len(), Vec::len);
            if dim == 0 || have < dim {
                return bad("each n(j) must be positive and covered by the axes");
            }
        }
        Ok(())
    }

    /// Sample counts visited by the lens experiment.
    pub fn sweep(&self) -> Vec<usize> {
        if self.sample_sweep.is_empty() {
            vec![self.samples]
        } else {
            self.sample_sweep.clone()
        }
    }

    fn axes_for(&self, idx: usize) -> Vec<f64> {
        let dim = self.n_of_j[idx];
        match self.a_of_j.get(idx) {
            Some(v) => v[..dim].to_vec(),
            None => self.a[..dim].to_vec(),
        }
    }
}

/// Complex vectors as `(re, im)` pairs, rotated by `e^{2πik/order}`.
fn orbit_points(base: &[Vec<(f64, f64)>], order: usize) -> Vec<Vec<f64>> {
    let mut pts = Vec::with_capacity(base.len() * order);
    for z in base {
        for k in 0..order {
            let (s, c) = (2.0 * PI * k as f64 / order as f64).sin_cos();
            pts.push(z.iter().flat_map(|&(re, im)| [re * c - im * s, re * s + im * c]).collect());
        }
    }
    pts
}

/// Point `b·order + k` is `e^{2πik/order} z_b`; the generator advances `k`.
fn orbit_action(base: &[Vec<(f64, f64)>], order: usize, prefix: &str, budget: usize) -> Result<Action, GenError> {
    let points = base.len() * order;
    if points > budget {
        return Err(GenError::BudgetExceeded { points, budget });
    }
    let coords = orbit_points(base, order);
    let space = Space::euclidean(&coords)?;
    let labels = (0..points).map(|p| format!("{prefix}{}.{}", p / order, p % order)).collect();
    let space = Space::new(labels, space.dist_rows(), space.mass().to_vec())?;
    let gen: Vec<usize> = (0..points).map(|p| p - p % order + (p % order + 1) % order).collect();
    Ok(validate_action(space, &[gen])?)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `samples` orbits of `Z_j` on the ellipsoid `E_j` with axes
/// `α_ij = a_ij √n(j)`, uniform measure, Euclidean distances. Base points
/// are the image of uniform points on the unit sphere of `C^{n(j)}`; the
/// base points for fewer samples are a prefix of those for more.
pub fn gen_lens_instance(cfg: &LensConfig, j: usize) -> Result<Action, GenError> {
    cfg.check()?;
    let idx = cfg
        .js
        .iter()
        .position(|&x| x == j)
        .ok_or_else(|| GenError::Config(format!("j = {j} is not listed in js")))?;
    let axes = cfg.axes_for(idx);
    let dim = axes.len();
    let scale = (dim as f64).sqrt();
    let mut rng = stream_rng(cfg.seed, j as u64);
    let base: Vec<Vec<(f64, f64)>> = (0..cfg.samples)
        .map(|_| {
            let g: Vec<f64> = (0..2 * dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            (0..dim).map(|i| (axes[i] * scale * g[2 * i] / norm, axes[i] * scale * g[2 * i + 1] / norm)).collect()
        })
        .collect();
    orbit_action(&base, j, "e", cfg.point_budget)
}

/// `samples` orbits of `Z_K` in the first `N` coordinates of the Gaussian
/// space: coordinate `i` is complex Gaussian with `E|z_i|² = a_i²`.
pub fn gen_gaussian_instance(cfg: &LensConfig) -> Result<Action, GenError> {
    cfg.check()?;
    let mut rng = stream_rng(cfg.seed, u64::MAX);
    let base: Vec<Vec<(f64, f64)>> = (0..cfg.samples)
        .map(|_| {
            (0..cfg.n)
                .map(|i| {
                    let s = cfg.a[i] / 2f64.sqrt();
                    (s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal))
                })
                .collect()
        })
        .collect();
    orbit_action(&base, cfg.k, "g", cfg.point_budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use eqbox_core::group::quotient;

    #[test]
    fn cycle_examples() {
        let one = gen_cycle(1, CycleMetric::Geodesic).unwrap();
        assert_eq!((one.space().len(), one.order()), (1, 1));
        let c4 = gen_cycle(4, CycleMetric::Geodesic).unwrap();
        assert_eq!(c4.space().d(0, 1), 0.25);
        assert_eq!(c4.space().d(0, 2), 0.5);
        assert_eq!(c4.order(), 4);
        let q = quotient(&c4).unwrap();
        assert_eq!(q.space.len(), 1);
        let ch = gen_cycle(6, CycleMetric::Chord).unwrap();
        assert!((ch.space().d(0, 3) - 1.0 / PI).abs() < 1e-15);
        assert!(gen_cycle(0, CycleMetric::Chord).is_err());
    }

    fn tiny(j: usize, dim: usize, samples: usize) -> LensConfig {
        LensConfig {
            js: vec![j],
            n_of_j: vec![dim],
            a: vec![1.0; dim.max(1)],
            samples,
            k: j,
            n: dim,
            ..LensConfig::default()
        }
    }

    #[test]
    fn lens_examples() {
        let triv = gen_lens_instance(&tiny(1, 2, 3), 1).unwrap();
        assert_eq!((triv.space().len(), triv.order()), (3, 1));
        // One base point in C with unit axis: the orbit is an antipodal pair.
        let pair = gen_lens_instance(&tiny(2, 1, 1), 2).unwrap();
        assert_eq!(pair.order(), 2);
        assert!((pair.space().d(0, 1) - 2.0).abs() < 1e-12);
        assert_eq!(pair.elements()[1].as_slice(), &[1, 0]);
    }

    #[test]
    fn gaussian_orbits_keep_radii() {
        let cfg = LensConfig { k: 5, n: 1, samples: 3, ..LensConfig::default() };
        let g = gen_gaussian_instance(&cfg).unwrap();
        assert_eq!(g.order(), 5);
        let one = gen_gaussian_instance(&LensConfig { k: 1, ..cfg.clone() }).unwrap();
        assert!(one.is_trivial());
        // Points in one orbit sit at equal distances from their neighbours.
        let s = g.space();
        for b in 0..3 {
            let first = s.d(5 * b, 5 * b + 1);
            for k in 1..5 {
                assert!((s.d(5 * b + k, 5 * b + (k + 1) % 5) - first).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fewer_samples_are_a_prefix() {
        let cfg = LensConfig { samples: 4, ..LensConfig::default() };
        let big = gen_lens_instance(&cfg, 4).unwrap();
        let small = gen_lens_instance(&LensConfig { samples: 2, ..cfg }, 4).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!((big.space().d(i, j) - small.space().d(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let cfg = LensConfig { samples: 20, point_budget: 50, ..LensConfig::default() };
        assert!(matches!(gen_gaussian_instance(&cfg), Err(GenError::BudgetExceeded { points: 160, budget: 50 })));
    }
}
