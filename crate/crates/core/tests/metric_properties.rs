use eqbox_core::boxdist::{d_pi, MapPair};
use eqbox_core::coupling::prokhorov;
use eqbox_core::group::{enumerate_aut, quotient, subgroups};
use eqbox_core::mmspace::{ky_fan, obs_diam_lower, obs_diam_oracle, partial_diameter};
use eqbox_core::{Plan, Space};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn prob(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() + 0.01 }).collect();
    let s: f64 = w.iter().sum();
    if s == 0.0 {
        return (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
    }
    w.iter().map(|v| v / s).collect()
}

/// Distinct lattice points under the `l¹` metric, so distances are integers.
fn lattice_space(rng: &mut ChaCha8Rng, n: usize) -> Space {
    let mut pts: Vec<(i64, i64)> = Vec::new();
    while pts.len() < n {
        let p = (rng.random_range(0..4), rng.random_range(0..4));
        if !pts.contains(&p) {
            pts.push(p);
        }
    }
    let dist = pts
        .iter()
        .map(|a| pts.iter().map(|b| ((a.0 - b.0).abs() + (a.1 - b.1).abs()) as f64).collect())
        .collect();
    Space::uniform(dist).unwrap()
}

fn plane_space(rng: &mut ChaCha8Rng, n: usize) -> Space {
    let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    Space::euclidean(&pts).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ky_fan_is_a_metric(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = prob(&mut rng, n);
        let f: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let d = |a: usize, b: usize| ky_fan(&f[a], &f[b], &mu).unwrap();
        prop_assert_eq!(d(0, 0), 0.0);
        prop_assert_eq!(d(0, 1), d(1, 0));
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-10);
        prop_assert!((0.0..=1.0).contains(&d(0, 1)));
    }

    #[test]
    fn prokhorov_is_a_metric(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = plane_space(&mut rng, n);
        let dist = space.dist_rows();
        let m: Vec<Vec<f64>> = (0..3).map(|_| prob(&mut rng, n)).collect();
        let d = |a: usize, b: usize| prokhorov(&m[a], &m[b], &dist).unwrap();
        prop_assert_eq!(d(0, 0), 0.0);
        prop_assert_eq!(d(0, 1), d(1, 0));
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-10);
    }

    #[test]
    fn partial_diameter_shrinks_as_kappa_grows(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mass = prob(&mut rng, n);
        let atoms: Vec<(f64, f64)> = mass.iter().map(|&m| (rng.random_range(-3.0..3.0), m)).collect();
        let mut last = f64::INFINITY;
        for k in 1..10 {
            let d = partial_diameter(&atoms, k as f64 / 10.0).unwrap();
            prop_assert!(d <= last + 1e-12);
            last = d;
        }
    }

    #[test]
    fn observable_diameter_bounds_agree(seed in any::<u64>(), n in 1usize..5, kappa in 0.05f64..0.6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = lattice_space(&mut rng, n);
        let grid = 0.5;
        let oracle = obs_diam_oracle(&space, kappa, grid).unwrap();
        let lower = obs_diam_lower(&space, kappa).unwrap();
        prop_assert!(lower <= oracle + grid + 1e-12, "lower {} oracle {}", lower, oracle);
        prop_assert!(oracle <= space.diam() + 1e-12);
    }

    #[test]
    fn quotient_metric_axioms(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = lattice_space(&mut rng, n);
        let aut = enumerate_aut(&space).unwrap();
        for sub in subgroups(&aut).unwrap() {
            let q = quotient(&sub).unwrap().space;
            let k = q.len();
            for a in 0..k {
                for b in 0..k {
                    prop_assert_eq!(q.d(a, b), q.d(b, a));
                    prop_assert_eq!(q.d(a, b) == 0.0, a == b);
                    for c in 0..k {
                        prop_assert!(q.d(a, c) <= q.d(a, b) + q.d(b, c) + 1e-12);
                    }
                }
            }
            prop_assert!((q.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn d_pi_is_a_pseudo_metric(seed in any::<u64>(), n in 2usize..5, m in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = lattice_space(&mut rng, n);
        let y = lattice_space(&mut rng, m);
        let plan: Vec<f64> = (0..n * m).map(|_| if rng.random_bool(0.4) { 0.0 } else { rng.random::<f64>() }).collect();
        let total: f64 = plan.iter().sum();
        prop_assume!(total > 0.0);
        let plan: Vec<f64> = plan.iter().map(|v| v / total).collect();
        let Ok(pi) = Plan::from_plan(n, m, plan) else { return Ok(()); };
        let (ax, ay) = (enumerate_aut(&x).unwrap(), enumerate_aut(&y).unwrap());
        let maps: Vec<MapPair> = ax.elements().iter().map(|g| MapPair::on_x(g.clone()))
            .chain(ay.elements().iter().map(|h| MapPair::on_y(h.clone())))
            .take(8)
            .collect();
        let d: Vec<Vec<f64>> = maps.iter().map(|p| maps.iter().map(|q| d_pi(p, q, &pi, &x, &y).unwrap().value).collect()).collect();
        for a in 0..maps.len() {
            prop_assert!(d[a][a].abs() <= 1e-12);
            for b in 0..maps.len() {
                prop_assert!((d[a][b] - d[b][a]).abs() <= 1e-12);
                for c in 0..maps.len() {
                    prop_assert!(d[a][c] <= d[a][b] + d[b][c] + 1e-12);
                }
            }
        }
    }
}
