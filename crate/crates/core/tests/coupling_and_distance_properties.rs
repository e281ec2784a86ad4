use eqbox_core::boxdist::{box_oracle, box_pi, box_upper, d_pi, MapPair};
use eqbox_core::coupling::{compose_couplings, glue, Relation};
use eqbox_core::group::{enumerate_aut, extract_limit_group, subgroups, thick_part, ThickPartParams};
use eqbox_core::mmspace::LipFunction;
use eqbox_core::obsdist::{mcshane_extend, rho_oracle, rho_pi_upper, RhoAux};
use eqbox_core::search::{northwest_corner, SearchConfig};
use eqbox_core::{Action, Perm, Plan, Space};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rows_to(rng: &mut ChaCha8Rng, rows: &[f64], cols: usize) -> Plan {
    let mut plan = Vec::new();
    for &r in rows {
        let w: Vec<f64> = (0..cols).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = w.iter().sum();
        plan.extend(w.iter().map(|v| r * v / s));
    }
    Plan::from_plan(rows.len(), cols, plan).unwrap()
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn small_space(rng: &mut ChaCha8Rng, n: usize) -> Space {
    loop {
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0..3) as f64, rng.random_range(0..3) as f64]).collect();
        if let Ok(s) = Space::euclidean(&pts) {
            return s;
        }
    }
}

/// Convex combination of northwest-corner couplings in random orders.
fn mixed_coupling(rng: &mut ChaCha8Rng, mu: &[f64], nu: &[f64]) -> Plan {
    use rand::seq::SliceRandom;
    let (n, m) = (mu.len(), nu.len());
    let mut plan = vec![0.0; n * m];
    let parts = rng.random_range(1..=3);
    let w: Vec<f64> = (0..parts).map(|_| rng.random::<f64>() + 0.1).collect();
    let total: f64 = w.iter().sum();
    for wk in w {
        let mut rows: Vec<usize> = (0..n).collect();
        let mut cols: Vec<usize> = (0..m).collect();
        rows.shuffle(rng);
        cols.shuffle(rng);
        let nw = northwest_corner(mu, nu, &rows, &cols);
        for (p, v) in plan.iter_mut().zip(nw.plan()) {
            *p += wk / total * v;
        }
    }
    Plan::new(n, m, plan, mu.to_vec(), nu.to_vec()).unwrap()
}

fn random_space_action(rng: &mut ChaCha8Rng, n: usize) -> Action {
    let space = small_space(rng, n);
    let subs = subgroups(&enumerate_aut(&space).unwrap()).unwrap();
    subs[rng.random_range(0..subs.len())].clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gluing_recovers_both_couplings(seed in any::<u64>(), n in 1usize..5, m in 1usize..5, k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = rows_to(&mut rng, &uniform(n), m);
        let tau = rows_to(&mut rng, &sigma.col_sums(), k);
        let glued = glue(&sigma, &tau).unwrap();
        for (a, b) in glued.project_12().iter().zip(sigma.plan()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for (a, b) in glued.project_23().iter().zip(tau.plan()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn composition_is_associative(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = rows_to(&mut rng, &uniform(n), n);
        let t = rows_to(&mut rng, &s.col_sums(), n);
        let u = rows_to(&mut rng, &t.col_sums(), n);
        let left = compose_couplings(&compose_couplings(&s, &t).unwrap(), &u).unwrap();
        let right = compose_couplings(&s, &compose_couplings(&t, &u).unwrap()).unwrap();
        for (a, b) in left.plan().iter().zip(right.plan()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn composed_relations_keep_mass(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = rows_to(&mut rng, &uniform(n), n);
        let tau = rows_to(&mut rng, &sigma.col_sums(), n);
        let pick = |rng: &mut ChaCha8Rng| {
            let pairs: Vec<(usize, usize)> = (0..n * n).filter(|_| rng.random_bool(0.5)).map(|p| (p / n, p % n)).collect();
            Relation::new(n, n, pairs).unwrap()
        };
        let (s, t) = (pick(&mut rng), pick(&mut rng));
        let composed = compose_couplings(&sigma, &tau).unwrap();
        prop_assert!(composed.mass_of(&s.then(&t).unwrap()) >= tau.mass_of(&t) + sigma.mass_of(&s) - 1.0 - 1e-12);
    }

    #[test]
    fn box_of_a_composition_is_bounded_by_the_parts(seed in any::<u64>(), n in 1usize..4, m in 1usize..4, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c) = (
            random_space_action(&mut rng, n),
            random_space_action(&mut rng, m),
            random_space_action(&mut rng, k),
        );
        let p1 = mixed_coupling(&mut rng, a.space().mass(), b.space().mass());
        let p2 = mixed_coupling(&mut rng, b.space().mass(), c.space().mass());
        let p13 = compose_couplings(&p1, &p2).unwrap();
        let lhs = box_pi(&a, &c, &p13).unwrap().value;
        let rhs = box_pi(&a, &b, &p1).unwrap().value + box_pi(&b, &c, &p2).unwrap().value;
        prop_assert!(lhs <= rhs + 1e-9, "{} > {}", lhs, rhs);
    }

    #[test]
    fn mcshane_extensions_are_lipschitz(seed in any::<u64>(), n in 1usize..6, m in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = small_space(&mut rng, n);
        let y = small_space(&mut rng, m);
        let f = LipFunction::distance_from(&x, rng.random_range(0..n));
        let pairs: Vec<(usize, usize)> = (0..n * m).filter(|_| rng.random_bool(0.5)).map(|p| (p / m, p % m)).collect();
        prop_assume!(!pairs.is_empty());
        let s = Relation::new(n, m, pairs).unwrap();
        prop_assert!(mcshane_extend(&f, &s, &y).is_ok());
    }

    #[test]
    fn thick_parts_are_monotone_and_invariant(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = small_space(&mut rng, n);
        let aut = enumerate_aut(&space).unwrap();
        let r = rng.random_range(0.0..2.0);
        let (v1, v2) = (rng.random_range(0.0..0.5), rng.random_range(0.5..1.0));
        let big = thick_part(&space, ThickPartParams::new(r, v1).unwrap());
        let small = thick_part(&space, ThickPartParams::new(r, v2).unwrap());
        prop_assert!(small.is_subset(&big));
        let wider = thick_part(&space, ThickPartParams::new(r + 0.5, v1).unwrap());
        prop_assert!(big.is_subset(&wider));
        for g in aut.elements() {
            let moved: std::collections::BTreeSet<usize> = big.iter().map(|&i| g.apply(i)).collect();
            prop_assert_eq!(&moved, &big);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn box_upper_is_not_below_the_oracle(seed in any::<u64>(), n in 1usize..4, m in 1usize..4) {
        prop_assume!(n * m <= 9);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_space_action(&mut rng, n);
        let b = random_space_action(&mut rng, m);
        let grid = eqbox_core::boxdist::default_oracle_grid(n, m);
        let oracle = box_oracle(&a, &b, grid).unwrap();
        let upper = box_upper(&a, &b, &SearchConfig { budget: 16, local_rounds: 4, ..SearchConfig::default() }).unwrap();
        prop_assert!(upper.value >= oracle.value - oracle.err - 1e-12);
        prop_assert!(upper.value <= 1.0 + 1e-12);
    }

    #[test]
    fn rho_oracle_respects_the_lemma_bound(seed in any::<u64>(), n in 1usize..4, m in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_space_action(&mut rng, n);
        let b = random_space_action(&mut rng, m);
        let (x, y) = (a.space(), b.space());
        let pi = mixed_coupling(&mut rng, x.mass(), y.mass());
        let g = &a.elements()[rng.random_range(0..a.order())];
        let h = &b.elements()[rng.random_range(0..b.order())];
        let cert = |p: &Perm, q: &Perm| d_pi(&MapPair::on_x(p.clone()), &MapPair::on_y(q.clone()), &pi, x, y).unwrap();
        let aux = RhoAux { s: cert(g, h), s1: cert(g, b.identity()), s2: cert(a.identity(), h) };
        let upper = rho_pi_upper(x, y, g, h, &pi, &aux, &[], &[]).unwrap();
        let grid = (x.diam().max(y.diam()) / 4.0).max(0.125);
        let oracle = rho_oracle(x, y, g, h, &pi, grid).unwrap();
        prop_assert!(oracle.value - oracle.slack <= upper.lemma_bound + 1e-12);
    }
}

#[test]
fn identity_coupling_extracts_the_acting_group() {
    let pts: Vec<Vec<f64>> = (0..4).map(|k| {
        let t = std::f64::consts::FRAC_PI_2 * k as f64;
        vec![t.cos(), t.sin()]
    }).collect();
    let square = Space::euclidean(&pts).unwrap();
    let aut = enumerate_aut(&square).unwrap();
    for sub in subgroups(&aut).unwrap() {
        let matches = extract_limit_group(&sub, &square, &Relation::identity(4), 0.0).unwrap();
        for m in &matches {
            assert_eq!(m.g, m.h);
            assert_eq!(m.defect, 0.0);
            assert!(m.within_eps);
        }
    }
}
