//! The verification suite: property checks over seeded random instances and
//! the oracle corpus, one result per criterion.

use std::sync::OnceLock;

use eqbox_core::boxdist::{box_oracle, box_upper, d_pi, default_oracle_grid, BoxOracle, MapPair};
use eqbox_core::coupling::{compose_couplings, glue, grid_couplings, prokhorov};
use eqbox_core::group::{enumerate_aut, validate_action};
use eqbox_core::mmspace::{ky_fan, ky_fan_map};
use eqbox_core::obsdist::{dconc_oracle, default_value_grid, DconcOracle};
use eqbox_core::search::SearchConfig;
use eqbox_core::{Action, Plan, Relation, Space};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{corpus_pairs, oracle_corpus, CorpusEntry};
use crate::experiment::{run_lens_experiment, run_properness_probe, run_quotient_convergence, Named, QuotientOptions};
use crate::gen::{gen_cycle, CycleMetric, LensConfig};

/// Float tolerance for checks stated as exact.
pub const EXACT_TOL: f64 = 1e-12;
/// Slack for triangle inequalities of the distance suites.
pub const TRIANGLE_TOL: f64 = 1e-10;
/// Zero threshold for oracle values of isomorphic pairs.
pub const NONDEGEN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    pub violations: usize,
    pub detail: Vec<String>,
}

impl CriterionResult {
    fn new(id: u8, name: &str) -> Self {
        CriterionResult { id, name: name.into(), passed: true, checks: 0, violations: 0, detail: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations += 1;
            self.passed = false;
            if self.detail.len() < 20 {
                self.detail.push(format!("violation: {}", what()));
            }
        }
    }

    fn absorb(&mut self, checks: usize, bad: Vec<String>) {
        self.checks += checks;
        self.violations += bad.len();
        self.passed &= bad.is_empty();
        let room = 20usize.saturating_sub(self.detail.len());
        self.detail.extend(bad.into_iter().take(room).map(|b| format!("violation: {b}")));
    }

    fn note(&mut self, line: impl Into<String>) {
        self.detail.push(line.into());
    }

    /// `criterion N [PASS|FAIL] name (checks, violations)`.
    pub fn summary_line(&self) -> String {
        format!(
            "criterion {} [{}] {} ({} checks, {} violations)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.checks,
            self.violations
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

pub const CRITERIA: [u8; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

fn rng_for(seed: u64, criterion: u8) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(criterion as u64);
    rng
}

fn random_plan(rng: &mut ChaCha8Rng, rows: &[f64], cols: usize) -> Vec<f64> {
    let mut plan = Vec::with_capacity(rows.len() * cols);
    for &r in rows {
        let mut w: Vec<f64> = (0..cols).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() }).collect();
        if w.iter().all(|v| *v == 0.0) {
            w[rng.random_range(0..cols)] = 1.0;
        }
        let s: f64 = w.iter().sum();
        plan.extend(w.iter().map(|v| r * v / s));
    }
    plan
}

fn random_prob(rng: &mut ChaCha8Rng, n: usize, zeros: bool) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| if zeros && rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() + 1e-3 }).collect();
    if w.iter().all(|v| *v == 0.0) {
        w[0] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn random_relation(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Relation {
    let pairs: Vec<(usize, usize)> = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).collect();
    let keep: Vec<(usize, usize)> = pairs.into_iter().filter(|_| rng.random_bool(0.5)).collect();
    Relation::new(rows, cols, keep).expect("pairs in range")
}

fn random_space(rng: &mut ChaCha8Rng, n: usize) -> Space {
    loop {
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![2.0 * rng.random::<f64>(), 2.0 * rng.random::<f64>()]).collect();
        if let Ok(s) = Space::euclidean(&pts) {
            return s;
        }
    }
}

/// `min_k (c_k + d(a_k, ·))`, negated at random and optionally clipped to
/// `[-clip, clip]`.
fn random_lip(rng: &mut ChaCha8Rng, space: &Space, clip: Option<f64>) -> Vec<f64> {
    let n = space.len();
    let anchors: Vec<(usize, f64)> = (0..rng.random_range(1..=3)).map(|_| (rng.random_range(0..n), rng.random_range(-1.0..1.0))).collect();
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    (0..n)
        .map(|i| {
            let v = sign * anchors.iter().map(|&(a, c)| c + space.d(a, i)).fold(f64::INFINITY, f64::min);
            clip.map_or(v, |c| v.clamp(-c, c))
        })
        .collect()
}

fn criterion_1(seed: u64) -> CriterionResult {
    let mut res = CriterionResult::new(1, "coupling calculus");
    let mut rng = rng_for(seed, 1);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let mu = random_prob(&mut rng, 3, true);
        let sigma = Plan::from_plan(3, 3, random_plan(&mut rng, &mu, 3)).expect("valid plan");
        let tau = Plan::from_plan(3, 3, random_plan(&mut rng, &sigma.col_sums(), 3)).expect("valid plan");
        let ups = Plan::from_plan(3, 3, random_plan(&mut rng, &tau.col_sums(), 3)).expect("valid plan");
        let glued = glue(&sigma, &tau).expect("shared marginal");
        let d12 = max_diff(&glued.project_12(), sigma.plan());
        let d23 = max_diff(&glued.project_23(), tau.plan());
        worst = worst.max(d12).max(d23);
        res.check(d12 <= EXACT_TOL && d23 <= EXACT_TOL, || format!("marginal defect {d12:e} / {d23:e}"));
        let left = compose_couplings(&compose_couplings(&sigma, &tau).expect("chain"), &ups).expect("chain");
        let right = compose_couplings(&sigma, &compose_couplings(&tau, &ups).expect("chain")).expect("chain");
        let da = max_diff(left.plan(), right.plan());
        worst = worst.max(da);
        res.check(da <= EXACT_TOL, || format!("associativity defect {da:e}"));
    }
    for _ in 0..500 {
        let mu = random_prob(&mut rng, 3, true);
        let sigma = Plan::from_plan(3, 3, random_plan(&mut rng, &mu, 3)).expect("valid plan");
        let tau = Plan::from_plan(3, 3, random_plan(&mut rng, &sigma.col_sums(), 3)).expect("valid plan");
        let s = random_relation(&mut rng, 3, 3);
        let t = random_relation(&mut rng, 3, 3);
        let glued = glue(&sigma, &tau).expect("shared marginal");
        let composed = compose_couplings(&sigma, &tau).expect("chain");
        let ts = s.then(&t).expect("shapes agree");
        let dom: f64 = ts.dom().iter().map(|&i| sigma.mu_x()[i]).sum();
        let chain = [dom, composed.mass_of(&ts), glued.mass_of_chain(&s, &t), tau.mass_of(&t) + sigma.mass_of(&s) - 1.0];
        let ok = chain.windows(2).all(|w| w[0] >= w[1] - EXACT_TOL);
        res.check(ok, || format!("mass chain {chain:?}"));
    }
    res.note(format!("largest entrywise defect {worst:e}"));
    res
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_2(seed: u64) -> CriterionResult {
    let mut res = CriterionResult::new(2, "metric axioms");
    let mut rng = rng_for(seed, 2);
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let mu = random_prob(&mut rng, n, true);
        let f: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let kf = |a: usize, b: usize| ky_fan(&f[a], &f[b], &mu).expect("lengths agree");
        res.check(kf(0, 1) == kf(1, 0), || format!("ky_fan asymmetric {} vs {}", kf(0, 1), kf(1, 0)));
        res.check(kf(0, 2) <= kf(0, 1) + kf(1, 2) + TRIANGLE_TOL, || "ky_fan triangle".into());
    }
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let space = random_space(&mut rng, n);
        let dist = space.dist_rows();
        let m: Vec<Vec<f64>> = (0..3).map(|_| random_prob(&mut rng, n, true)).collect();
        let dp = |a: usize, b: usize| prokhorov(&m[a], &m[b], &dist).expect("valid input");
        res.check(dp(0, 1) == dp(1, 0), || format!("prokhorov asymmetric {} vs {}", dp(0, 1), dp(1, 0)));
        res.check(dp(0, 2) <= dp(0, 1) + dp(1, 2) + TRIANGLE_TOL, || "prokhorov triangle".into());
    }
    // d^π on G ⊔ H for every corpus pair and every permutation-grid coupling.
    let corpus = oracle_corpus();
    let pairs = corpus_pairs(corpus.len());
    let outcomes: Vec<(usize, Vec<String>)> = pairs
        .par_iter()
        .map(|&(i, j)| d_pi_axioms(&corpus[i], &corpus[j]))
        .collect();
    for (checks, bad) in outcomes {
        res.absorb(checks, bad);
    }
    res
}

/// Pseudo-metric axioms of `d^π` on the disjoint union of both groups.
fn d_pi_axioms(a: &CorpusEntry, b: &CorpusEntry) -> (usize, Vec<String>) {
    let (x, y) = (a.action.space(), b.action.space());
    let (n, m) = (x.len(), y.len());
    let grid = 1.0 / (n * m / gcd(n, m)) as f64;
    let mut plans = grid_couplings(x.mass(), y.mass(), grid).expect("uniform masses on the grid");
    plans.push(Plan::product(x.mass(), y.mass()));
    let maps: Vec<MapPair> = a
        .action
        .elements()
        .iter()
        .map(|g| MapPair::on_x(g.clone()))
        .chain(b.action.elements().iter().map(|h| MapPair::on_y(h.clone())))
        .collect();
    let k = maps.len();
    let mut checks = 0;
    let mut bad = Vec::new();
    for pi in &plans {
        let d: Vec<Vec<f64>> = maps
            .iter()
            .map(|p| maps.iter().map(|q| d_pi(p, q, pi, x, y).expect("within budget").value).collect())
            .collect();
        for p in 0..k {
            checks += 1;
            if d[p][p].abs() > EXACT_TOL {
                bad.push(format!("{} vs {}: d(γ, γ) = {}", a.id, b.id, d[p][p]));
            }
            for q in 0..k {
                checks += 1;
                if (d[p][q] - d[q][p]).abs() > EXACT_TOL {
                    bad.push(format!("{} vs {}: asymmetric", a.id, b.id));
                }
                for r in 0..k {
                    checks += 1;
                    if d[p][r] > d[p][q] + d[q][r] + EXACT_TOL {
                        bad.push(format!("{} vs {}: triangle", a.id, b.id));
                    }
                }
            }
        }
    }
    (checks, bad)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn criterion_3(seed: u64) -> CriterionResult {
    let mut res = CriterionResult::new(3, "Ky Fan lemmas");
    let mut rng = rng_for(seed, 3);
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let space = random_space(&mut rng, n);
        let mu = random_prob(&mut rng, n, true);
        let f = random_lip(&mut rng, &space, Some(1.0));
        let g = random_lip(&mut rng, &space, Some(1.0));
        let kf = ky_fan(&f, &g, &mu).expect("lengths agree");
        let l1: f64 = (0..n).map(|i| mu[i] * (f[i] - g[i]).abs()).sum();
        res.check(kf * kf <= l1 + EXACT_TOL, || format!("KF² = {} > L1 = {l1}", kf * kf));
        res.check(l1 <= 3.0 * kf + EXACT_TOL, || format!("L1 = {l1} > 3 KF = {}", 3.0 * kf));
    }
    let cycles: Vec<(Space, Action)> = (1..=8)
        .flat_map(|n| [CycleMetric::Geodesic, CycleMetric::Chord].map(|m| gen_cycle(n, m).expect("n ≥ 1")))
        .map(|c| (c.space().clone(), enumerate_aut(c.space()).expect("at most 8 points")))
        .collect();
    for _ in 0..1000 {
        let (space, aut) = &cycles[rng.random_range(0..cycles.len())];
        let f = random_lip(&mut rng, space, None);
        let f2 = random_lip(&mut rng, space, None);
        let g = &aut.elements()[rng.random_range(0..aut.order())];
        let g2 = &aut.elements()[rng.random_range(0..aut.order())];
        let fg: Vec<f64> = (0..space.len()).map(|i| f[g.apply(i)]).collect();
        let fg2: Vec<f64> = (0..space.len()).map(|i| f2[g2.apply(i)]).collect();
        let lhs = ky_fan(&fg, &fg2, space.mass()).expect("lengths agree");
        let rhs = ky_fan(&f, &f2, space.mass()).expect("lengths agree") + ky_fan_map(g.as_slice(), g2.as_slice(), space).expect("maps");
        res.check(lhs <= rhs + EXACT_TOL, || format!("composition bound {lhs} > {rhs}"));
    }
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let space = random_space(&mut rng, n);
        let f = random_lip(&mut rng, &space, None);
        let f2 = random_lip(&mut rng, &space, None);
        let mu = random_prob(&mut rng, n, true);
        let nu = random_prob(&mut rng, n, true);
        let gap = (ky_fan(&f, &f2, &mu).expect("lengths") - ky_fan(&f, &f2, &nu).expect("lengths")).abs();
        let dp = prokhorov(&mu, &nu, &space.dist_rows()).expect("valid input");
        res.check(gap <= 2.0 * dp + EXACT_TOL, || format!("measure change {gap} > 2 dP = {}", 2.0 * dp));
    }
    res
}

/// Oracle values for one corpus pair.
#[derive(Debug, Clone)]
pub struct PairOracle {
    pub i: usize,
    pub j: usize,
    pub box_eq: BoxOracle<f64>,
    pub box_plain: BoxOracle<f64>,
    pub dconc_eq: DconcOracle<f64>,
    pub dconc_plain: DconcOracle<f64>,
}

/// Oracle values over every unordered corpus pair, computed once.
pub struct OracleTable {
    pub corpus: Vec<CorpusEntry>,
    pub pairs: Vec<PairOracle>,
}

pub fn oracle_table() -> &'static OracleTable {
    static TABLE: OnceLock<OracleTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let corpus = oracle_corpus();
        let pairs = corpus_pairs(corpus.len())
            .into_par_iter()
            .map(|(i, j)| {
                let (a, b) = (&corpus[i].action, &corpus[j].action);
                let (x, y) = (a.space(), b.space());
                let grid = default_oracle_grid(x.len(), y.len());
                let vgrid = default_value_grid(x, y);
                let (pa, pb) = (Action::trivial(x.clone()), Action::trivial(y.clone()));
                PairOracle {
                    i,
                    j,
                    box_eq: box_oracle(a, b, grid).expect("corpus fits the oracle"),
                    box_plain: box_oracle(&pa, &pb, grid).expect("corpus fits the oracle"),
                    dconc_eq: dconc_oracle(a, b, grid, vgrid).expect("corpus fits the oracle"),
                    dconc_plain: dconc_oracle(&pa, &pb, grid, vgrid).expect("corpus fits the oracle"),
                }
            })
            .collect();
        OracleTable { corpus, pairs }
    })
}

fn criterion_4() -> CriterionResult {
    let mut res = CriterionResult::new(4, "cross-metric inequalities");
    let t = oracle_table();
    for p in &t.pairs {
        let name = || format!("{} vs {}", t.corpus[p.i].id, t.corpus[p.j].id);
        let (be, bp, de, dp) = (&p.box_eq, &p.box_plain, &p.dconc_eq, &p.dconc_plain);
        res.check(bp.value <= 2.0 * be.value + bp.err + EXACT_TOL, || format!("{}: plain box {} > 2 × {}", name(), bp.value, be.value));
        res.check(de.value <= 4.0 * be.value + de.err + EXACT_TOL, || format!("{}: dconc {} > 4 × box {}", name(), de.value, be.value));
        res.check(dp.value <= de.value + dp.err + de.err + EXACT_TOL, || format!("{}: plain dconc {} > {}", name(), dp.value, de.value));
        res.check(be.value <= 1.0 + EXACT_TOL && bp.value <= 1.0 + EXACT_TOL, || format!("{}: box above 1", name()));
    }
    res
}

fn criterion_5() -> CriterionResult {
    let mut res = CriterionResult::new(5, "nondegeneracy probe");
    let t = oracle_table();
    let (mut iso, mut non) = (0, 0);
    for p in &t.pairs {
        let (a, b) = (&t.corpus[p.i], &t.corpus[p.j]);
        let vals = [p.box_eq.value, p.dconc_eq.value];
        if a.class == b.class {
            iso += 1;
            res.check(vals.iter().all(|v| *v <= NONDEGEN_TOL), || format!("{} ≅ {} but values {vals:?}", a.id, b.id));
        } else {
            non += 1;
            res.check(vals.iter().all(|v| *v > 2.0 * NONDEGEN_TOL), || format!("{} ≇ {} but values {vals:?}", a.id, b.id));
        }
    }
    res.note(format!("{iso} isomorphic pairs, {non} non-isomorphic pairs"));
    res
}

fn criterion_6() -> CriterionResult {
    let mut res = CriterionResult::new(6, "pinned oracle values");
    let two = |d: f64| Space::equidistant(2, d).expect("valid");
    let swap = validate_action(two(1.0), &[vec![1, 0]]).expect("isometry");
    let cases = [
        ("two-point 1 vs 2, trivial groups", Action::trivial(two(1.0)), Action::trivial(two(2.0)), 0.5),
        ("two-point Z2 vs trivial", swap, Action::trivial(two(1.0)), 1.0),
    ];
    for (name, a, b, expected) in cases {
        let oracle = box_oracle(&a, &b, 0.125).expect("two points fit");
        res.check(oracle.value == expected, || format!("{name}: oracle {} ≠ {expected}", oracle.value));
        res.check(oracle.err <= 4.0 * 0.125, || format!("{name}: err {}", oracle.err));
        let upper = box_upper(&a, &b, &SearchConfig::default()).expect("small instance");
        res.check((upper.value - oracle.value).abs() <= EXACT_TOL, || format!("{name}: upper {} ≠ oracle {}", upper.value, oracle.value));
        res.note(format!("{name}: oracle {} err {}, upper {}", oracle.value, oracle.err, upper.value));
    }
    res
}

/// Cycles `C_{2n}` with their rotation groups, and the target itself, against
/// `C_8` with `Z_8`.
pub fn cycle_corpus() -> (Vec<Named>, Named) {
    let target = Named::new("C8/Z8", gen_cycle(8, CycleMetric::Geodesic).expect("n ≥ 1"));
    let mut seq: Vec<Named> = (1..=4)
        .map(|n| Named::new(format!("C{}/Z{}", 2 * n, 2 * n), gen_cycle(2 * n, CycleMetric::Geodesic).expect("n ≥ 1")))
        .collect();
    seq.push(target.clone());
    (seq, target)
}

fn criterion_7(seed: u64) -> CriterionResult {
    let mut res = CriterionResult::new(7, "quotient theorems");
    let (seq, target) = cycle_corpus();
    let opts = QuotientOptions { search: SearchConfig { seed, ..SearchConfig::default() }, ..QuotientOptions::default() };
    let report = match run_quotient_convergence(&seq, &target, &opts) {
        Ok(r) => r,
        Err(e) => {
            res.check(false, || format!("experiment failed: {e}"));
            return res;
        }
    };
    let col = |m: &str| report.metric(m).map(|r| r.value).collect::<Vec<_>>();
    let (beq, bq, margin) = (col("box_eq"), col("box_quot"), col("conc_quot_margin"));
    for (k, member) in seq.iter().enumerate() {
        res.check(bq[k] <= beq[k] + EXACT_TOL, || format!("{}: quotient box {} > equivariant {}", member.id, bq[k], beq[k]));
        res.check(margin[k] >= -EXACT_TOL, || format!("{}: margin {}", member.id, margin[k]));
    }
    for r in &report.rows {
        res.note(format!("{} {} = {}", r.instance, r.metric, r.value));
    }
    res
}

/// Sequences for the properness probe with their expected limit groups.
pub fn properness_corpus() -> Vec<(String, Vec<Named>, Space, Action, bool)> {
    let c4 = gen_cycle(4, CycleMetric::Geodesic).expect("n ≥ 1");
    let two = Space::equidistant(2, 1.0).expect("valid");
    let z2 = validate_action(two.clone(), &[vec![1, 0]]).expect("isometry");
    let c4_triv = Action::trivial(c4.space().clone());
    let constant = |a: &Action, name: &str| (0..3).map(|k| Named::new(format!("{name}#{k}"), a.clone())).collect::<Vec<_>>();
    // Each point of C4 doubled into a pair at distance δ, with the rotation
    // acting on pairs.
    let clustered: Vec<Named> = [0.125, 0.0625, 0.03125]
        .iter()
        .map(|&delta| {
            let dist = (0..8)
                .map(|p| (0..8).map(|q| c4.space().d(p / 2, q / 2) + if p % 2 != q % 2 { delta } else { 0.0 }).collect())
                .collect();
            let space = Space::uniform(dist).expect("l1 sum of metrics");
            let rot: Vec<usize> = (0..8).map(|p| (p + 2) % 8).collect();
            Named::new(format!("C4x2/δ={delta}"), validate_action(space, &[rot]).expect("isometry"))
        })
        .collect();
    vec![
        ("C4 with Z4".into(), constant(&c4, "C4/Z4"), c4.space().clone(), c4.clone(), true),
        ("two points with Z2".into(), constant(&z2, "2pt/Z2"), two, z2.clone(), true),
        ("C4 with the trivial group".into(), constant(&c4_triv, "C4/1"), c4.space().clone(), c4_triv.clone(), true),
        ("doubled C4 with Z4".into(), clustered, c4.space().clone(), c4, false),
    ]
}

fn criterion_8(seed: u64) -> CriterionResult {
    let mut res = CriterionResult::new(8, "properness probe");
    let search = SearchConfig { seed, ..SearchConfig::default() };
    for (name, seq, y, expected, constant) in properness_corpus() {
        let out = match run_properness_probe(&seq, &y, &search) {
            Ok(o) => o,
            Err(e) => {
                res.check(false, || format!("{name}: {e}"));
                continue;
            }
        };
        for (k, g) in out.groups.iter().enumerate() {
            res.check(g.elements() == expected.elements(), || format!("{name} #{k}: limit group of order {}", g.order()));
        }
        if constant {
            res.check(out.defects.iter().all(|d| *d == 0.0), || format!("{name}: defects {:?}", out.defects));
        } else {
            res.check(out.defects.windows(2).all(|w| w[1] <= w[0] + EXACT_TOL), || format!("{name}: defects {:?}", out.defects));
        }
        res.note(format!("{name}: limit order {}, defects {:?}", expected.order(), out.defects));
    }
    res
}

/// Lens configuration used by the trend check.
pub fn lens_trend_config(seed: u64) -> LensConfig {
    LensConfig {
        js: vec![4],
        n_of_j: vec![16],
        a: (0..16).map(|i| 0.4 * 0.5f64.powi(i)).collect(),
        samples: 8,
        sample_sweep: vec![1, 2, 4, 8],
        k: 4,
        n: 3,
        seed,
        ..LensConfig::default()
    }
}

fn criterion_9(seed: u64) -> CriterionResult {
    let mut res = CriterionResult::new(9, "lens trend");
    let mut monotone = 0;
    for s in 0..3u64 {
        let cfg = lens_trend_config(seed.wrapping_mul(3).wrapping_add(s));
        let report = match run_lens_experiment(&cfg) {
            Ok(r) => r,
            Err(e) => {
                res.check(false, || format!("seed {}: {e}", cfg.seed));
                continue;
            }
        };
        let sweep = cfg.sweep();
        let eq: Vec<f64> = sweep.iter().map(|k| report.metric(&format!("box_eq_s{k}")).next().map_or(f64::NAN, |r| r.value)).collect();
        let q: Vec<f64> = sweep.iter().map(|k| report.metric(&format!("box_quot_s{k}")).next().map_or(f64::NAN, |r| r.value)).collect();
        if eq.windows(2).all(|w| w[1] <= w[0] + EXACT_TOL) {
            monotone += 1;
        }
        for k in 0..sweep.len() {
            res.check(q[k] <= eq[k] + EXACT_TOL, || format!("seed {} samples {}: quotient {} > equivariant {}", cfg.seed, sweep[k], q[k], eq[k]));
        }
        res.note(format!("seed {}: equivariant {eq:?}, quotient {q:?}", cfg.seed));
    }
    res.check(monotone >= 2, || format!("nonincreasing on {monotone} of 3 seeds"));
    res
}

pub fn run_criterion(id: u8, seed: u64) -> CriterionResult {
    match id {
        1 => criterion_1(seed),
        2 => criterion_2(seed),
        3 => criterion_3(seed),
        4 => criterion_4(),
        5 => criterion_5(),
        6 => criterion_6(),
        7 => criterion_7(seed),
        8 => criterion_8(seed),
        9 => criterion_9(seed),
        _ => {
            let mut r = CriterionResult::new(id, "unknown criterion");
            r.check(false, || format!("no criterion {id}"));
            r
        }
    }
}

pub fn run_suite(seed: u64) -> VerifyReport {
    VerifyReport { seed, criteria: CRITERIA.iter().map(|&id| run_criterion(id, seed)).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_lipschitz_functions_are_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let s = random_space(&mut rng, 5);
            let f = random_lip(&mut rng, &s, Some(0.5));
            assert!(eqbox_core::mmspace::lipschitz_violation(&s, &f).is_none());
            assert!(f.iter().all(|v| v.abs() <= 0.5));
        }
    }

    #[test]
    fn random_plans_have_requested_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows = [0.2, 0.0, 0.8];
        let plan = Plan::from_plan(3, 4, random_plan(&mut rng, &rows, 4)).unwrap();
        assert!(max_diff(&plan.row_sums(), &rows) < 1e-15);
    }

    #[test]
    fn summary_line_format() {
        let mut r = CriterionResult::new(3, "x");
        r.check(true, String::new);
        assert_eq!(r.summary_line(), "criterion 3 [PASS] x (1 checks, 0 violations)");
        r.check(false, || "bad".into());
        assert!(r.summary_line().contains("[FAIL]"));
    }
}
