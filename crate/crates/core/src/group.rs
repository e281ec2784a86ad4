//! Measure-preserving isometric actions of finite groups, automorphism
//! enumeration, quotient spaces, thick parts and limit-group extraction.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::{CouplingError, Relation};
use crate::mmspace::{FiniteMMSpace, SpaceError};
use crate::scalar::{sorted_distinct, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroupError {
    #[error("generator {0} is not a permutation of the points")]
    NotPermutation(usize),
    #[error("generator {0} moves the pair ({1}, {2}) to a different distance")]
    NotIsometry(usize, usize, usize),
    #[error("generator {0} does not preserve the mass of point {1}")]
    NotMeasurePreserving(usize, usize),
    #[error("generated group exceeds {0} elements")]
    GroupTooLarge(usize),
    #[error("space with {0} points exceeds the automorphism search budget")]
    TooLarge(usize),
    #[error("relation is empty")]
    EmptyRelation,
    #[error("thick-part parameters out of range: r = {r}, v = {v}")]
    InvalidThickParams { r: f64, v: f64 },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
}

/// A permutation of point indices; `p[i]` is the image of `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Perm(Vec<usize>);

impl Perm {
    pub fn identity(n: usize) -> Self {
        Perm((0..n).collect())
    }

    /// Accepts any bijection of `0..len`.
    pub fn new(images: Vec<usize>) -> Option<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return None;
            }
        }
        Some(Perm(images))
    }

    /// Cyclic shift `i ↦ i + k mod n`.
    pub fn rotation(n: usize, k: usize) -> Self {
        Perm((0..n).map(|i| (i + k) % n.max(1)).collect())
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &j)| i == j)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// `self ∘ other`: apply `other` first.
    pub fn after(&self, other: &Perm) -> Perm {
        Perm(other.0.iter().map(|&i| self.0[i]).collect())
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Perm(inv)
    }
}

/// A finite group of automorphisms of a space, stored as its full element
/// list in lexicographic order (so the identity comes first).
#[derive(Debug, Clone, PartialEq)]
pub struct MMAction<T: Scalar> {
    space: FiniteMMSpace<T>,
    elements: Vec<Perm>,
}

/// Default cap on the order of a generated group.
pub const MAX_GROUP_ORDER: usize = 50_000;

fn check_automorphism<T: Scalar>(space: &FiniteMMSpace<T>, index: usize, images: &[usize]) -> Result<Perm, GroupError> {
    let n = space.len();
    if images.len() != n {
        return Err(GroupError::NotPermutation(index));
    }
    let perm = Perm::new(images.to_vec()).ok_or(GroupError::NotPermutation(index))?;
    let tol = T::input_tol();
    for i in 0..n {
        for j in i + 1..n {
            if (space.d(perm.apply(i), perm.apply(j)) - space.d(i, j)).abs() > tol {
                return Err(GroupError::NotIsometry(index, i, j));
            }
        }
    }
    for i in 0..n {
        if (space.mass()[perm.apply(i)] - space.mass()[i]).abs() > tol {
            return Err(GroupError::NotMeasurePreserving(index, i));
        }
    }
    Ok(perm)
}

/// Checks every generator and returns the action of the group they generate.
pub fn validate_action<T: Scalar>(space: FiniteMMSpace<T>, generators: &[Vec<usize>]) -> Result<MMAction<T>, GroupError> {
    validate_action_with_limit(space, generators, MAX_GROUP_ORDER)
}

pub fn validate_action_with_limit<T: Scalar>(
    space: FiniteMMSpace<T>,
    generators: &[Vec<usize>],
    max_order: usize,
) -> Result<MMAction<T>, GroupError> {
    let gens = generators
        .iter()
        .enumerate()
        .map(|(k, g)| check_automorphism(&space, k, g))
        .collect::<Result<Vec<_>, _>>()?;
    let id = Perm::identity(space.len());
    let mut seen: HashSet<Perm> = HashSet::from([id.clone()]);
    let mut frontier = vec![id];
    while let Some(p) = frontier.pop() {
        for g in &gens {
            let q = g.after(&p);
            if seen.insert(q.clone()) {
                if seen.len() > max_order {
                    return Err(GroupError::GroupTooLarge(max_order));
                }
                frontier.push(q);
            }
        }
    }
    let mut elements: Vec<Perm> = seen.into_iter().collect();
    elements.sort();
    Ok(MMAction { space, elements })
}

impl<T: Scalar> MMAction<T> {
    pub fn trivial(space: FiniteMMSpace<T>) -> Self {
        let n = space.len();
        MMAction { space, elements: vec![Perm::identity(n)] }
    }

    pub fn space(&self) -> &FiniteMMSpace<T> {
        &self.space
    }

    pub fn elements(&self) -> &[Perm] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn identity(&self) -> &Perm {
        &self.elements[0]
    }

    pub fn contains(&self, p: &Perm) -> bool {
        self.elements.binary_search(p).is_ok()
    }

    pub fn is_trivial(&self) -> bool {
        self.elements.len() == 1
    }

    /// Same group acting on the same space with its points reordered: point
    /// `i` of the new space is point `order[i]` of the old one.
    pub fn relabeled(&self, order: &[usize]) -> Result<Self, GroupError> {
        let space = self.space.relabeled(order)?;
        let pos = Perm(order.to_vec()).inverse();
        let gens: Vec<Vec<usize>> = self
            .elements
            .iter()
            .map(|g| order.iter().map(|&i| pos.apply(g.apply(i))).collect())
            .collect();
        validate_action(space, &gens)
    }

    /// The whole group as its own generating set is wasteful for large
    /// groups; this picks a small generating subset greedily.
    pub fn generators(&self) -> Vec<Perm> {
        let mut gens: Vec<Perm> = Vec::new();
        let mut span: BTreeSet<Perm> = BTreeSet::from([self.identity().clone()]);
        for g in &self.elements {
            if span.contains(g) {
                continue;
            }
            gens.push(g.clone());
            let mut frontier: Vec<Perm> = span.iter().cloned().collect();
            while let Some(p) = frontier.pop() {
                for h in &gens {
                    let q = h.after(&p);
                    if span.insert(q.clone()) {
                        frontier.push(q);
                    }
                }
            }
        }
        gens
    }
}

/// Elements `σ` of `aut` with `σ G σ⁻¹ = G`.
pub fn normalizer<T: Scalar>(aut: &MMAction<T>, group: &MMAction<T>) -> Vec<Perm> {
    aut.elements()
        .iter()
        .filter(|s| {
            let inv = s.inverse();
            group.elements().iter().all(|g| group.contains(&s.after(g).after(&inv)))
        })
        .cloned()
        .collect()
}

/// Default limit on the number of points for [`enumerate_aut`].
pub const AUT_MAX_POINTS: usize = 10;

/// The full automorphism group by backtracking over distance- and
/// mass-compatible images, in lexicographic order.
pub fn enumerate_aut<T: Scalar>(space: &FiniteMMSpace<T>) -> Result<MMAction<T>, GroupError> {
    enumerate_aut_with_limit(space, AUT_MAX_POINTS)
}

pub fn enumerate_aut_with_limit<T: Scalar>(space: &FiniteMMSpace<T>, max_points: usize) -> Result<MMAction<T>, GroupError> {
    let n = space.len();
    if n > max_points {
        return Err(GroupError::TooLarge(n));
    }
    let tol = T::input_tol();
    let mut elements = Vec::new();
    let mut image = vec![0usize; n];
    let mut used = vec![false; n];

    fn rec<T: Scalar>(
        space: &FiniteMMSpace<T>,
        tol: T,
        pos: usize,
        image: &mut Vec<usize>,
        used: &mut Vec<bool>,
        out: &mut Vec<Perm>,
    ) {
        let n = space.len();
        if pos == n {
            out.push(Perm(image.clone()));
            return;
        }
        for y in 0..n {
            if used[y] || (space.mass()[y] - space.mass()[pos]).abs() > tol {
                continue;
            }
            let ok = (0..pos).all(|q| (space.d(image[q], y) - space.d(q, pos)).abs() <= tol);
            if ok {
                used[y] = true;
                image[pos] = y;
                rec(space, tol, pos + 1, image, used, out);
                used[y] = false;
            }
        }
    }
    rec(space, tol, 0, &mut image, &mut used, &mut elements);
    Ok(MMAction { space: space.clone(), elements })
}

/// A quotient space together with the orbit map `X → X/G`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quotient<T: Scalar> {
    pub space: FiniteMMSpace<T>,
    /// `orbit_of[x]` is the quotient point containing `x`.
    pub orbit_of: Vec<usize>,
    /// Members of each orbit, ascending; orbits ordered by smallest member.
    pub orbits: Vec<Vec<usize>>,
}

/// `X/G` with `d([x],[y]) = min_g d(g x, y)` and the pushed-forward measure.
pub fn quotient<T: Scalar>(action: &MMAction<T>) -> Result<Quotient<T>, GroupError> {
    let space = action.space();
    let n = space.len();
    let mut orbit_of = vec![usize::MAX; n];
    let mut orbits: Vec<Vec<usize>> = Vec::new();
    for x in 0..n {
        if orbit_of[x] != usize::MAX {
            continue;
        }
        let members: BTreeSet<usize> = action.elements().iter().map(|g| g.apply(x)).collect();
        for &m in &members {
            orbit_of[m] = orbits.len();
        }
        orbits.push(members.into_iter().collect());
    }
    let k = orbits.len();
    let mut dist = vec![vec![T::zero(); k]; k];
    for a in 0..k {
        for b in a + 1..k {
            let (x, y) = (orbits[a][0], orbits[b][0]);
            let d = action
                .elements()
                .iter()
                .map(|g| space.d(g.apply(x), y))
                .fold(T::infinity(), T::min);
            dist[a][b] = d;
            dist[b][a] = d;
        }
    }
    let mass = orbits.iter().map(|o| o.iter().map(|&i| space.mass()[i]).sum()).collect();
    let labels = orbits
        .iter()
        .map(|o| o.iter().map(|&i| space.labels()[i].as_str()).collect::<Vec<_>>().join("+"))
        .collect();
    let q = FiniteMMSpace::new(labels, dist, mass)?;
    Ok(Quotient { space: q, orbit_of, orbits })
}

/// Radius and mass threshold of a thick part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThickPartParams<T> {
    r: T,
    v: T,
}

impl<T: Scalar> ThickPartParams<T> {
    pub fn new(r: T, v: T) -> Result<Self, GroupError> {
        if r >= T::zero() && v >= T::zero() && v < T::one() {
            Ok(ThickPartParams { r, v })
        } else {
            Err(GroupError::InvalidThickParams { r: r.as_f64(), v: v.as_f64() })
        }
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn v(&self) -> T {
        self.v
    }
}

/// `{x : μ(B_r(x)) > v}` with closed balls.
pub fn thick_part<T: Scalar>(space: &FiniteMMSpace<T>, params: ThickPartParams<T>) -> BTreeSet<usize> {
    let tol = T::input_tol();
    (0..space.len())
        .filter(|&x| space.ball_mass(x, params.r) > params.v + tol)
        .collect()
}

pub fn mass_of<T: Scalar>(space: &FiniteMMSpace<T>, set: &BTreeSet<usize>) -> T {
    set.iter().map(|&i| space.mass()[i]).sum()
}

/// Threshold `v_ε` for the thick part `Y(v_ε, ε)`: scanning the halved ball
/// masses `μ(B_ε(y))/2` from the top, the first one whose thick part carries
/// mass above `1 - ε`.
pub fn select_v_eps<T: Scalar>(space: &FiniteMMSpace<T>, eps: T) -> T {
    let ladder = sorted_distinct((0..space.len()).map(|y| space.ball_mass(y, eps) / T::lit(2.0)).collect());
    for &v in ladder.iter().rev() {
        let params = ThickPartParams { r: eps, v };
        if mass_of(space, &thick_part(space, params)) > T::one() - eps {
            return v;
        }
    }
    ladder.first().copied().unwrap_or_else(T::zero)
}

/// `X_{n,ε} = {x : μ(B_{2ε}(x)) > v_ε / 2}`.
pub fn thick_part_for_sequence<T: Scalar>(space: &FiniteMMSpace<T>, eps: T, v_eps: T) -> BTreeSet<usize> {
    let params = ThickPartParams { r: eps * T::lit(2.0), v: v_eps / T::lit(2.0) };
    thick_part(space, params)
}

/// One row of [`extract_limit_group`].
#[derive(Debug, Clone, PartialEq)]
pub struct LimitMatch<T> {
    pub g: Perm,
    pub h: Perm,
    pub defect: T,
    pub within_eps: bool,
}

/// `ρ(g) = S ∘ g ∘ S⁻¹ = {(y, y') : ∃x, (x, y) ∈ S, (g x, y') ∈ S}`.
pub fn conjugate_relation(s: &Relation, g: &Perm) -> Result<Relation, GroupError> {
    let graph = Relation::graph(g.as_slice(), g.len())?;
    Ok(s.inverse().then(&graph)?.then(s)?)
}

/// For each `g ∈ G`, the `h ∈ Aut(Y)` minimizing
/// `max_{(y, y') ∈ ρ(g)} d(h y, y')`; ties go to the lexicographically
/// smallest `h`.
pub fn extract_limit_group<T: Scalar>(
    action: &MMAction<T>,
    target: &FiniteMMSpace<T>,
    s: &Relation,
    eps: T,
) -> Result<Vec<LimitMatch<T>>, GroupError> {
    if s.is_empty() {
        return Err(GroupError::EmptyRelation);
    }
    let aut = enumerate_aut(target)?;
    let mut out = Vec::with_capacity(action.order());
    for g in action.elements() {
        let rho = conjugate_relation(s, g)?;
        let mut best: Option<(T, &Perm)> = None;
        for h in aut.elements() {
            let defect = rho
                .iter()
                .map(|(y, y2)| target.d(h.apply(y), y2))
                .fold(T::zero(), T::max);
            if best.is_none_or(|(b, _)| defect < b) {
                best = Some((defect, h));
            }
        }
        let (defect, h) = best.expect("Aut(Y) contains the identity");
        out.push(LimitMatch { g: g.clone(), h: h.clone(), defect, within_eps: defect <= eps + T::input_tol() });
    }
    Ok(out)
}

/// The subgroup of `Aut(Y)` generated by the matched elements.
pub fn limit_group<T: Scalar>(target: &FiniteMMSpace<T>, matches: &[LimitMatch<T>]) -> Result<MMAction<T>, GroupError> {
    let gens: Vec<Vec<usize>> = matches.iter().map(|m| m.h.as_slice().to_vec()).collect();
    validate_action(target.clone(), &gens)
}

/// Subgroups generated by at most two elements, ordered by order then by
/// element list. For groups of order below 8 this is every subgroup.
pub fn subgroups<T: Scalar>(action: &MMAction<T>) -> Result<Vec<MMAction<T>>, GroupError> {
    let els = action.elements();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for i in 0..els.len() {
        for j in i..els.len() {
            let gens = vec![els[i].as_slice().to_vec(), els[j].as_slice().to_vec()];
            let sub = validate_action(action.space().clone(), &gens)?;
            let key: Vec<Vec<usize>> = sub.elements().iter().map(|p| p.as_slice().to_vec()).collect();
            if seen.insert(key) {
                out.push(sub);
            }
        }
    }
    out.sort_by(|a, b| a.order().cmp(&b.order()).then_with(|| a.elements().cmp(b.elements())));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(m0: f64) -> FiniteMMSpace<f64> {
        FiniteMMSpace::unlabeled(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![m0, 1.0 - m0]).unwrap()
    }

    fn square() -> FiniteMMSpace<f64> {
        let d = |i: usize, j: usize| -> f64 {
            let k = (i as i64 - j as i64).rem_euclid(4);
            [0.0, 1.0, 2.0, 1.0][k as usize]
        };
        FiniteMMSpace::uniform((0..4).map(|i| (0..4).map(|j| d(i, j)).collect()).collect()).unwrap()
    }

    #[test]
    fn validate_action_examples() {
        let x = two_point(0.5);
        assert!(validate_action(x.clone(), &[vec![0, 1]]).unwrap().is_trivial());
        assert_eq!(validate_action(x.clone(), &[vec![1, 0]]).unwrap().order(), 2);
        assert_eq!(
            validate_action(two_point(0.6), &[vec![1, 0]]).unwrap_err(),
            GroupError::NotMeasurePreserving(0, 0)
        );
        assert_eq!(validate_action(x.clone(), &[vec![0, 0]]).unwrap_err(), GroupError::NotPermutation(0));
        let sq = square();
        assert_eq!(validate_action(sq.clone(), &[vec![1, 0, 2, 3]]).unwrap_err(), GroupError::NotIsometry(0, 0, 2));
    }

    #[test]
    fn enumerate_aut_examples() {
        let factorial = [1, 1, 2, 6, 24, 120];
        for n in 1..=5 {
            let s = FiniteMMSpace::<f64>::equidistant(n, 1.0).unwrap();
            let aut = enumerate_aut(&s).unwrap();
            assert_eq!(aut.order(), factorial[n]);
            // Every permutation is an automorphism here, so direct checking
            // must agree with backtracking.
            assert!(aut.elements().windows(2).all(|w| w[0] < w[1]));
        }
        assert!(enumerate_aut(&two_point(0.6)).unwrap().is_trivial());
        let one = FiniteMMSpace::<f64>::unlabeled(vec![vec![0.0]], vec![1.0]).unwrap();
        assert!(enumerate_aut(&one).unwrap().is_trivial());
        assert_eq!(enumerate_aut(&square()).unwrap().order(), 8);
        let big = FiniteMMSpace::<f64>::equidistant(11, 1.0).unwrap();
        assert_eq!(enumerate_aut(&big).unwrap_err(), GroupError::TooLarge(11));
    }

    #[test]
    fn subgroups_of_s3() {
        let eq = FiniteMMSpace::<f64>::equidistant(3, 1.0).unwrap();
        let subs = subgroups(&enumerate_aut(&eq).unwrap()).unwrap();
        let orders: Vec<usize> = subs.iter().map(|s| s.order()).collect();
        assert_eq!(orders, vec![1, 2, 2, 2, 3, 6]);
    }

    #[test]
    fn quotient_examples() {
        let sq = square();
        let trivial = MMAction::trivial(sq.clone());
        let q = quotient(&trivial).unwrap();
        assert_eq!(q.space.dist_rows(), sq.dist_rows());
        assert_eq!(q.orbit_of, vec![0, 1, 2, 3]);

        let antipodal = validate_action(sq.clone(), &[vec![2, 3, 0, 1]]).unwrap();
        let q = quotient(&antipodal).unwrap();
        assert_eq!(q.space.len(), 2);
        assert_eq!(q.space.d(0, 1), 1.0);
        assert_eq!(q.space.mass(), &[0.5, 0.5]);
        assert_eq!(q.orbits, vec![vec![0, 2], vec![1, 3]]);

        let s4 = enumerate_aut(&FiniteMMSpace::<f64>::equidistant(4, 1.0).unwrap()).unwrap();
        assert_eq!(quotient(&s4).unwrap().space.len(), 1);
    }

    #[test]
    fn thick_part_examples() {
        let n = 5;
        let s = FiniteMMSpace::<f64>::equidistant(n, 1.0).unwrap();
        let all: BTreeSet<usize> = (0..n).collect();
        assert_eq!(thick_part(&s, ThickPartParams::new(0.5, 0.0).unwrap()), all);
        assert!(thick_part(&s, ThickPartParams::new(0.5, 1.0 / n as f64).unwrap()).is_empty());
        assert_eq!(thick_part(&s, ThickPartParams::new(0.5, 0.5 / n as f64).unwrap()), all);
        assert!(ThickPartParams::new(0.5, 1.0).is_err());
        assert!(ThickPartParams::new(-0.1, 0.2).is_err());
    }

    #[test]
    fn v_eps_meets_mass_requirement() {
        let s = FiniteMMSpace::<f64>::unlabeled(
            vec![vec![0.0, 0.1, 3.0], vec![0.1, 0.0, 3.0], vec![3.0, 3.0, 0.0]],
            vec![0.45, 0.45, 0.1],
        )
        .unwrap();
        let eps = 0.2;
        let v = select_v_eps(&s, eps);
        // Balls of radius 0.2 weigh (0.9, 0.9, 0.1); the top rung keeps 0.9 > 0.8.
        assert_eq!(v, 0.45);
        let part = thick_part(&s, ThickPartParams::new(eps, v).unwrap());
        assert!(mass_of(&s, &part) > 1.0 - eps);
    }

    #[test]
    fn extract_limit_group_examples() {
        let x = two_point(0.5);
        let z2 = validate_action(x.clone(), &[vec![1, 0]]).unwrap();
        let id = Relation::identity(2);
        let m = extract_limit_group(&z2, &x, &id, 0.0).unwrap();
        assert_eq!(m.len(), 2);
        for row in &m {
            assert_eq!(row.g, row.h);
            assert_eq!(row.defect, 0.0);
        }
        let full = Relation::full(2, 2);
        let m = extract_limit_group(&z2, &x, &full, 0.0).unwrap();
        for row in &m {
            assert_eq!(row.defect, 1.0);
            assert!(row.h.is_identity());
        }
        assert_eq!(
            extract_limit_group(&z2, &x, &Relation::empty(2, 2), 0.0).unwrap_err(),
            GroupError::EmptyRelation
        );
        let lim = limit_group(&x, &extract_limit_group(&z2, &x, &id, 0.0).unwrap()).unwrap();
        assert_eq!(lim.order(), 2);
    }

    #[test]
    fn normalizer_examples() {
        let eq = FiniteMMSpace::<f64>::equidistant(3, 1.0).unwrap();
        let s3 = enumerate_aut(&eq).unwrap();
        let z3 = validate_action(eq.clone(), &[vec![1, 2, 0]]).unwrap();
        let z2 = validate_action(eq.clone(), &[vec![1, 0, 2]]).unwrap();
        assert_eq!(normalizer(&s3, &z3).len(), 6);
        assert_eq!(normalizer(&s3, &z2).len(), 2);
        assert_eq!(normalizer(&s3, &MMAction::trivial(eq)).len(), 6);
    }

    #[test]
    fn relabel_conjugates_the_group() {
        let sq = square();
        let z4 = validate_action(sq, &[vec![1, 2, 3, 0]]).unwrap();
        let r = z4.relabeled(&[2, 0, 3, 1]).unwrap();
        assert_eq!(r.order(), 4);
        assert_eq!(z4.generators().len(), 1);
    }
}
