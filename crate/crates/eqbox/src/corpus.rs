//! The curated corpus of one- to three-point instances used by the oracles.

use eqbox_core::group::{enumerate_aut, subgroups};
use eqbox_core::{Action, Space};

/// An oracle-corpus instance. Instances sharing `class` are equivariantly
/// isomorphic.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub id: String,
    pub class: String,
    pub action: Action,
}

fn spaces() -> Vec<(&'static str, Space)> {
    let path = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
    vec![
        ("pt", Space::uniform(vec![vec![0.0]]).expect("valid")),
        ("two1", Space::equidistant(2, 1.0).expect("valid")),
        ("two2", Space::equidistant(2, 2.0).expect("valid")),
        ("tri", Space::equidistant(3, 1.0).expect("valid")),
        ("path", Space::uniform(path).expect("valid")),
    ]
}

/// Every subgroup of `Aut(X)` on each base space, plus one relabeled copy
/// of the path space with its full group. Conjugate subgroups share a
/// class.
pub fn oracle_corpus() -> Vec<CorpusEntry> {
    let mut out = Vec::new();
    for (name, space) in spaces() {
        let aut = enumerate_aut(&space).expect("tiny spaces");
        for sub in subgroups(&aut).expect("tiny groups") {
            let gens: Vec<String> = sub
                .generators()
                .iter()
                .map(|g| g.as_slice().iter().map(|i| i.to_string()).collect::<String>())
                .collect();
            let id = if sub.is_trivial() { format!("{name}/1") } else { format!("{name}/<{}>", gens.join(",")) };
            // Subgroups of the same order are conjugate in these groups.
            let class = format!("{name}/{}", sub.order());
            out.push(CorpusEntry { id, class, action: sub });
        }
    }
    let path_full = out.iter().find(|e| e.class == "path/2").expect("path has a reflection").action.clone();
    let relabeled = path_full.relabeled(&[1, 0, 2]).expect("permutation");
    out.push(CorpusEntry { id: "path*/<210>".into(), class: "path/2".into(), action: relabeled });
    out
}

/// Unordered pairs `(i, j)` with `i ≤ j`.
pub fn corpus_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_shape() {
        let c = oracle_corpus();
        let ids: Vec<&str> = c.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(c.len(), 1 + 2 + 2 + 6 + 2 + 1, "{ids:?}");
        assert!(c.iter().all(|e| e.action.space().len() <= 3));
        let tri2 = c.iter().filter(|e| e.class == "tri/2").count();
        assert_eq!(tri2, 3);
    }
}
