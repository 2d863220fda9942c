//! Seeded input generators.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Facts;

/// The control-flow graph used as the running example, as `edge` facts.
pub fn sample_graph() -> Facts {
    let edges = [
        ("L1", "L2"),
        ("L2", "L3"),
        ("L2", "L10"),
        ("L3", "L4"),
        ("L3", "L6"),
        ("L4", "L8"),
        ("L6", "L8"),
        ("L8", "L2"),
    ];
    let rows = edges
        .iter()
        .map(|(a, b)| vec![a.to_string(), b.to_string()])
        .collect();
    Facts::from([("edge".to_string(), rows)])
}

/// Inputs for the named benchmark at size `scale`, or `None` for an unknown
/// name.
pub fn generate(name: &str, seed: u64, scale: usize) -> Option<Facts> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let facts = match name {
        "spanning_forest" => {
            let components = (scale / 30).max(1);
            return Some(forest(seed, components, scale / components));
        }
        "eligible_advisors" => advisors(&mut rng, scale),
        "total_order" => {
            let mut elems: Vec<Vec<String>> = (0..scale).map(|i| vec![format!("e{i}")]).collect();
            elems.shuffle(&mut rng);
            Facts::from([("elem".to_string(), elems)])
        }
        "bipartite_matching" => bipartite(&mut rng, scale),
        "more_dogs_than_cats" => dogs_and_cats(&mut rng, scale),
        "highest_mark" => marks(&mut rng, scale),
        _ => return None,
    };
    Some(facts)
}

/// CFG-like graphs, one per module. Node `L0` of every module is the start
/// node and has no incoming edges; every node is reachable from it through
/// a backbone of forward edges, and the remaining edges are random forward
/// branches and back edges.
pub fn forest(seed: u64, components: usize, edges_per_component: usize) -> Facts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edge = Vec::new();
    let mut start = Vec::new();
    for c in 0..components {
        let module = format!("m{c}");
        start.push(vec![module.clone(), "L0".to_string()]);
        let e = edges_per_component;
        let nodes = if e == 0 { 1 } else { (e * 2 / 3).max(1) + 1 };
        let mut set = BTreeSet::new();
        for i in 1..nodes {
            let lo = i.saturating_sub(3);
            set.insert((rng.gen_range(lo..i), i));
        }
        let mut attempts = 0;
        while set.len() < e && nodes > 1 && attempts < 20 * e {
            attempts += 1;
            let from = rng.gen_range(0..nodes);
            let to = rng.gen_range(1..nodes);
            if from != to {
                set.insert((from, to));
            }
        }
        let mut rows: Vec<Vec<String>> = set
            .into_iter()
            .map(|(a, b)| vec![module.clone(), format!("L{a}"), format!("L{b}")])
            .collect();
        rows.shuffle(&mut rng);
        edge.extend(rows);
    }
    Facts::from([
        ("edge".to_string(), edge),
        ("startNode".to_string(), start),
    ])
}

fn advisors(rng: &mut ChaCha8Rng, n: usize) -> Facts {
    let majors = (n / 100).max(1);
    let students = (0..n)
        .map(|i| vec![format!("s{i}"), format!("a{}", rng.gen_range(0..majors))])
        .collect();
    let professors = (0..(n / 10).max(1))
        .map(|i| vec![format!("p{i}"), format!("a{}", rng.gen_range(0..majors))])
        .collect();
    Facts::from([
        ("student".to_string(), students),
        ("professor".to_string(), professors),
    ])
}

fn bipartite(rng: &mut ChaCha8Rng, n: usize) -> Facts {
    let mut set = BTreeSet::new();
    if n > 0 {
        while set.len() < (3 * n).min(n * n) {
            set.insert((rng.gen_range(0..n), rng.gen_range(0..n)));
        }
    }
    let mut rows: Vec<Vec<String>> = set
        .into_iter()
        .map(|(l, r)| vec![format!("l{l}"), format!("r{r}")])
        .collect();
    rows.shuffle(rng);
    Facts::from([("edge".to_string(), rows)])
}

fn dogs_and_cats(rng: &mut ChaCha8Rng, n: usize) -> Facts {
    let spread = (n / 20) as i64;
    let dogs = ((n / 2) as i64 + rng.gen_range(-spread..=spread)).clamp(0, n as i64) as usize;
    let names = |prefix: &str, k: usize| (0..k).map(|i| vec![format!("{prefix}{i}")]).collect();
    Facts::from([
        ("dog".to_string(), names("d", dogs)),
        ("cat".to_string(), names("c", n - dogs)),
    ])
}

fn marks(rng: &mut ChaCha8Rng, n: usize) -> Facts {
    let grades = (n / 100).max(1);
    let grade = (0..grades).map(|g| vec![format!("g{g}")]).collect();
    let mark = (0..n)
        .map(|s| {
            vec![
                format!("s{s}"),
                format!("g{}", rng.gen_range(0..grades)),
                rng.gen_range(0..=100).to_string(),
            ]
        })
        .collect();
    Facts::from([("grade".to_string(), grade), ("mark".to_string(), mark)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        for b in super::super::BENCHMARKS {
            assert_eq!(generate(b.name, 3, 120), generate(b.name, 3, 120));
        }
        assert!(generate("nope", 1, 1).is_none());
    }

    #[test]
    fn forest_shape() {
        let f = forest(1, 4, 30);
        assert_eq!(f["startNode"].len(), 4);
        assert_eq!(f["edge"].len(), 4 * 30);
        assert!(f["edge"].iter().all(|e| e[2] != "L0"));
    }

    #[test]
    fn scale_zero_is_empty() {
        assert!(generate("total_order", 0, 0).unwrap()["elem"].is_empty());
        assert!(generate("bipartite_matching", 0, 0).unwrap()["edge"].is_empty());
    }
}
