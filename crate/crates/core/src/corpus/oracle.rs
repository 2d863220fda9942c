//! Independent checkers for benchmark outputs.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use thiserror::Error;

use super::Facts;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{benchmark}: {message}")]
pub struct CheckFailed {
    pub benchmark: String,
    pub message: String,
}

type Check = Result<(), String>;

/// Checks `output` against `input` for the named benchmark.
pub fn check(name: &str, input: &Facts, output: &Facts) -> Result<(), CheckFailed> {
    let rows = |f: &Facts, r: &str| f.get(r).cloned().unwrap_or_default();
    let result = match name {
        "spanning_forest" => check_forest(&rows(input, "edge"), &rows(input, "startNode"), &rows(output, "st")),
        "eligible_advisors" => advisors(&rows(input, "student"), &rows(input, "professor"), &rows(output, "advisor")),
        "total_order" => total_order(&rows(input, "elem"), &rows(output, "next")),
        "bipartite_matching" => matching(&rows(input, "edge"), &rows(output, "match")),
        "more_dogs_than_cats" => {
            let (d, c) = (rows(input, "dog").len(), rows(input, "cat").len());
            let claimed = !rows(output, "moreDogs").is_empty();
            if claimed == (d > c) {
                Ok(())
            } else {
                Err(format!("moreDogs is {claimed} with {d} dogs and {c} cats"))
            }
        }
        "highest_mark" => highest(&rows(input, "grade"), &rows(input, "mark"), &rows(output, "highest")),
        _ => Err("no checker for this benchmark".to_string()),
    };
    result.map_err(|message| CheckFailed {
        benchmark: name.to_string(),
        message,
    })
}

fn distinct(rows: &[Vec<String>]) -> Result<BTreeSet<&[String]>, String> {
    let mut set = BTreeSet::new();
    for r in rows {
        if !set.insert(r.as_slice()) {
            return Err(format!("duplicate tuple {r:?}"));
        }
    }
    Ok(set)
}

fn find(parent: &mut HashMap<String, String>, x: &str) -> String {
    let mut cur = x.to_string();
    loop {
        let p = parent.entry(cur.clone()).or_insert_with(|| cur.clone()).clone();
        if p == cur {
            return cur;
        }
        let gp = parent.get(&p).cloned().unwrap_or_else(|| p.clone());
        parent.insert(cur.clone(), gp.clone());
        cur = gp;
    }
}

/// Spanning forest over `(module, x, y)` edges: per module the output edges
/// are input edges forming a tree rooted at the start node that covers
/// exactly the nodes reachable from it.
pub fn check_forest(edges: &[Vec<String>], starts: &[Vec<String>], st: &[Vec<String>]) -> Check {
    let st_set = distinct(st)?;
    let edge_set: HashSet<&[String]> = edges.iter().map(Vec::as_slice).collect();
    let mut succ: HashMap<(&str, &str), Vec<&str>> = HashMap::new();
    for e in edges {
        succ.entry((&e[0], &e[1])).or_default().push(&e[2]);
    }
    let mut start_of: BTreeMap<&str, &str> = BTreeMap::new();
    for s in starts {
        if start_of.insert(&s[0], &s[1]).is_some() {
            return Err(format!("module {} has two start nodes", s[0]));
        }
    }

    let mut incoming: HashSet<(&str, &str)> = HashSet::new();
    let mut uf = HashMap::new();
    for t in &st_set {
        if !edge_set.contains(t) {
            return Err(format!("{t:?} is not an input edge"));
        }
        let (m, x, y) = (t[0].as_str(), t[1].as_str(), t[2].as_str());
        let Some(&root) = start_of.get(m) else {
            return Err(format!("{t:?} lies in a module without a start node"));
        };
        if y == root {
            return Err(format!("{t:?} enters the start node"));
        }
        if !incoming.insert((m, y)) {
            return Err(format!("node {y} of module {m} has two incoming edges"));
        }
        let (a, b) = (find(&mut uf, &format!("{m}\t{x}")), find(&mut uf, &format!("{m}\t{y}")));
        if a == b {
            return Err(format!("{t:?} closes a cycle"));
        }
        uf.insert(a, b);
    }

    for (&m, &root) in &start_of {
        let mut seen = HashSet::from([root]);
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            for &y in succ.get(&(m, x)).map(Vec::as_slice).unwrap_or_default() {
                if seen.insert(y) {
                    queue.push_back(y);
                }
            }
        }
        let covered: HashSet<&str> = incoming
            .iter()
            .filter(|(mm, _)| *mm == m)
            .map(|&(_, y)| y)
            .collect();
        for &y in &seen {
            if y != root && !covered.contains(y) {
                return Err(format!("reachable node {y} of module {m} is not in the tree"));
            }
        }
        if let Some(y) = covered.iter().find(|y| !seen.contains(*y)) {
            return Err(format!("unreachable node {y} of module {m} is in the tree"));
        }
    }
    Ok(())
}

fn advisors(students: &[Vec<String>], professors: &[Vec<String>], out: &[Vec<String>]) -> Check {
    let mut by_area: HashMap<&str, HashSet<&str>> = HashMap::new();
    for p in professors {
        by_area.entry(&p[1]).or_default().insert(&p[0]);
    }
    let mut eligible: HashMap<&str, HashSet<&str>> = HashMap::new();
    for s in students {
        let e = eligible.entry(&s[0]).or_default();
        if let Some(ps) = by_area.get(s[1].as_str()) {
            e.extend(ps);
        }
    }
    let mut assigned: HashMap<&str, &str> = HashMap::new();
    for t in distinct(out)? {
        let (s, p) = (t[0].as_str(), t[1].as_str());
        if !eligible.get(s).is_some_and(|e| e.contains(p)) {
            return Err(format!("{p} is not eligible for {s}"));
        }
        if let Some(q) = assigned.insert(s, p) {
            return Err(format!("{s} has advisors {q} and {p}"));
        }
    }
    for (s, e) in &eligible {
        if !e.is_empty() && !assigned.contains_key(s) {
            return Err(format!("{s} has no advisor"));
        }
    }
    Ok(())
}

/// Tuples whose first element is not an input element are seed tuples and
/// are ignored. The rest must be a single successor chain over the input.
fn total_order(elems: &[Vec<String>], next: &[Vec<String>]) -> Check {
    let elems: HashSet<&str> = elems.iter().map(|e| e[0].as_str()).collect();
    let mut succ: HashMap<&str, &str> = HashMap::new();
    let mut has_pred = HashSet::new();
    for t in distinct(next)? {
        let (x, y) = (t[0].as_str(), t[1].as_str());
        if !elems.contains(x) {
            continue;
        }
        if !elems.contains(y) {
            return Err(format!("{y} is not an element"));
        }
        if succ.insert(x, y).is_some() {
            return Err(format!("{x} has two successors"));
        }
        if !has_pred.insert(y) {
            return Err(format!("{y} has two predecessors"));
        }
    }
    if elems.is_empty() {
        return Ok(());
    }
    let heads: Vec<&&str> = elems.iter().filter(|e| !has_pred.contains(*e)).collect();
    let [head] = heads.as_slice() else {
        return Err(format!("{} elements lack a predecessor", heads.len()));
    };
    let mut len = 1;
    let mut cur = **head;
    while let Some(&n) = succ.get(cur) {
        len += 1;
        cur = n;
        if len > elems.len() {
            return Err("the successor chain has a cycle".to_string());
        }
    }
    if len != elems.len() {
        return Err(format!("the chain covers {len} of {} elements", elems.len()));
    }
    Ok(())
}

fn matching(edges: &[Vec<String>], out: &[Vec<String>]) -> Check {
    let edge_set: HashSet<&[String]> = edges.iter().map(Vec::as_slice).collect();
    let (mut left, mut right) = (HashSet::new(), HashSet::new());
    for t in distinct(out)? {
        if !edge_set.contains(t) {
            return Err(format!("{t:?} is not an input edge"));
        }
        if !left.insert(t[0].as_str()) || !right.insert(t[1].as_str()) {
            return Err(format!("{t:?} shares an endpoint"));
        }
    }
    if let Some(e) = edges
        .iter()
        .find(|e| !left.contains(e[0].as_str()) && !right.contains(e[1].as_str()))
    {
        return Err(format!("edge {e:?} could extend the matching"));
    }
    Ok(())
}

fn highest(grades: &[Vec<String>], marks: &[Vec<String>], out: &[Vec<String>]) -> Check {
    let grades: HashSet<&str> = grades.iter().map(|g| g[0].as_str()).collect();
    let mut best: HashMap<&str, i64> = HashMap::new();
    let mut held: HashSet<(&str, &str, i64)> = HashSet::new();
    for m in marks {
        let v: i64 = m[2].parse().map_err(|_| format!("bad mark {m:?}"))?;
        held.insert((&m[0], &m[1], v));
        if grades.contains(m[1].as_str()) {
            let b = best.entry(&m[1]).or_insert(v);
            *b = (*b).max(v);
        }
    }
    let mut reported = HashSet::new();
    for t in distinct(out)? {
        let g = t[0].as_str();
        let v: i64 = t[1].parse().map_err(|_| format!("bad mark {t:?}"))?;
        if best.get(g) != Some(&v) {
            return Err(format!("{t:?} does not report the highest mark of {g}"));
        }
        if !held.contains(&(t[2].as_str(), g, v)) {
            return Err(format!("{t:?} names a student without that mark"));
        }
        if !reported.insert(g) {
            return Err(format!("grade {g} is reported twice"));
        }
    }
    if let Some(g) = best.keys().find(|g| !reported.contains(*g)) {
        return Err(format!("grade {g} is not reported"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(items: &[&[&str]]) -> Vec<Vec<String>> {
        items.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
    }

    fn sample_graph_forest() -> Vec<Vec<String>> {
        super::super::sample_graph()["edge"]
            .iter()
            .map(|e| vec!["m".to_string(), e[0].clone(), e[1].clone()])
            .collect()
    }

    #[test]
    fn both_resolutions_of_sample_graph_are_trees() {
        let edges = sample_graph_forest();
        let starts = rows(&[&["m", "L1"]]);
        let base: &[&[&str]] = &[
            &["m", "L1", "L2"],
            &["m", "L2", "L3"],
            &["m", "L2", "L10"],
            &["m", "L3", "L4"],
            &["m", "L3", "L6"],
        ];
        for last in [["m", "L4", "L8"], ["m", "L6", "L8"]] {
            let mut st = rows(base);
            st.push(last.iter().map(|s| s.to_string()).collect());
            check_forest(&edges, &starts, &st).unwrap();
        }
        let mut st = rows(base);
        assert!(check_forest(&edges, &starts, &st).is_err());
        st.extend(rows(&[&["m", "L4", "L8"], &["m", "L6", "L8"]]));
        assert!(check_forest(&edges, &starts, &st).is_err());
        let mut st = rows(base);
        st.extend(rows(&[&["m", "L4", "L8"], &["m", "L8", "L2"]]));
        assert!(check_forest(&edges, &starts, &st).is_err());
    }

    #[test]
    fn empty_graph_is_a_vacuous_tree() {
        assert!(check_forest(&[], &rows(&[&["m", "L0"]]), &[]).is_ok());
    }

    #[test]
    fn matching_must_be_maximal() {
        let edges = rows(&[&["a", "x"], &["b", "y"]]);
        assert!(matching(&edges, &rows(&[&["a", "x"]])).is_err());
        assert!(matching(&edges, &edges).is_ok());
        assert!(matching(&edges, &rows(&[&["a", "x"], &["a", "y"]])).is_err());
    }

    #[test]
    fn total_order_ignores_seed_tuples() {
        let elems = rows(&[&["a"], &["b"], &["c"]]);
        let next = rows(&[&["root", "nil"], &["nil", "b"], &["b", "a"], &["a", "c"]]);
        assert!(total_order(&elems, &next).is_ok());
        let next = rows(&[&["a", "b"], &["c", "a"]]);
        assert!(total_order(&elems, &next).is_ok());
        let next = rows(&[&["a", "b"]]);
        assert!(total_order(&elems, &next).is_err());
        let next = rows(&[&["a", "b"], &["b", "a"], &["c", "a"]]);
        assert!(total_order(&elems, &next).is_err());
    }

    #[test]
    fn highest_mark_counterexamples() {
        let grades = rows(&[&["g"]]);
        let marks = rows(&[&["s1", "g", "7"], &["s2", "g", "9"]]);
        assert!(highest(&grades, &marks, &rows(&[&["g", "9", "s2"]])).is_ok());
        assert!(highest(&grades, &marks, &rows(&[&["g", "7", "s1"]])).is_err());
        assert!(highest(&grades, &marks, &[]).is_err());
    }

    #[test]
    fn dogs_compare_counts() {
        let input = Facts::from([
            ("dog".to_string(), rows(&[&["d1"], &["d2"]])),
            ("cat".to_string(), rows(&[&["c1"]])),
        ]);
        let yes = Facts::from([("moreDogs".to_string(), vec![vec![]])]);
        assert!(check("more_dogs_than_cats", &input, &yes).is_ok());
        assert!(check("more_dogs_than_cats", &input, &Facts::new()).is_err());
    }
}
