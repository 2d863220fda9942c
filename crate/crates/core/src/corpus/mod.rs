//! Benchmark programs in three versions each, their input generators and
//! output checkers.
//!
//! Every benchmark has a relation-level choice version, a rule-level choice
//! version and a native version written without choice.

mod gen;
mod oracle;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::engine::Compiled;
use crate::io::{self, IoError};
use crate::storage::Instance;

pub use gen::{sample_graph, forest, generate};
pub use oracle::{check, check_forest, CheckFailed};

/// Relation name to rows of rendered fields.
pub type Facts = BTreeMap<String, Vec<Vec<String>>>;

pub const SPANNING_TREE: &str = include_str!("../../corpus/spanning_tree.dl");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Version {
    Choice,
    RuleChoice,
    Native,
}

impl Version {
    pub const ALL: [Version; 3] = [Version::Choice, Version::RuleChoice, Version::Native];

    pub fn as_str(self) -> &'static str {
        match self {
            Version::Choice => "choice",
            Version::RuleChoice => "rulechoice",
            Version::Native => "native",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Version {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Version::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown version `{s}`"))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Benchmark {
    pub name: &'static str,
    sources: [&'static str; 3],
    /// Clause counts per version, in [`Version::ALL`] order.
    pub clause_counts: [usize; 3],
    /// The relation the checker inspects.
    pub output: &'static str,
}

impl Benchmark {
    pub fn source(&self, v: Version) -> &'static str {
        self.sources[v.index()]
    }

    pub fn clause_count(&self, v: Version) -> usize {
        self.clause_counts[v.index()]
    }
}

macro_rules! bench {
    ($name:literal, $counts:expr, $output:literal) => {
        Benchmark {
            name: $name,
            sources: [
                include_str!(concat!("../../corpus/", $name, "_choice.dl")),
                include_str!(concat!("../../corpus/", $name, "_rulechoice.dl")),
                include_str!(concat!("../../corpus/", $name, "_native.dl")),
            ],
            clause_counts: $counts,
            output: $output,
        }
    };
}

pub const BENCHMARKS: &[Benchmark] = &[
    bench!("spanning_forest", [2, 3, 21], "st"),
    bench!("eligible_advisors", [1, 2, 4], "advisor"),
    bench!("total_order", [2, 3, 3], "next"),
    bench!("bipartite_matching", [1, 2, 15], "match"),
    bench!("more_dogs_than_cats", [3, 4, 1], "moreDogs"),
    bench!("highest_mark", [1, 2, 4], "highest"),
];

pub fn benchmark(name: &str) -> Option<&'static Benchmark> {
    BENCHMARKS.iter().find(|b| b.name == name)
}

/// Source text of a benchmark version.
///
/// # Panics
/// If `name` is not a benchmark.
pub fn source(name: &str, v: Version) -> &'static str {
    benchmark(name)
        .unwrap_or_else(|| panic!("no benchmark named `{name}`"))
        .source(v)
}

/// The rows of `facts` as an instance of `program`, without any guards.
pub fn load(program: &Compiled, facts: &Facts) -> Result<Instance, String> {
    let mut inst = program.instance();
    for (rel, rows) in facts {
        for row in rows {
            let fields: Vec<&str> = row.iter().map(String::as_str).collect();
            let t = inst.encode(rel, &fields)?;
            inst.relation_mut(rel)
                .expect("encode checked the relation")
                .insert(&t)
                .map_err(|e| e.to_string())?;
        }
    }
    Ok(inst)
}

/// Writes `<relation>.facts` for every relation in `facts`.
pub fn write_facts(dir: &Path, facts: &Facts) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::File {
        path: dir.to_path_buf(),
        source,
    })?;
    for (rel, rows) in facts {
        io::write_rows(&dir.join(format!("{rel}.facts")), rows)?;
    }
    Ok(())
}

/// Reads `<relation>.facts` back for the given relations.
pub fn read_facts<'a>(
    dir: &Path,
    relations: impl IntoIterator<Item = &'a str>,
) -> Result<Facts, IoError> {
    relations
        .into_iter()
        .map(|r| Ok((r.to_string(), io::read_rows(&dir.join(format!("{r}.facts")))?)))
        .collect()
}
