//! Relational Algebra Machine: an imperative relational IR.
//!
//! Statements (`Stmt`) sequence whole-relation actions; a `Query` statement
//! holds one nested operation tree (`Op`) of scans, filters and inserts.

mod display;
mod guards;
mod lower;

pub use guards::add_guards;
pub use lower::lower;

use crate::ast::{AggregateFn, AttrType, ChoiceDomain, CmpOp};
use crate::storage::{SymId, SymbolTable};

pub type RelId = usize;
/// Index of a tuple variable bound by a scan or aggregate within one query.
pub type TupleVar = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Version {
    Full,
    Delta,
    New,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RamRelation {
    pub name: String,
    /// Id of the full version of the same relation (itself for full relations).
    pub base: RelId,
    pub version: Version,
    pub types: Vec<AttrType>,
    /// Domains as declared.
    pub domains: Vec<ChoiceDomain>,
    /// Domains after redundancy reduction; these drive the guards.
    pub reduced_domains: Vec<ChoiceDomain>,
    pub input: bool,
    pub output: bool,
}

impl RamRelation {
    pub fn arity(&self) -> usize {
        self.types.len()
    }

    pub fn has_choice(&self) -> bool {
        !self.reduced_domains.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    TupleElement(TupleVar, usize),
    ConstSym(SymId),
    ConstNum(i64),
    AutoInc,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn contains_autoinc(&self) -> bool {
        match self {
            Expr::AutoInc => true,
            Expr::Add(l, r) | Expr::Sub(l, r) => l.contains_autoinc() || r.contains_autoinc(),
            _ => false,
        }
    }
}

/// `pattern[i] == None` is the wildcard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExistenceCheck {
    pub rel: RelId,
    pub pattern: Vec<Option<Expr>>,
}

impl ExistenceCheck {
    pub fn bound_columns(&self) -> Vec<usize> {
        bound_columns(&self.pattern)
    }
}

pub fn bound_columns(pattern: &[Option<Expr>]) -> Vec<usize> {
    pattern
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_some())
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cond {
    True,
    Emptiness(RelId),
    Exists(ExistenceCheck),
    NotExists(ExistenceCheck),
    Compare(CmpOp, Expr, Expr),
    And(Vec<Cond>),
    Not(Box<Cond>),
}

impl Cond {
    pub fn and(mut conds: Vec<Cond>) -> Cond {
        match conds.len() {
            0 => Cond::True,
            1 => conds.pop().unwrap(),
            _ => Cond::And(conds),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Scan {
        rel: RelId,
        var: TupleVar,
        body: Box<Op>,
    },
    IndexScan {
        rel: RelId,
        var: TupleVar,
        pattern: Vec<Option<Expr>>,
        body: Box<Op>,
    },
    Filter {
        cond: Cond,
        body: Box<Op>,
    },
    /// Folds `func` over the tuples of `rel` matching `pattern` and `filter`
    /// (with each tuple bound to `var`), then runs `body` with the result
    /// bound as the unary tuple `result`. Min and max over no tuples skip
    /// `body`; count yields 0.
    Aggregate {
        func: AggregateFn,
        rel: RelId,
        var: TupleVar,
        pattern: Vec<Option<Expr>>,
        filter: Cond,
        column: Option<usize>,
        result: TupleVar,
        body: Box<Op>,
    },
    Insert {
        rel: RelId,
        values: Vec<Expr>,
    },
    /// Inserts only if none of `checks` matches. Check patterns are positional
    /// over the evaluated `values`: a bound position compares against the
    /// candidate's value at that position.
    GuardedInsert {
        rel: RelId,
        values: Vec<Expr>,
        checks: Vec<ExistenceCheck>,
    },
}

impl Op {
    /// Relation written by the innermost insert, if any.
    pub fn target(&self) -> Option<RelId> {
        match self {
            Op::Insert { rel, .. } | Op::GuardedInsert { rel, .. } => Some(*rel),
            Op::Scan { body, .. }
            | Op::IndexScan { body, .. }
            | Op::Filter { body, .. }
            | Op::Aggregate { body, .. } => body.target(),
        }
    }

    pub fn tuple_var_count(&self) -> usize {
        match self {
            Op::Scan { var, body, .. } | Op::IndexScan { var, body, .. } => {
                (var + 1).max(body.tuple_var_count())
            }
            Op::Aggregate {
                var, result, body, ..
            } => (var + 1).max(result + 1).max(body.tuple_var_count()),
            Op::Filter { body, .. } => body.tuple_var_count(),
            Op::Insert { .. } | Op::GuardedInsert { .. } => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Sequence(Vec<Stmt>),
    Loop(Box<Stmt>),
    Exit(Cond),
    Query(Op),
    Merge { src: RelId, dst: RelId },
    Swap(RelId, RelId),
    Clear(RelId),
    ReadInput(RelId),
    WriteOutput(RelId),
}

impl Stmt {
    /// Visits every statement, outermost first.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match self {
            Stmt::Sequence(ss) => ss.iter().for_each(|s| s.walk(f)),
            Stmt::Loop(b) => b.walk(f),
            _ => {}
        }
    }

    pub fn walk_mut(&mut self, f: &mut impl FnMut(&mut Stmt)) {
        f(self);
        match self {
            Stmt::Sequence(ss) => ss.iter_mut().for_each(|s| s.walk_mut(f)),
            Stmt::Loop(b) => b.walk_mut(f),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RamProgram {
    pub relations: Vec<RamRelation>,
    pub main: Stmt,
    pub symbols: SymbolTable,
}

impl RamProgram {
    pub fn rel_id(&self, name: &str) -> Option<RelId> {
        self.relations.iter().position(|r| r.name == name)
    }

    /// Id of the full relation with the given source name.
    pub fn full_id(&self, name: &str) -> Option<RelId> {
        self.relations
            .iter()
            .position(|r| r.version == Version::Full && r.name == name)
    }

    pub fn relation(&self, id: RelId) -> &RamRelation {
        &self.relations[id]
    }

    /// Every query operation, in program order.
    pub fn queries(&self) -> Vec<&Op> {
        let mut out = Vec::new();
        self.main.walk(&mut |s| {
            if let Stmt::Query(op) = s {
                out.push(op);
            }
        });
        out
    }
}

/// Visits every operation node of a query tree, outermost first.
pub fn walk_op<'a>(op: &'a Op, f: &mut impl FnMut(&'a Op)) {
    f(op);
    match op {
        Op::Scan { body, .. }
        | Op::IndexScan { body, .. }
        | Op::Filter { body, .. }
        | Op::Aggregate { body, .. } => walk_op(body, f),
        Op::Insert { .. } | Op::GuardedInsert { .. } => {}
    }
}

/// Visits every condition node inside `cond`, outermost first.
pub fn walk_cond<'a>(cond: &'a Cond, f: &mut impl FnMut(&'a Cond)) {
    f(cond);
    match cond {
        Cond::And(cs) => cs.iter().for_each(|c| walk_cond(c, f)),
        Cond::Not(c) => walk_cond(c, f),
        _ => {}
    }
}
