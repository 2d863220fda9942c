//! RAM interpreter.

use std::cell::{Cell, RefCell};
use std::fmt;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::ast::{AggregateFn, AttrType, CmpOp};
use crate::io::{self, IoError};
use crate::ram::*;
use crate::storage::{Instance, Relation, StorageError, SymbolTable, Tuple, Value};

/// How conflicting candidates for a choice-constrained relation are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChoicePolicy {
    /// Candidates are inserted in evaluation order; the first one wins.
    #[default]
    First,
    /// Guarded candidates are buffered and inserted in an order permuted by a
    /// PRNG seeded with the given value.
    Shuffled(u64),
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub policy: ChoicePolicy,
    /// Abort a fixpoint loop after this many iterations.
    pub max_iterations: Option<u64>,
    pub trace: bool,
    /// Directory holding `<relation>.facts`; inputs are not read when unset.
    pub facts_dir: Option<PathBuf>,
    /// Directory receiving `<relation>.tsv`; outputs are not written when unset.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("iteration limit of {0} reached")]
    IterationLimit(u64),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("functional dependency violated on `{relation}`: {first} and {second}")]
    FdViolation {
        relation: String,
        first: String,
        second: String,
    },
}

impl EvalError {
    /// Whether the error is caused by the user's input rather than the engine.
    pub fn is_user_error(&self) -> bool {
        matches!(self, EvalError::IterationLimit(_) | EvalError::Io(_))
    }
}

/// Tuples merged into full relations, per fixpoint loop.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub loops: Vec<LoopTrace>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoopTrace {
    /// Delta contents on loop entry, rendered as `rel(v, ...)`.
    pub seed: Vec<String>,
    /// One entry per iteration that merged anything.
    pub iterations: Vec<Vec<String>>,
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.loops.iter().enumerate() {
            writeln!(f, "loop {}", i + 1)?;
            writeln!(f, "  seed: {}", l.seed.join(", "))?;
            for (k, it) in l.iterations.iter().enumerate() {
                writeln!(f, "  iteration {}: {}", k + 1, it.join(", "))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    /// Loop body executions across all fixpoint loops.
    pub iterations: u64,
    /// Values handed out by `$`.
    pub autoinc: i64,
}

#[derive(Debug)]
pub struct Outcome {
    pub instance: Instance,
    pub trace: Option<Trace>,
    pub stats: Stats,
}

/// Evaluates `ram` starting from the tuples already in `edb`.
pub fn run(ram: &RamProgram, edb: Instance, opts: &EvalOptions) -> Result<Outcome, EvalError> {
    let Instance {
        relations,
        types,
        symbols,
        ..
    } = edb;
    let mut m = Machine {
        ram,
        rels: relations.into_iter().map(RefCell::new).collect(),
        symbols,
        opts,
        counter: Cell::new(0),
        pending: RefCell::new(Vec::new()),
        rng: match opts.policy {
            ChoicePolicy::Shuffled(seed) => Some(RefCell::new(ChaCha8Rng::seed_from_u64(seed))),
            ChoicePolicy::First => None,
        },
        trace: opts.trace.then(Trace::default),
        stats: Stats::default(),
    };
    m.stmt(&ram.main)?;
    m.flush()?;
    let stats = Stats {
        autoinc: m.counter.get(),
        ..m.stats
    };
    let mut instance = Instance::new(ram, &crate::storage::IndexPlan {
        signatures: vec![Default::default(); ram.relations.len()],
    });
    instance.relations = m.rels.into_iter().map(RefCell::into_inner).collect();
    instance.types = types;
    instance.symbols = m.symbols;
    Ok(Outcome {
        instance,
        trace: m.trace,
        stats,
    })
}

enum Flow {
    Continue,
    Exit,
}

type Env = Vec<Tuple>;
type Pattern = SmallVec<[Option<i64>; 4]>;

struct Machine<'a> {
    ram: &'a RamProgram,
    rels: Vec<RefCell<Relation>>,
    symbols: SymbolTable,
    opts: &'a EvalOptions,
    counter: Cell<i64>,
    pending: RefCell<Vec<(RelId, Tuple, &'a [ExistenceCheck])>>,
    rng: Option<RefCell<ChaCha8Rng>>,
    trace: Option<Trace>,
    stats: Stats,
}

impl<'a> Machine<'a> {
    fn stmt(&mut self, s: &'a Stmt) -> Result<Flow, EvalError> {
        match s {
            Stmt::Sequence(ss) => {
                for s in ss {
                    if let Flow::Exit = self.stmt(s)? {
                        self.flush()?;
                        return Ok(Flow::Exit);
                    }
                }
                self.flush()?;
            }
            Stmt::Loop(body) => self.run_loop(body)?,
            Stmt::Exit(cond) => {
                self.flush()?;
                let env = Env::new();
                if self.cond(cond, &env)? {
                    return Ok(Flow::Exit);
                }
            }
            Stmt::Query(op) => {
                let mut env: Env = vec![Tuple::new(); op.tuple_var_count()];
                self.op(op, &mut env)?;
                if let Some(target) = op.target() {
                    if self.rng.is_none() {
                        self.debug_check_fd(target)?;
                    }
                }
            }
            Stmt::Merge { src, dst } => {
                self.flush()?;
                let record = self.trace.is_some() && self.ram.relations[*dst].version == Version::Full;
                let mut added = Vec::new();
                {
                    let src_rel = self.rels[*src].borrow();
                    let mut dst_rel = self.rels[*dst].borrow_mut();
                    dst_rel.merge_from(&src_rel, record.then_some(&mut added))?;
                }
                if record && !added.is_empty() {
                    let rendered: Vec<String> = added.iter().map(|t| self.render(*dst, t)).collect();
                    if let Some(it) = self
                        .trace
                        .as_mut()
                        .and_then(|t| t.loops.last_mut())
                        .and_then(|l| l.iterations.last_mut())
                    {
                        it.extend(rendered);
                    }
                }
                self.debug_check_fd(*dst)?;
            }
            Stmt::Swap(a, b) => {
                self.flush()?;
                let mut ra = self.rels[*a].borrow_mut();
                let mut rb = self.rels[*b].borrow_mut();
                ra.swap_contents(&mut rb)?;
            }
            Stmt::Clear(r) => {
                self.flush()?;
                self.rels[*r].borrow_mut().clear();
            }
            Stmt::ReadInput(r) => {
                self.flush()?;
                self.read_input(*r)?;
            }
            Stmt::WriteOutput(r) => {
                self.flush()?;
                if let Some(dir) = &self.opts.out_dir {
                    let rel = &self.ram.relations[*r];
                    let path = dir.join(format!("{}.tsv", rel.name));
                    io::write_tsv(&path, &self.rels[*r].borrow(), &rel.types, &self.symbols)?;
                }
            }
        }
        Ok(Flow::Continue)
    }

    fn run_loop(&mut self, body: &'a Stmt) -> Result<(), EvalError> {
        if self.trace.is_some() {
            let mut seed = Vec::new();
            body.walk(&mut |s| {
                if let Stmt::Swap(delta, _) = s {
                    for t in self.rels[*delta].borrow().iter() {
                        seed.push(self.render(*delta, t));
                    }
                }
            });
            if let Some(t) = self.trace.as_mut() {
                t.loops.push(LoopTrace {
                    seed,
                    iterations: Vec::new(),
                });
            }
        }
        let mut count = 0u64;
        loop {
            if let Some(limit) = self.opts.max_iterations {
                if count >= limit {
                    return Err(EvalError::IterationLimit(limit));
                }
            }
            count += 1;
            self.stats.iterations += 1;
            if let Some(l) = self.trace.as_mut().and_then(|t| t.loops.last_mut()) {
                l.iterations.push(Vec::new());
            }
            let flow = self.stmt(body)?;
            if let Flow::Exit = flow {
                break;
            }
        }
        if let Some(l) = self.trace.as_mut().and_then(|t| t.loops.last_mut()) {
            l.iterations.retain(|it| !it.is_empty());
        }
        Ok(())
    }

    fn read_input(&mut self, r: RelId) -> Result<(), EvalError> {
        let Some(dir) = &self.opts.facts_dir else {
            return Ok(());
        };
        let rel = &self.ram.relations[r];
        let path = dir.join(format!("{}.facts", rel.name));
        let tuples = io::read_facts(&path, &rel.types, &mut self.symbols)?;
        let mut target = self.rels[r].borrow_mut();
        for t in tuples {
            let blocked = rel.reduced_domains.iter().any(|d| {
                let p: Pattern = (0..t.len()).map(|i| d.contains(i).then(|| t[i])).collect();
                target.exists(&p).unwrap_or(false)
            });
            if !blocked {
                target.insert(&t)?;
            }
        }
        Ok(())
    }

    fn render(&self, rel: RelId, t: &[i64]) -> String {
        let r = &self.ram.relations[rel];
        let fields: Vec<String> = t
            .iter()
            .zip(&r.types)
            .map(|(&v, ty)| match ty {
                AttrType::Symbol => Value::Sym(v).display(&self.symbols).to_string(),
                AttrType::Number => v.to_string(),
            })
            .collect();
        let name = match r.version {
            Version::Full => &r.name,
            _ => &self.ram.relations[r.base].name,
        };
        format!("{name}({})", fields.join(", "))
    }

    fn debug_check_fd(&self, rel: RelId) -> Result<(), EvalError> {
        if !cfg!(debug_assertions) {
            return Ok(());
        }
        let info = &self.ram.relations[rel];
        if info.domains.is_empty() {
            return Ok(());
        }
        if let Some((a, b)) = self.rels[rel].borrow().fd_violation(&info.domains) {
            return Err(EvalError::FdViolation {
                relation: info.name.clone(),
                first: self.render(rel, &a),
                second: self.render(rel, &b),
            });
        }
        Ok(())
    }

    /// Inserts buffered candidates in shuffled order.
    fn flush(&mut self) -> Result<(), EvalError> {
        let Some(rng) = &self.rng else {
            return Ok(());
        };
        let mut pending = std::mem::take(&mut *self.pending.borrow_mut());
        if pending.is_empty() {
            return Ok(());
        }
        pending.shuffle(&mut *rng.borrow_mut());
        let mut targets = Vec::new();
        for (rel, t, checks) in pending {
            self.guarded_insert(rel, &t, checks)?;
            if !targets.contains(&rel) {
                targets.push(rel);
            }
        }
        for rel in targets {
            self.debug_check_fd(rel)?;
        }
        Ok(())
    }

    fn guarded_insert(&self, rel: RelId, t: &[i64], checks: &[ExistenceCheck]) -> Result<bool, EvalError> {
        for c in checks {
            let p: Pattern = c
                .pattern
                .iter()
                .enumerate()
                .map(|(i, e)| e.as_ref().map(|_| t[i]))
                .collect();
            if self.rels[c.rel].borrow().exists(&p)? {
                return Ok(false);
            }
        }
        Ok(self.rels[rel].borrow_mut().insert(t)?)
    }

    fn expr(&self, e: &Expr, env: &Env) -> i64 {
        match e {
            Expr::TupleElement(v, i) => env[*v][*i],
            Expr::ConstSym(id) => *id,
            Expr::ConstNum(n) => *n,
            Expr::AutoInc => {
                let v = self.counter.get();
                self.counter.set(v + 1);
                v
            }
            Expr::Add(l, r) => self.expr(l, env).wrapping_add(self.expr(r, env)),
            Expr::Sub(l, r) => self.expr(l, env).wrapping_sub(self.expr(r, env)),
        }
    }

    fn pattern(&self, p: &[Option<Expr>], env: &Env) -> Pattern {
        p.iter()
            .map(|e| e.as_ref().map(|e| self.expr(e, env)))
            .collect()
    }

    fn cond(&self, c: &Cond, env: &Env) -> Result<bool, EvalError> {
        Ok(match c {
            Cond::True => true,
            Cond::Emptiness(r) => self.rels[*r].borrow().is_empty(),
            Cond::Exists(e) => self.rels[e.rel].borrow().exists(&self.pattern(&e.pattern, env))?,
            Cond::NotExists(e) => !self.rels[e.rel].borrow().exists(&self.pattern(&e.pattern, env))?,
            Cond::Compare(op, l, r) => {
                let (l, r) = (self.expr(l, env), self.expr(r, env));
                match op {
                    CmpOp::Eq => l == r,
                    CmpOp::Ne => l != r,
                    CmpOp::Lt => l < r,
                    CmpOp::Le => l <= r,
                    CmpOp::Gt => l > r,
                    CmpOp::Ge => l >= r,
                }
            }
            Cond::And(cs) => {
                for c in cs {
                    if !self.cond(c, env)? {
                        return Ok(false);
                    }
                }
                true
            }
            Cond::Not(c) => !self.cond(c, env)?,
        })
    }

    fn op(&self, op: &'a Op, env: &mut Env) -> Result<(), EvalError> {
        match op {
            Op::Scan { rel, var, body } => {
                let r = self.rels[*rel].borrow();
                for t in r.iter() {
                    env[*var].clone_from(t);
                    self.op(body, env)?;
                }
            }
            Op::IndexScan {
                rel,
                var,
                pattern,
                body,
            } => {
                let p = self.pattern(pattern, env);
                let r = self.rels[*rel].borrow();
                for t in r.scan(&p)? {
                    env[*var] = t;
                    self.op(body, env)?;
                }
            }
            Op::Filter { cond, body } => {
                if self.cond(cond, env)? {
                    self.op(body, env)?;
                }
            }
            Op::Aggregate {
                func,
                rel,
                var,
                pattern,
                filter,
                column,
                result,
                body,
            } => {
                let p = self.pattern(pattern, env);
                let mut count = 0i64;
                let mut best: Option<i64> = None;
                {
                    let r = self.rels[*rel].borrow();
                    for t in r.scan(&p)? {
                        env[*var] = t;
                        if !self.cond(filter, env)? {
                            continue;
                        }
                        count += 1;
                        if let Some(c) = column {
                            let v = env[*var][*c];
                            best = Some(match (func, best) {
                                (_, None) => v,
                                (AggregateFn::Max, Some(b)) => b.max(v),
                                (AggregateFn::Min, Some(b)) => b.min(v),
                                (AggregateFn::Count, Some(b)) => b,
                            });
                        }
                    }
                }
                let value = match func {
                    AggregateFn::Count => Some(count),
                    AggregateFn::Min | AggregateFn::Max => best,
                };
                if let Some(v) = value {
                    env[*result] = Tuple::from_slice(&[v]);
                    self.op(body, env)?;
                }
            }
            Op::Insert { rel, values } => {
                let t: Tuple = values.iter().map(|e| self.expr(e, env)).collect();
                self.rels[*rel].borrow_mut().insert(&t)?;
            }
            Op::GuardedInsert { rel, values, checks } => {
                let t: Tuple = values.iter().map(|e| self.expr(e, env)).collect();
                if self.rng.is_some() {
                    self.pending.borrow_mut().push((*rel, t, checks));
                } else {
                    self.guarded_insert(*rel, &t, checks)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    use crate::corpus::{self, Facts};

    fn rows(items: &[&[&str]]) -> Vec<Vec<String>> {
        items.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
    }

    fn eval(src: &str, facts: &Facts, opts: &EvalOptions) -> Result<Outcome, EvalError> {
        let p = crate::compile(src).unwrap();
        let edb = corpus::load(&p, facts).unwrap();
        p.run_with(edb, opts)
    }

    fn traced() -> EvalOptions {
        EvalOptions {
            trace: true,
            ..Default::default()
        }
    }

    #[test]
    fn trace_on_sample_graph() {
        let out = eval(corpus::SPANNING_TREE, &corpus::sample_graph(), &traced()).unwrap();
        let trace = out.trace.unwrap();
        assert_eq!(trace.loops.len(), 1);
        let l = &trace.loops[0];
        assert_eq!(l.seed, ["st(root, L1)"]);
        assert_eq!(l.iterations[..3], [
            vec!["st(L1, L2)".to_string()],
            vec!["st(L2, L3)".to_string(), "st(L2, L10)".to_string()],
            vec!["st(L3, L4)".to_string(), "st(L3, L6)".to_string()],
        ]);
        assert_eq!(l.iterations[3], ["st(L4, L8)"]);
        assert_eq!(l.iterations.len(), 4);
        assert_eq!(out.stats.iterations, 5);
        assert_eq!(out.instance.relation("st").unwrap().len(), 7);
    }

    #[test]
    fn shuffled_policy_keeps_one_of_the_conflicting_edges() {
        let mut seen = HashSet::new();
        for seed in 0..20 {
            let opts = EvalOptions {
                policy: ChoicePolicy::Shuffled(seed),
                ..traced()
            };
            let out = eval(corpus::SPANNING_TREE, &corpus::sample_graph(), &opts).unwrap();
            let it = &out.trace.unwrap().loops[0].iterations;
            assert_eq!(it.len(), 4);
            seen.insert(it[3].clone());
            assert_eq!(out.instance.relation("st").unwrap().len(), 7);
        }
        assert!(seen.iter().all(|i| i == &["st(L4, L8)"] || i == &["st(L6, L8)"]));
    }

    #[test]
    fn no_rules_returns_the_input() {
        let src = ".decl e(x:symbol, y:number)\n.input e\n.output e";
        let facts = Facts::from([("e".to_string(), rows(&[&["a", "1"], &["b", "-2"]]))]);
        let out = eval(src, &facts, &EvalOptions::default()).unwrap();
        assert_eq!(out.instance.rows("e").unwrap(), rows(&[&["a", "1"], &["b", "-2"]]));
    }

    #[test]
    fn conflicting_derivations_keep_one() {
        let src = ".decl r(x:number, y:number, z:number) choice-domain (x, y)\n\
                   .decl s(z:number)\ns(3). s(4).\nr(1, 2, z) :- s(z).";
        let out = eval(src, &Facts::new(), &EvalOptions::default()).unwrap();
        assert_eq!(out.instance.rows("r").unwrap(), rows(&[&["1", "2", "3"]]));
    }

    #[test]
    fn chain_takes_one_iteration_per_edge() {
        let src = ".decl e(x:number, y:number)\n.decl p(x:number, y:number)\n\
                   e(1, 2). e(2, 3). e(3, 4).\np(x, y) :- e(x, y).\np(x, z) :- p(x, y), e(y, z).";
        let out = eval(src, &Facts::new(), &traced()).unwrap();
        assert_eq!(out.instance.relation("p").unwrap().len(), 6);
        assert_eq!(out.trace.unwrap().loops[0].iterations.len(), 2);

        let src = ".decl e(x:number, y:number)\n.decl r(x:number)\n\
                   e(1, 2). e(2, 3). e(3, 4).\nr(1).\nr(y) :- r(x), e(x, y).";
        let out = eval(src, &Facts::new(), &traced()).unwrap();
        let t = out.trace.unwrap();
        assert_eq!(t.loops[0].iterations, [["r(2)"], ["r(3)"], ["r(4)"]]);
    }

    #[test]
    fn empty_input_needs_no_iterations() {
        let out = eval(corpus::SPANNING_TREE.replace("st(\"root\", \"L1\").", "").as_str(), &Facts::new(), &traced()).unwrap();
        assert!(out.trace.unwrap().loops[0].iterations.is_empty());
        assert!(out.instance.relation("st").unwrap().is_empty());
    }

    #[test]
    fn full_domain_is_plain_set_semantics() {
        let base = ".decl e(x:number, y:number)\ne(1, 2). e(2, 3). e(2, 4).\np(x, y) :- e(x, y).\np(x, z) :- p(x, y), e(y, z).";
        let with = format!(".decl p(x:number, y:number) choice-domain (x, y)\n{base}");
        let without = format!(".decl p(x:number, y:number)\n{base}");
        let a = eval(&with, &Facts::new(), &EvalOptions::default()).unwrap();
        let b = eval(&without, &Facts::new(), &EvalOptions::default()).unwrap();
        assert_eq!(a.instance.rows("p"), b.instance.rows("p"));
    }

    #[test]
    fn iteration_limit_aborts() {
        let src = ".decl n(x:number)\nn(0).\nn(x + 1) :- n(x).";
        let opts = EvalOptions {
            max_iterations: Some(10),
            ..Default::default()
        };
        let e = eval(src, &Facts::new(), &opts).unwrap_err();
        assert!(matches!(e, EvalError::IterationLimit(10)));
        assert!(e.is_user_error());
    }

    #[test]
    fn aggregates_and_counter() {
        let src = ".decl m(s:symbol, v:number)\n.decl top(v:number)\n.decl n(k:number)\n.decl id(i:number, s:symbol)\n\
                   m(\"a\", 3). m(\"b\", 9). m(\"c\", 5).\n\
                   top(v) :- v = max x : m(_, x).\nn(k) :- k = count : m(_, _).\nid($, s) :- m(s, _).";
        let out = eval(src, &Facts::new(), &EvalOptions::default()).unwrap();
        assert_eq!(out.instance.rows("top").unwrap(), rows(&[&["9"]]));
        assert_eq!(out.instance.rows("n").unwrap(), rows(&[&["3"]]));
        assert_eq!(out.instance.relation("id").unwrap().len(), 3);
        assert_eq!(out.stats.autoinc, 3);
    }

    #[test]
    fn empty_aggregates() {
        let src = ".decl m(v:number)\n.decl c(k:number)\n.decl t(v:number)\n\
                   c(k) :- k = count : m(_).\nt(v) :- v = min x : m(x).";
        let out = eval(src, &Facts::new(), &EvalOptions::default()).unwrap();
        assert_eq!(out.instance.rows("c").unwrap(), rows(&[&["0"]]));
        assert!(out.instance.rows("t").unwrap().is_empty());
    }

    #[test]
    fn runs_are_deterministic() {
        let input = corpus::generate("spanning_forest", 5, 200).unwrap();
        let src = corpus::source("spanning_forest", corpus::Version::Choice);
        for policy in [ChoicePolicy::First, ChoicePolicy::Shuffled(9)] {
            let opts = EvalOptions {
                policy,
                ..Default::default()
            };
            let a = eval(src, &input, &opts).unwrap();
            let b = eval(src, &input, &opts).unwrap();
            assert_eq!(a.instance.rows("st"), b.instance.rows("st"));
        }
    }
}
