//! A brute-force fixpoint evaluator over the AST, used as an independent
//! reference for choice-free programs.
//!
//! Relations are levelled by a plain iterative stratification and every
//! level is evaluated naively: all rules over the whole database until
//! nothing new is derived.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};

use choicelog::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Val {
    Sym(String),
    Num(i64),
}

impl Val {
    pub fn render(&self) -> String {
        match self {
            Val::Sym(s) => s.clone(),
            Val::Num(n) => n.to_string(),
        }
    }
}

pub type Db = HashMap<String, BTreeSet<Vec<Val>>>;
type Env = HashMap<String, Val>;

pub struct Naive<'a> {
    program: &'a Program,
    /// Order of symbols for `<` and friends.
    rank: &'a dyn Fn(&str) -> i64,
}

fn term_vars(t: &Term, out: &mut Vec<String>) {
    match t {
        Term::Var(v) => out.push(v.clone()),
        Term::Binary(_, l, r) => {
            term_vars(l, out);
            term_vars(r, out);
        }
        _ => {}
    }
}

fn lit_vars(l: &Literal, out: &mut Vec<String>) {
    match l {
        Literal::Positive(a) | Literal::Negated(a) => a.args.iter().for_each(|t| term_vars(t, out)),
        Literal::Compare { lhs, rhs, .. } => {
            term_vars(lhs, out);
            term_vars(rhs, out);
        }
        Literal::Aggregate(g) => {
            g.target.args.iter().for_each(|t| term_vars(t, out));
            out.push(g.result.clone());
        }
        Literal::Choice { domain, dependent } => out.extend(domain.iter().chain(dependent).cloned()),
        Literal::Disjunction(bs) => bs.iter().flatten().for_each(|l| lit_vars(l, out)),
    }
}

/// Every body with disjunctions multiplied out.
fn expand(body: &[Literal]) -> Vec<Vec<Literal>> {
    let mut acc: Vec<Vec<Literal>> = vec![vec![]];
    for l in body {
        match l {
            Literal::Disjunction(branches) => {
                let mut next = Vec::new();
                for prefix in &acc {
                    for b in branches {
                        for tail in expand(b) {
                            let mut v = prefix.clone();
                            v.extend(tail);
                            next.push(v);
                        }
                    }
                }
                acc = next;
            }
            Literal::Choice { .. } => {}
            other => acc.iter_mut().for_each(|v| v.push(other.clone())),
        }
    }
    acc
}

impl<'a> Naive<'a> {
    pub fn new(program: &'a Program, rank: &'a dyn Fn(&str) -> i64) -> Self {
        Naive { program, rank }
    }

    fn levels(&self) -> HashMap<String, usize> {
        let mut level: HashMap<String, usize> = self.program.decls.iter().map(|d| (d.name.clone(), 0)).collect();
        let n = level.len() + 1;
        for _ in 0..=n {
            let mut changed = false;
            for r in &self.program.rules {
                let h = level[&r.head.relation];
                let mut need = h;
                for body in expand(&r.body) {
                    for l in &body {
                        match l {
                            Literal::Positive(a) => need = need.max(level[&a.relation]),
                            Literal::Negated(a) => need = need.max(level[&a.relation] + 1),
                            Literal::Aggregate(g) => need = need.max(level[&g.target.relation] + 1),
                            _ => {}
                        }
                    }
                }
                if need > h {
                    level.insert(r.head.relation.clone(), need);
                    changed = true;
                }
            }
            if !changed {
                return level;
            }
        }
        panic!("program is not stratifiable");
    }

    pub fn run(&self, edb: &Db) -> Db {
        let mut db: Db = self.program.decls.iter().map(|d| (d.name.clone(), BTreeSet::new())).collect();
        for (k, v) in edb {
            db.entry(k.clone()).or_default().extend(v.iter().cloned());
        }
        for f in &self.program.facts {
            let t = f.atom.args.iter().map(|a| self.eval(a, &Env::new()).expect("constant fact")).collect();
            db.get_mut(&f.atom.relation).unwrap().insert(t);
        }
        let level = self.levels();
        let top = level.values().copied().max().unwrap_or(0);
        for l in 0..=top {
            let rules: Vec<&Rule> = self
                .program
                .rules
                .iter()
                .filter(|r| level[&r.head.relation] == l)
                .collect();
            loop {
                let mut derived = Vec::new();
                for r in &rules {
                    for body in expand(&r.body) {
                        let mut outside: HashMap<usize, HashSet<String>> = HashMap::new();
                        for (i, lit) in body.iter().enumerate() {
                            if matches!(lit, Literal::Aggregate(_)) {
                                let mut vs = Vec::new();
                                r.head.args.iter().for_each(|t| term_vars(t, &mut vs));
                                for (j, other) in body.iter().enumerate() {
                                    if j != i {
                                        lit_vars(other, &mut vs);
                                    }
                                }
                                outside.insert(i, vs.into_iter().collect());
                            }
                        }
                        let pending: Vec<(usize, &Literal)> = body.iter().enumerate().collect();
                        self.solve(&pending, &outside, Env::new(), &db, &mut |env| {
                            let t: Vec<Val> = r
                                .head
                                .args
                                .iter()
                                .map(|a| self.eval(a, env).expect("head is grounded"))
                                .collect();
                            derived.push((r.head.relation.clone(), t));
                        });
                    }
                }
                let mut changed = false;
                for (rel, t) in derived {
                    changed |= db.get_mut(&rel).unwrap().insert(t);
                }
                if !changed {
                    break;
                }
            }
        }
        db
    }

    fn eval(&self, t: &Term, env: &Env) -> Option<Val> {
        Some(match t {
            Term::Var(v) => env.get(v)?.clone(),
            Term::Sym(s) => Val::Sym(s.clone()),
            Term::Num(n) => Val::Num(*n),
            Term::Binary(op, l, r) => {
                let (Val::Num(a), Val::Num(b)) = (self.eval(l, env)?, self.eval(r, env)?) else {
                    panic!("arithmetic on symbols");
                };
                Val::Num(match op {
                    ArithOp::Add => a.wrapping_add(b),
                    ArithOp::Sub => a.wrapping_sub(b),
                })
            }
            Term::Wildcard => return None,
            Term::Counter => panic!("`$` is not supported by the reference evaluator"),
        })
    }

    fn cmp(&self, op: CmpOp, a: &Val, b: &Val) -> bool {
        let ord = match (a, b) {
            (Val::Num(x), Val::Num(y)) => x.cmp(y),
            (Val::Sym(x), Val::Sym(y)) => (self.rank)(x).cmp(&(self.rank)(y)),
            _ => panic!("mixed comparison"),
        };
        match op {
            CmpOp::Eq => ord.is_eq(),
            CmpOp::Ne => ord.is_ne(),
            CmpOp::Lt => ord.is_lt(),
            CmpOp::Le => ord.is_le(),
            CmpOp::Gt => ord.is_gt(),
            CmpOp::Ge => ord.is_ge(),
        }
    }

    /// Matches `t` against `atom` under `env`, binding fresh variables.
    fn unify(&self, atom: &Atom, t: &[Val], env: &Env) -> Option<Env> {
        let mut env = env.clone();
        for (a, v) in atom.args.iter().zip(t) {
            match a {
                Term::Wildcard => {}
                Term::Var(x) => match env.get(x) {
                    Some(b) if b != v => return None,
                    Some(_) => {}
                    None => {
                        env.insert(x.clone(), v.clone());
                    }
                },
                other => {
                    if self.eval(other, &env)? != *v {
                        return None;
                    }
                }
            }
        }
        Some(env)
    }

    fn computable(&self, a: &Atom, env: &Env) -> bool {
        a.args.iter().all(|t| match t {
            Term::Binary(..) => self.eval(t, env).is_some(),
            _ => true,
        })
    }

    fn solve(
        &self,
        pending: &[(usize, &Literal)],
        outside: &HashMap<usize, HashSet<String>>,
        env: Env,
        db: &Db,
        emit: &mut dyn FnMut(&Env),
    ) {
        if pending.is_empty() {
            emit(&env);
            return;
        }
        let bound = |t: &Term| {
            let mut vs = Vec::new();
            term_vars(t, &mut vs);
            vs.iter().all(|v| env.contains_key(v))
        };
        let ready = |(i, l): &(usize, &Literal)| match l {
            Literal::Compare { op, lhs, rhs } => {
                (bound(lhs) && bound(rhs))
                    || (*op == CmpOp::Eq && (matches!(lhs, Term::Var(_)) && bound(rhs) || matches!(rhs, Term::Var(_)) && bound(lhs)))
            }
            Literal::Negated(a) => a.args.iter().all(|t| matches!(t, Term::Wildcard) || bound(t)),
            Literal::Aggregate(g) => {
                let mut vs = Vec::new();
                g.target.args.iter().for_each(|t| term_vars(t, &mut vs));
                vs.iter()
                    .filter(|v| outside[i].contains(*v) && Some(*v) != g.value.as_ref())
                    .all(|v| env.contains_key(v))
            }
            _ => false,
        };
        let pick = pending
            .iter()
            .position(ready)
            .or_else(|| {
                pending
                    .iter()
                    .position(|(_, l)| matches!(l, Literal::Positive(a) if self.computable(a, &env)))
            })
            .expect("no literal can be evaluated");
        let (idx, lit) = pending[pick];
        let mut rest = pending.to_vec();
        rest.remove(pick);
        match lit {
            Literal::Positive(a) => {
                for t in &db[&a.relation] {
                    if let Some(e) = self.unify(a, t, &env) {
                        self.solve(&rest, outside, e, db, emit);
                    }
                }
            }
            Literal::Negated(a) => {
                if !db[&a.relation].iter().any(|t| self.unify(a, t, &env).is_some()) {
                    self.solve(&rest, outside, env, db, emit);
                }
            }
            Literal::Compare { op, lhs, rhs } => match (self.eval(lhs, &env), self.eval(rhs, &env)) {
                (Some(a), Some(b)) => {
                    if self.cmp(*op, &a, &b) {
                        self.solve(&rest, outside, env, db, emit);
                    }
                }
                (None, Some(b)) => {
                    let Term::Var(x) = lhs else { unreachable!() };
                    let mut e = env;
                    e.insert(x.clone(), b);
                    self.solve(&rest, outside, e, db, emit);
                }
                (Some(a), None) => {
                    let Term::Var(x) = rhs else { unreachable!() };
                    let mut e = env;
                    e.insert(x.clone(), a);
                    self.solve(&rest, outside, e, db, emit);
                }
                (None, None) => unreachable!(),
            },
            Literal::Aggregate(g) => {
                // Only variables shared with the rest of the rule correlate.
                let mut scoped = env.clone();
                scoped.retain(|k, _| outside[&idx].contains(k));
                let mut count = 0i64;
                let mut best: Option<i64> = None;
                for t in &db[&g.target.relation] {
                    if let Some(e) = self.unify(&g.target, t, &scoped) {
                        count += 1;
                        if let Some(v) = &g.value {
                            let Some(Val::Num(x)) = e.get(v) else { panic!("aggregate over symbols") };
                            best = Some(match (g.func, best) {
                                (AggregateFn::Min, Some(b)) => b.min(*x),
                                (AggregateFn::Max, Some(b)) => b.max(*x),
                                _ => *x,
                            });
                        }
                    }
                }
                let value = match g.func {
                    AggregateFn::Count => Some(count),
                    _ => best,
                };
                if let Some(v) = value {
                    let v = Val::Num(v);
                    match env.get(&g.result) {
                        Some(b) if *b != v => {}
                        _ => {
                            let mut e = env;
                            e.insert(g.result.clone(), v);
                            self.solve(&rest, outside, e, db, emit);
                        }
                    }
                }
            }
            Literal::Choice { .. } | Literal::Disjunction(_) => unreachable!(),
        }
    }
}

/// Parses TSV rows into typed values following the declaration of `rel`.
pub fn typed(program: &Program, rel: &str, rows: &[Vec<String>]) -> BTreeSet<Vec<Val>> {
    let decl = program.decl(rel).unwrap();
    rows.iter()
        .map(|r| {
            r.iter()
                .zip(&decl.attrs)
                .map(|(f, a)| match a.ty {
                    AttrType::Symbol => Val::Sym(f.clone()),
                    AttrType::Number => Val::Num(f.parse().unwrap()),
                })
                .collect()
        })
        .collect()
}

pub fn render(set: &BTreeSet<Vec<Val>>) -> BTreeSet<Vec<String>> {
    set.iter().map(|t| t.iter().map(Val::render).collect()).collect()
}
