use std::collections::{HashMap, HashSet};

use super::*;
use crate::ast::{Aggregate, ArithOp, Atom, Literal, Rule, Term};
use crate::semantics::{correlated_vars, reduce_redundant_domains, StratifiedProgram};

/// Lowers a stratified program into RAM without any choice handling.
///
/// Facts are inserted first, in source order. Each recursive stratum is seeded
/// from its non-recursive rules and then iterated semi-naively over
/// `delta_`/`new_` versions of its relations.
pub fn lower(sp: &StratifiedProgram) -> RamProgram {
    let mut relations = Vec::new();
    let mut full = HashMap::new();
    for decl in &sp.decls {
        let domains = decl.domain_positions();
        full.insert(decl.name.clone(), relations.len());
        relations.push(RamRelation {
            name: decl.name.clone(),
            base: relations.len(),
            version: Version::Full,
            types: decl.attrs.iter().map(|a| a.ty).collect(),
            reduced_domains: reduce_redundant_domains(&domains),
            domains,
            input: sp.is_input(&decl.name),
            output: sp.is_output(&decl.name),
        });
    }
    let mut delta = HashMap::new();
    let mut new = HashMap::new();
    for stratum in sp.strata.iter().filter(|s| s.recursive) {
        for name in &stratum.relations {
            let base = full[name];
            for (version, prefix, map) in [
                (Version::Delta, "delta_", &mut delta),
                (Version::New, "new_", &mut new),
            ] {
                let r = RamRelation {
                    name: format!("{prefix}{name}"),
                    base,
                    version,
                    input: false,
                    output: false,
                    ..relations[base].clone()
                };
                map.insert(name.clone(), relations.len());
                relations.push(r);
            }
        }
    }

    let mut lw = Lowerer {
        symbols: sp.symbols.clone(),
        full: &full,
    };
    let mut main = Vec::new();
    for (i, r) in relations.iter().enumerate() {
        if r.input {
            main.push(Stmt::ReadInput(i));
        }
    }
    for fact in &sp.facts {
        let values = fact
            .atom
            .args
            .iter()
            .map(|t| lw.const_expr(t))
            .collect();
        main.push(Stmt::Query(Op::Insert {
            rel: full[&fact.atom.relation],
            values,
        }));
    }

    for stratum in &sp.strata {
        let mut seq = Vec::new();
        let in_stratum = |a: &Atom| stratum.relations.contains(&a.relation);
        if !stratum.recursive {
            for rule in &stratum.rules {
                let versions = lw.full_versions(rule);
                seq.push(Stmt::Query(lw.rule(rule, &versions, full[&rule.head.relation], None, None)));
            }
        } else {
            let mut recursive_rules = Vec::new();
            for rule in &stratum.rules {
                if positives(rule).any(in_stratum) {
                    recursive_rules.push(rule);
                } else {
                    let versions = lw.full_versions(rule);
                    seq.push(Stmt::Query(lw.rule(rule, &versions, full[&rule.head.relation], None, None)));
                }
            }
            for name in &stratum.relations {
                seq.push(Stmt::Merge {
                    src: full[name],
                    dst: delta[name],
                });
            }
            let mut body = Vec::new();
            for rule in recursive_rules {
                let atoms: Vec<&Atom> = positives(rule).collect();
                for (k, occ) in atoms.iter().enumerate() {
                    if !in_stratum(occ) {
                        continue;
                    }
                    let versions: Vec<RelId> = atoms
                        .iter()
                        .enumerate()
                        .map(|(j, a)| {
                            if j == k {
                                delta[&a.relation]
                            } else {
                                full[&a.relation]
                            }
                        })
                        .collect();
                    let head = &rule.head.relation;
                    body.push(Stmt::Query(lw.rule(
                        rule,
                        &versions,
                        new[head],
                        Some(full[head]),
                        Some(k),
                    )));
                }
            }
            let exit = Cond::and(
                stratum
                    .relations
                    .iter()
                    .map(|n| Cond::Emptiness(new[n]))
                    .collect(),
            );
            body.push(Stmt::Exit(exit));
            for n in &stratum.relations {
                body.push(Stmt::Merge {
                    src: new[n],
                    dst: full[n],
                });
            }
            for n in &stratum.relations {
                body.push(Stmt::Swap(delta[n], new[n]));
            }
            for n in &stratum.relations {
                body.push(Stmt::Clear(new[n]));
            }
            seq.push(Stmt::Loop(Box::new(Stmt::Sequence(body))));
            for n in &stratum.relations {
                seq.push(Stmt::Clear(delta[n]));
            }
        }
        if !seq.is_empty() {
            main.push(Stmt::Sequence(seq));
        }
    }

    for (i, r) in relations.iter().enumerate() {
        if r.output {
            main.push(Stmt::WriteOutput(i));
        }
    }
    RamProgram {
        relations,
        main: Stmt::Sequence(main),
        symbols: lw.symbols,
    }
}

fn positives(rule: &Rule) -> impl Iterator<Item = &Atom> {
    rule.body.iter().filter_map(Literal::positive_atom)
}

struct Lowerer<'a> {
    symbols: SymbolTable,
    full: &'a HashMap<String, RelId>,
}

/// One level of the nested loop being built, outermost first.
enum Frame {
    Scan {
        rel: RelId,
        var: TupleVar,
        pattern: Vec<Option<Expr>>,
    },
    Filter(Vec<Cond>),
    Aggregate {
        agg: Aggregate,
        rel: RelId,
        var: TupleVar,
        pattern: Vec<Option<Expr>>,
        filter: Cond,
        column: Option<usize>,
        result: TupleVar,
    },
}

struct RuleState {
    bound: HashMap<String, Expr>,
    pending: Vec<(usize, Literal)>,
    frames: Vec<Frame>,
    next_var: TupleVar,
}

impl Lowerer<'_> {
    fn full_versions(&self, rule: &Rule) -> Vec<RelId> {
        positives(rule).map(|a| self.full[&a.relation]).collect()
    }

    fn const_expr(&mut self, t: &Term) -> Expr {
        match t {
            Term::Sym(s) => Expr::ConstSym(self.symbols.intern(s)),
            Term::Num(n) => Expr::ConstNum(*n),
            other => unreachable!("fact argument {other:?} is not a constant"),
        }
    }

    /// Expression for `t` under the current bindings, if every variable is bound.
    fn expr(&mut self, t: &Term, bound: &HashMap<String, Expr>) -> Option<Expr> {
        Some(match t {
            Term::Var(v) => bound.get(v)?.clone(),
            Term::Sym(s) => Expr::ConstSym(self.symbols.intern(s)),
            Term::Num(n) => Expr::ConstNum(*n),
            Term::Counter => Expr::AutoInc,
            Term::Wildcard => return None,
            Term::Binary(op, l, r) => {
                let l = Box::new(self.expr(l, bound)?);
                let r = Box::new(self.expr(r, bound)?);
                match op {
                    ArithOp::Add => Expr::Add(l, r),
                    ArithOp::Sub => Expr::Sub(l, r),
                }
            }
        })
    }

    /// Lowers one rule. `versions[k]` is the relation read by the k-th
    /// positive atom. With `dedup`, tuples already in that relation are
    /// filtered out before insertion. The `lead` atom, if any, is scanned
    /// first and the others follow in body order.
    fn rule(
        &mut self,
        rule: &Rule,
        versions: &[RelId],
        target: RelId,
        dedup: Option<RelId>,
        lead: Option<usize>,
    ) -> Op {
        let mut st = RuleState {
            bound: HashMap::new(),
            pending: rule
                .body
                .iter()
                .enumerate()
                .filter(|(_, l)| !matches!(l, Literal::Positive(_)))
                .map(|(i, l)| (i, l.clone()))
                .collect(),
            frames: Vec::new(),
            next_var: 0,
        };
        let mut nonempty = Vec::new();
        let mut seen = HashSet::new();
        for &rel in versions {
            if seen.insert(rel) {
                nonempty.push(Cond::Not(Box::new(Cond::Emptiness(rel))));
            }
        }
        if !nonempty.is_empty() {
            st.frames.push(Frame::Filter(vec![Cond::and(nonempty)]));
        }
        self.place_ready(rule, &mut st);

        let atoms: Vec<&Atom> = positives(rule).collect();
        let order = lead
            .into_iter()
            .chain((0..atoms.len()).filter(|&j| Some(j) != lead));
        for k in order {
            let atom = atoms[k];
            let var = st.next_var;
            st.next_var += 1;
            let mut pattern = vec![None; atom.args.len()];
            let mut local: Vec<(String, usize)> = Vec::new();
            let mut post = Vec::new();
            for (i, arg) in atom.args.iter().enumerate() {
                match arg {
                    Term::Wildcard => {}
                    Term::Var(v) if !st.bound.contains_key(v) => {
                        match local.iter().find(|(n, _)| n == v) {
                            Some(&(_, first)) => post.push(Cond::Compare(
                                CmpOp::Eq,
                                Expr::TupleElement(var, i),
                                Expr::TupleElement(var, first),
                            )),
                            None => local.push((v.clone(), i)),
                        }
                    }
                    _ => match self.expr(arg, &st.bound) {
                        Some(e) => pattern[i] = Some(e),
                        None => {
                            // Computed argument over variables bound later.
                            let name = format!(" col{var}_{i}");
                            st.bound.insert(name.clone(), Expr::TupleElement(var, i));
                            st.pending.push((
                                usize::MAX,
                                Literal::Compare {
                                    op: CmpOp::Eq,
                                    lhs: Term::Var(name),
                                    rhs: arg.clone(),
                                },
                            ));
                        }
                    },
                }
            }
            st.frames.push(Frame::Scan {
                rel: versions[k],
                var,
                pattern,
            });
            for (v, i) in local {
                st.bound.insert(v, Expr::TupleElement(var, i));
            }
            if !post.is_empty() {
                st.frames.push(Frame::Filter(post));
            }
            self.place_ready(rule, &mut st);
        }
        assert!(
            st.pending.is_empty(),
            "unplaceable literals in `{rule}`; groundedness should have rejected it"
        );

        let values: Vec<Expr> = rule
            .head
            .args
            .iter()
            .map(|t| {
                self.expr(t, &st.bound)
                    .unwrap_or_else(|| panic!("ungrounded head in `{rule}`"))
            })
            .collect();
        let has_autoinc = values.iter().any(Expr::contains_autoinc);
        let mut op = Op::Insert {
            rel: target,
            values: values.clone(),
        };
        if let (Some(full), false) = (dedup, has_autoinc) {
            op = Op::Filter {
                cond: Cond::NotExists(ExistenceCheck {
                    rel: full,
                    pattern: values.into_iter().map(Some).collect(),
                }),
                body: Box::new(op),
            };
        }
        for frame in st.frames.into_iter().rev() {
            op = match frame {
                Frame::Scan { rel, var, pattern } => {
                    if pattern.iter().any(Option::is_some) {
                        Op::IndexScan {
                            rel,
                            var,
                            pattern,
                            body: Box::new(op),
                        }
                    } else {
                        Op::Scan {
                            rel,
                            var,
                            body: Box::new(op),
                        }
                    }
                }
                Frame::Filter(conds) => Op::Filter {
                    cond: Cond::and(conds),
                    body: Box::new(op),
                },
                Frame::Aggregate {
                    agg,
                    rel,
                    var,
                    pattern,
                    filter,
                    column,
                    result,
                } => Op::Aggregate {
                    func: agg.func,
                    rel,
                    var,
                    pattern,
                    filter,
                    column,
                    result,
                    body: Box::new(op),
                },
            };
        }
        op
    }

    /// Emits every pending literal whose inputs are bound, repeating until
    /// nothing changes. Filters placed together are merged into one.
    fn place_ready(&mut self, rule: &Rule, st: &mut RuleState) {
        let mut filters = Vec::new();
        loop {
            let mut progressed = false;
            let mut i = 0;
            while i < st.pending.len() {
                let (pos, lit) = &st.pending[i];
                let pos = *pos;
                let placed = match lit.clone() {
                    Literal::Compare { op, lhs, rhs } => {
                        let l = self.expr(&lhs, &st.bound);
                        let r = self.expr(&rhs, &st.bound);
                        match (l, r, &lhs, &rhs) {
                            (Some(l), Some(r), _, _) => {
                                filters.push(Cond::Compare(op, l, r));
                                true
                            }
                            (None, Some(r), Term::Var(v), _) if op == CmpOp::Eq => {
                                st.bound.insert(v.clone(), r);
                                true
                            }
                            (Some(l), None, _, Term::Var(v)) if op == CmpOp::Eq => {
                                st.bound.insert(v.clone(), l);
                                true
                            }
                            _ => false,
                        }
                    }
                    Literal::Negated(atom) => {
                        let pattern: Option<Vec<Option<Expr>>> = atom
                            .args
                            .iter()
                            .map(|t| match t {
                                Term::Wildcard => Some(None),
                                t => self.expr(t, &st.bound).map(Some),
                            })
                            .collect();
                        match pattern {
                            Some(pattern) => {
                                filters.push(Cond::NotExists(ExistenceCheck {
                                    rel: self.full[&atom.relation],
                                    pattern,
                                }));
                                true
                            }
                            None => false,
                        }
                    }
                    Literal::Aggregate(agg) => {
                        let correlated = correlated_vars(rule, pos);
                        if correlated.iter().all(|v| st.bound.contains_key(v)) {
                            if !filters.is_empty() {
                                st.frames.push(Frame::Filter(std::mem::take(&mut filters)));
                            }
                            self.aggregate(agg, &correlated, st, &mut filters);
                            true
                        } else {
                            false
                        }
                    }
                    Literal::Positive(_) | Literal::Choice { .. } | Literal::Disjunction(_) => {
                        unreachable!("not a pending literal")
                    }
                };
                if placed {
                    st.pending.remove(i);
                    progressed = true;
                } else {
                    i += 1;
                }
            }
            if !progressed {
                break;
            }
        }
        if !filters.is_empty() {
            st.frames.push(Frame::Filter(filters));
        }
    }

    fn aggregate(
        &mut self,
        agg: Aggregate,
        correlated: &[String],
        st: &mut RuleState,
        filters: &mut Vec<Cond>,
    ) {
        let var = st.next_var;
        let result = st.next_var + 1;
        st.next_var += 2;
        let mut pattern = vec![None; agg.target.args.len()];
        let mut local: Vec<(&str, usize)> = Vec::new();
        let mut inner = Vec::new();
        for (i, arg) in agg.target.args.iter().enumerate() {
            match arg {
                Term::Wildcard => {}
                Term::Var(v) if correlated.contains(v) => {
                    pattern[i] = Some(st.bound[v].clone());
                }
                Term::Var(v) => match local.iter().find(|(n, _)| n == v) {
                    Some(&(_, first)) => inner.push(Cond::Compare(
                        CmpOp::Eq,
                        Expr::TupleElement(var, i),
                        Expr::TupleElement(var, first),
                    )),
                    None => local.push((v, i)),
                },
                t => pattern[i] = self.expr(t, &st.bound),
            }
        }
        let column = agg
            .value
            .as_deref()
            .and_then(|v| local.iter().find(|(n, _)| *n == v).map(|&(_, i)| i));
        let out = Expr::TupleElement(result, 0);
        match st.bound.get(&agg.result) {
            Some(existing) => filters.push(Cond::Compare(CmpOp::Eq, out, existing.clone())),
            None => {
                st.bound.insert(agg.result.clone(), out);
            }
        }
        st.frames.push(Frame::Aggregate {
            rel: self.full[&agg.target.relation],
            agg,
            var,
            pattern,
            filter: Cond::and(inner),
            column,
            result,
        });
    }
}
