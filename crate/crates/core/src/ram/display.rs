use std::fmt::{self, Write};

use super::*;

fn var_name(v: TupleVar) -> String {
    if v < 26 {
        ((b'a' + v as u8) as char).to_string()
    } else {
        format!("t{v}")
    }
}

struct Printer<'a> {
    prog: &'a RamProgram,
    out: String,
}

impl Printer<'_> {
    fn rel(&self, id: RelId) -> &str {
        &self.prog.relations[id].name
    }

    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn expr(&self, e: &Expr) -> String {
        match e {
            Expr::TupleElement(v, i) => format!("{}[{i}]", var_name(*v)),
            Expr::ConstSym(id) => format!("\"{}\"", self.prog.symbols.resolve(*id)),
            Expr::ConstNum(n) => n.to_string(),
            Expr::AutoInc => "AUTOINC()".into(),
            Expr::Add(l, r) => format!("({} + {})", self.expr(l), self.expr(r)),
            Expr::Sub(l, r) => format!("({} - {})", self.expr(l), self.expr(r)),
        }
    }

    fn pattern(&self, p: &[Option<Expr>]) -> String {
        let parts: Vec<String> = p
            .iter()
            .map(|x| x.as_ref().map_or("_".to_string(), |e| self.expr(e)))
            .collect();
        format!("({})", parts.join(","))
    }

    fn values(&self, vs: &[Expr]) -> String {
        let parts: Vec<String> = vs.iter().map(|e| self.expr(e)).collect();
        format!("({})", parts.join(", "))
    }

    fn check(&self, c: &ExistenceCheck) -> String {
        format!("{} IN {}", self.pattern(&c.pattern), self.rel(c.rel))
    }

    fn cond(&self, c: &Cond) -> String {
        match c {
            Cond::True => "TRUE".into(),
            Cond::Emptiness(r) => format!("({} = EMPTY)", self.rel(*r)),
            Cond::Exists(e) => format!("({})", self.check(e)),
            Cond::NotExists(e) => format!("(NOT {})", self.check(e)),
            Cond::Compare(op, l, r) => format!("({} {op} {})", self.expr(l), self.expr(r)),
            Cond::And(cs) => {
                let parts: Vec<String> = cs.iter().map(|c| self.cond(c)).collect();
                format!("({})", parts.join(" AND "))
            }
            Cond::Not(c) => format!("(NOT {})", self.cond(c)),
        }
    }

    fn index_clause(&self, var: TupleVar, pattern: &[Option<Expr>]) -> String {
        let parts: Vec<String> = pattern
            .iter()
            .enumerate()
            .filter_map(|(i, p)| {
                p.as_ref()
                    .map(|e| format!("{}[{i}] = {}", var_name(var), self.expr(e)))
            })
            .collect();
        if parts.is_empty() {
            String::new()
        } else {
            format!(" ON INDEX {}", parts.join(" AND "))
        }
    }

    fn op(&mut self, op: &Op, depth: usize) {
        match op {
            Op::Scan { rel, var, body } => {
                let l = format!("FOR {} IN {}", var_name(*var), self.rel(*rel));
                self.line(depth, &l);
                self.op(body, depth + 1);
            }
            Op::IndexScan {
                rel,
                var,
                pattern,
                body,
            } => {
                let l = format!(
                    "FOR {} IN {}{}",
                    var_name(*var),
                    self.rel(*rel),
                    self.index_clause(*var, pattern)
                );
                self.line(depth, &l);
                self.op(body, depth + 1);
            }
            Op::Filter { cond, body } => {
                let l = format!("IF {}", self.cond(cond));
                self.line(depth, &l);
                self.op(body, depth + 1);
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
                let mut l = format!("AGGREGATE {}[0] = {}", var_name(*result), func.to_string().to_uppercase());
                if let Some(c) = column {
                    write!(l, " {}[{c}]", var_name(*var)).unwrap();
                }
                write!(
                    l,
                    " FOR {} IN {}{}",
                    var_name(*var),
                    self.rel(*rel),
                    self.index_clause(*var, pattern)
                )
                .unwrap();
                if *filter != Cond::True {
                    write!(l, " WHERE {}", self.cond(filter)).unwrap();
                }
                self.line(depth, &l);
                self.op(body, depth + 1);
            }
            Op::Insert { rel, values } => {
                let l = format!("INSERT {} INTO {}", self.values(values), self.rel(*rel));
                self.line(depth, &l);
            }
            Op::GuardedInsert { rel, values, checks } => {
                let guards: Vec<String> = checks
                    .iter()
                    .map(|c| format!("(NOT {})", self.check(c)))
                    .collect();
                let l = format!("IF {}", guards.join(" AND "));
                self.line(depth, &l);
                let l = format!("INSERT {} INTO {}", self.values(values), self.rel(*rel));
                self.line(depth + 1, &l);
            }
        }
    }

    fn stmt(&mut self, s: &Stmt, depth: usize) {
        match s {
            Stmt::Sequence(ss) => {
                for s in ss {
                    self.stmt(s, depth);
                }
            }
            Stmt::Loop(body) => {
                self.line(depth, "LOOP");
                self.stmt(body, depth + 1);
                self.line(depth, "END LOOP");
            }
            Stmt::Exit(c) => {
                let l = format!("BREAK IF {}", self.cond(c));
                self.line(depth, &l);
            }
            Stmt::Query(op) => self.op(op, depth),
            Stmt::Merge { src, dst } => {
                let l = format!("MERGE {} INTO {}", self.rel(*src), self.rel(*dst));
                self.line(depth, &l);
            }
            Stmt::Swap(a, b) => {
                let l = format!("SWAP ({}, {})", self.rel(*a), self.rel(*b));
                self.line(depth, &l);
            }
            Stmt::Clear(r) => {
                let l = format!("CLEAR {}", self.rel(*r));
                self.line(depth, &l);
            }
            Stmt::ReadInput(r) => {
                let l = format!("READ INPUT INTO {}", self.rel(*r));
                self.line(depth, &l);
            }
            Stmt::WriteOutput(r) => {
                let l = format!("WRITE OUTPUT {}", self.rel(*r));
                self.line(depth, &l);
            }
        }
    }
}

impl fmt::Display for RamProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut p = Printer {
            prog: self,
            out: String::new(),
        };
        p.stmt(&self.main, 0);
        f.write_str(&p.out)
    }
}
