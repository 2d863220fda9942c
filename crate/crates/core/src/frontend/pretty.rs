//! Renders a [`Program`] back into dialect source that re-parses to the same tree.

use std::fmt::{self, Display, Formatter, Write};

use crate::ast::*;

pub fn pretty_print(program: &Program) -> String {
    program.to_string()
}

fn write_sym(f: &mut Formatter<'_>, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        if c == '"' {
            f.write_str("\\\"")?;
        } else {
            f.write_char(c)?;
        }
    }
    f.write_char('"')
}

impl Display for Term {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Sym(s) => write_sym(f, s),
            Term::Num(n) => write!(f, "{n}"),
            Term::Counter => f.write_char('$'),
            Term::Wildcard => f.write_char('_'),
            Term::Binary(op, l, r) => {
                write!(f, "{l} {op} ")?;
                if matches!(**r, Term::Binary(..)) {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
        }
    }
}

impl Display for Atom {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_char(')')
    }
}

fn write_conj(f: &mut Formatter<'_>, lits: &[Literal]) -> fmt::Result {
    for (i, l) in lits.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{l}")?;
    }
    Ok(())
}

impl Display for Literal {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Positive(a) => write!(f, "{a}"),
            Literal::Negated(a) => write!(f, "!{a}"),
            Literal::Compare { op, lhs, rhs } => write!(f, "{lhs} {op} {rhs}"),
            Literal::Aggregate(agg) => {
                write!(f, "{} = {}", agg.result, agg.func)?;
                if let Some(v) = &agg.value {
                    write!(f, " {v}")?;
                }
                write!(f, " : {}", agg.target)
            }
            Literal::Choice { domain, dependent } => {
                write!(f, "choice(({}), ({}))", domain.join(", "), dependent.join(", "))
            }
            Literal::Disjunction(branches) => {
                f.write_char('(')?;
                for (i, b) in branches.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ; ")?;
                    }
                    f.write_char('(')?;
                    write_conj(f, b)?;
                    f.write_char(')')?;
                }
                f.write_char(')')
            }
        }
    }
}

impl Display for Rule {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        write_conj(f, &self.body)?;
        f.write_char('.')
    }
}

impl Display for RelationDecl {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, ".decl {}(", self.name)?;
        for (i, a) in self.attrs.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}:{}", a.name, a.ty)?;
        }
        f.write_char(')')?;
        for (i, d) in self.choice_domains.iter().enumerate() {
            f.write_str(if i == 0 { " choice-domain " } else { ", " })?;
            if d.attrs.len() == 1 {
                f.write_str(&d.attrs[0])?;
            } else {
                write!(f, "({})", d.attrs.join(", "))?;
            }
        }
        Ok(())
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for d in &self.decls {
            writeln!(f, "{d}")?;
        }
        for io in &self.io {
            let kw = match io.kind {
                IoKind::Input => "input",
                IoKind::Output => "output",
            };
            writeln!(f, ".{kw} {}", io.relation)?;
        }
        for fact in &self.facts {
            writeln!(f, "{}.", fact.atom)?;
        }
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}
