//! Surface syntax of the Datalog dialect.
//!
//! The tree produced by the parser is consumed by the semantic passes, the
//! rule-choice rewriter and the RAM lowering. Nothing here evaluates anything.

use std::fmt;

/// Source position (1-based line and column).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttrType {
    Symbol,
    Number,
}

impl fmt::Display for AttrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrType::Symbol => f.write_str("symbol"),
            AttrType::Number => f.write_str("number"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub ty: AttrType,
}

impl Attribute {
    pub fn new(name: impl Into<String>, ty: AttrType) -> Self {
        Attribute { name: name.into(), ty }
    }
}

/// A set of 0-based attribute positions on which a relation is functional.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChoiceDomain {
    positions: Vec<usize>,
}

impl ChoiceDomain {
    /// Builds a domain from positions in any order. Duplicates are collapsed.
    pub fn new(positions: impl IntoIterator<Item = usize>) -> Self {
        let mut positions: Vec<usize> = positions.into_iter().collect();
        positions.sort_unstable();
        positions.dedup();
        ChoiceDomain { positions }
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn contains(&self, pos: usize) -> bool {
        self.positions.binary_search(&pos).is_ok()
    }

    pub fn is_subset_of(&self, other: &ChoiceDomain) -> bool {
        self.positions.iter().all(|p| other.contains(*p))
    }
}

/// A choice domain as written in a declaration: attribute names, unresolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainSpec {
    pub attrs: Vec<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationDecl {
    pub name: String,
    pub attrs: Vec<Attribute>,
    pub choice_domains: Vec<DomainSpec>,
    pub span: Span,
}

impl RelationDecl {
    pub fn new(name: impl Into<String>, attrs: Vec<Attribute>) -> Self {
        RelationDecl {
            name: name.into(),
            attrs,
            choice_domains: Vec::new(),
            span: Span::default(),
        }
    }

    pub fn arity(&self) -> usize {
        self.attrs.len()
    }

    pub fn attr_position(&self, name: &str) -> Option<usize> {
        self.attrs.iter().position(|a| a.name == name)
    }

    /// Resolves the written domains to positions. Unknown attribute names are
    /// reported by the semantic checks; here they are simply skipped.
    pub fn domain_positions(&self) -> Vec<ChoiceDomain> {
        self.choice_domains
            .iter()
            .map(|d| ChoiceDomain::new(d.attrs.iter().filter_map(|a| self.attr_position(a))))
            .collect()
    }
}

/// Number of attributes of a declared relation.
pub fn arity(decl: &RelationDecl) -> usize {
    decl.arity()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
}

impl fmt::Display for ArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Sym(String),
    Num(i64),
    /// The global counter `$`.
    Counter,
    Wildcard,
    Binary(ArithOp, Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn sym(s: impl Into<String>) -> Self {
        Term::Sym(s.into())
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Term::Sym(_) | Term::Num(_))
    }

    /// Variables in left-to-right order, with repeats.
    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Term::Var(v) => out.push(v),
            Term::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            _ => {}
        }
    }

    pub fn contains_counter(&self) -> bool {
        match self {
            Term::Counter => true,
            Term::Binary(_, l, r) => l.contains_counter() || r.contains_counter(),
            _ => false,
        }
    }

    pub fn contains_wildcard(&self) -> bool {
        match self {
            Term::Wildcard => true,
            Term::Binary(_, l, r) => l.contains_wildcard() || r.contains_wildcard(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub relation: String,
    pub args: Vec<Term>,
    pub span: Span,
}

impl Atom {
    pub fn new(relation: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            relation: relation.into(),
            args,
            span: Span::default(),
        }
    }

    pub fn vars(&self) -> Vec<&str> {
        self.args.iter().flat_map(|t| t.vars()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregateFn {
    Count,
    Min,
    Max,
}

impl fmt::Display for AggregateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregateFn::Count => "count",
            AggregateFn::Min => "min",
            AggregateFn::Max => "max",
        })
    }
}

/// `result = func [value] : target`.
///
/// Variables of `target` that also occur elsewhere in the rule are bound from
/// the enclosing body; the remaining ones are local to the aggregate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregate {
    pub func: AggregateFn,
    /// Aggregated variable for `min`/`max`; `None` for `count`.
    pub value: Option<String>,
    pub target: Atom,
    pub result: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Literal {
    Positive(Atom),
    Negated(Atom),
    Compare { op: CmpOp, lhs: Term, rhs: Term },
    Aggregate(Aggregate),
    /// Rule-level choice goal `choice((D...), (Z...))`.
    Choice { domain: Vec<String>, dependent: Vec<String> },
    Disjunction(Vec<Vec<Literal>>),
}

impl Literal {
    pub fn positive_atom(&self) -> Option<&Atom> {
        match self {
            Literal::Positive(a) => Some(a),
            _ => None,
        }
    }

    pub fn has_disjunction(&self) -> bool {
        matches!(self, Literal::Disjunction(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Literal>,
    pub span: Span,
}

impl Rule {
    pub fn new(head: Atom, body: Vec<Literal>) -> Self {
        Rule {
            head,
            body,
            span: Span::default(),
        }
    }

    /// Relations referenced by body literals, including those nested in
    /// disjunctions and aggregates.
    pub fn body_relations(&self) -> Vec<&str> {
        fn walk<'a>(lits: &'a [Literal], out: &mut Vec<&'a str>) {
            for lit in lits {
                match lit {
                    Literal::Positive(a) | Literal::Negated(a) => out.push(&a.relation),
                    Literal::Aggregate(agg) => out.push(&agg.target.relation),
                    Literal::Disjunction(branches) => {
                        for b in branches {
                            walk(b, out);
                        }
                    }
                    _ => {}
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.body, &mut out);
        out
    }

    pub fn has_choice_goal(&self) -> bool {
        self.body.iter().any(|l| matches!(l, Literal::Choice { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fact {
    pub atom: Atom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IoKind {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IoDirective {
    pub relation: String,
    pub kind: IoKind,
    pub span: Span,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub decls: Vec<RelationDecl>,
    pub facts: Vec<Fact>,
    pub rules: Vec<Rule>,
    pub io: Vec<IoDirective>,
}

impl Program {
    pub fn decl(&self, name: &str) -> Option<&RelationDecl> {
        self.decls.iter().find(|d| d.name == name)
    }

    pub fn is_input(&self, name: &str) -> bool {
        self.io
            .iter()
            .any(|d| d.kind == IoKind::Input && d.relation == name)
    }

    pub fn is_output(&self, name: &str) -> bool {
        self.io
            .iter()
            .any(|d| d.kind == IoKind::Output && d.relation == name)
    }

    /// Number of clauses (facts plus rules) as written.
    pub fn clause_count(&self) -> usize {
        self.facts.len() + self.rules.len()
    }

    /// Copy of the program with every span reset, for structural comparison.
    pub fn without_spans(&self) -> Program {
        fn atom(a: &Atom) -> Atom {
            Atom {
                span: Span::default(),
                ..a.clone()
            }
        }
        fn lits(ls: &[Literal]) -> Vec<Literal> {
            ls.iter()
                .map(|l| match l {
                    Literal::Positive(a) => Literal::Positive(atom(a)),
                    Literal::Negated(a) => Literal::Negated(atom(a)),
                    Literal::Aggregate(agg) => Literal::Aggregate(Aggregate {
                        target: atom(&agg.target),
                        ..agg.clone()
                    }),
                    Literal::Disjunction(bs) => {
                        Literal::Disjunction(bs.iter().map(|b| lits(b)).collect())
                    }
                    other => other.clone(),
                })
                .collect()
        }
        Program {
            decls: self
                .decls
                .iter()
                .map(|d| RelationDecl {
                    span: Span::default(),
                    choice_domains: d
                        .choice_domains
                        .iter()
                        .map(|c| DomainSpec {
                            span: Span::default(),
                            ..c.clone()
                        })
                        .collect(),
                    ..d.clone()
                })
                .collect(),
            facts: self
                .facts
                .iter()
                .map(|f| Fact { atom: atom(&f.atom) })
                .collect(),
            rules: self
                .rules
                .iter()
                .map(|r| Rule {
                    head: atom(&r.head),
                    body: lits(&r.body),
                    span: Span::default(),
                })
                .collect(),
            io: self
                .io
                .iter()
                .map(|d| IoDirective {
                    span: Span::default(),
                    ..d.clone()
                })
                .collect(),
        }
    }
}
