//! Static checks and the transformations that prepare a parsed program for
//! lowering.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet, VecDeque};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use thiserror::Error;

use crate::ast::*;
use crate::diag::Diagnostic;
use crate::storage::SymbolTable;

pub const RESERVED_INFIX: &str = "__choice_";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleStep {
    pub relation: String,
    /// Whether the edge into this step goes through negation or aggregation.
    pub negative: bool,
}

fn render_cycle(cycle: &[CycleStep]) -> String {
    let mut s = String::new();
    for (i, step) in cycle.iter().enumerate() {
        if i > 0 {
            s.push_str(" -> ");
        }
        if step.negative {
            s.push('!');
        }
        s.push_str(&step.relation);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticError {
    #[error("relation `{relation}` has no attribute `{attr}`")]
    UnknownAttribute {
        relation: String,
        attr: String,
        span: Span,
    },
    #[error("attribute `{attr}` appears more than once in a choice domain of `{relation}`")]
    DuplicateAttributeInDomain {
        relation: String,
        attr: String,
        span: Span,
    },
    #[error("relation `{relation}` is declared more than once")]
    DuplicateDeclaration { relation: String, span: Span },
    #[error("attribute `{attr}` is declared more than once on `{relation}`")]
    DuplicateAttribute {
        relation: String,
        attr: String,
        span: Span,
    },
    #[error("relation `{relation}` is not declared")]
    UndeclaredRelation { relation: String, span: Span },
    #[error("relation `{relation}` has arity {expected} but is used with {found} arguments")]
    ArityMismatch {
        relation: String,
        expected: usize,
        found: usize,
        span: Span,
    },
    #[error("identifier `{name}` contains the reserved sequence `__choice_`")]
    ReservedName { name: String, span: Span },
    #[error("input relation `{relation}` cannot be defined by rules or facts")]
    InputRelationDefined { relation: String, span: Span },
    #[error("`$` may only appear in rule heads")]
    CounterOutsideHead { span: Span },
    #[error("`_` may not appear in a rule head")]
    WildcardInHead { span: Span },
    #[error("`_` may not appear in a comparison")]
    WildcardInComparison { span: Span },
    #[error("aggregate arguments must be variables, constants or `_`")]
    ComplexAggregateArgument { span: Span },
    #[error("choice goal must be desugared before evaluation")]
    UnloweredChoiceGoal { span: Span },
    #[error("variable `{var}` is not grounded in `{rule}`")]
    UngroundedVariable { rule: String, var: String, span: Span },
    #[error("type mismatch: {message}")]
    TypeMismatch { message: String, span: Span },
    #[error("negation or aggregation through recursion: {}", render_cycle(.cycle))]
    CycleError { cycle: Vec<CycleStep>, span: Span },
}

impl SemanticError {
    pub fn code(&self) -> &'static str {
        match self {
            SemanticError::UnknownAttribute { .. } => "UnknownAttribute",
            SemanticError::DuplicateAttributeInDomain { .. } => "DuplicateAttributeInDomain",
            SemanticError::DuplicateDeclaration { .. } => "DuplicateDeclaration",
            SemanticError::DuplicateAttribute { .. } => "DuplicateAttribute",
            SemanticError::UndeclaredRelation { .. } => "UndeclaredRelation",
            SemanticError::ArityMismatch { .. } => "ArityMismatch",
            SemanticError::ReservedName { .. } => "ReservedName",
            SemanticError::InputRelationDefined { .. } => "InputRelationDefined",
            SemanticError::CounterOutsideHead { .. } => "CounterOutsideHead",
            SemanticError::WildcardInHead { .. } => "WildcardInHead",
            SemanticError::WildcardInComparison { .. } => "WildcardInComparison",
            SemanticError::ComplexAggregateArgument { .. } => "ComplexAggregateArgument",
            SemanticError::UnloweredChoiceGoal { .. } => "UnloweredChoiceGoal",
            SemanticError::UngroundedVariable { .. } => "UngroundedVariable",
            SemanticError::TypeMismatch { .. } => "TypeMismatch",
            SemanticError::CycleError { .. } => "CycleError",
        }
    }

    pub fn span(&self) -> Span {
        match self {
            SemanticError::UnknownAttribute { span, .. }
            | SemanticError::DuplicateAttributeInDomain { span, .. }
            | SemanticError::DuplicateDeclaration { span, .. }
            | SemanticError::DuplicateAttribute { span, .. }
            | SemanticError::UndeclaredRelation { span, .. }
            | SemanticError::ArityMismatch { span, .. }
            | SemanticError::ReservedName { span, .. }
            | SemanticError::InputRelationDefined { span, .. }
            | SemanticError::CounterOutsideHead { span }
            | SemanticError::WildcardInHead { span }
            | SemanticError::WildcardInComparison { span }
            | SemanticError::ComplexAggregateArgument { span }
            | SemanticError::UnloweredChoiceGoal { span }
            | SemanticError::UngroundedVariable { span, .. }
            | SemanticError::TypeMismatch { span, .. }
            | SemanticError::CycleError { span, .. } => *span,
        }
    }
}

impl From<SemanticError> for Diagnostic {
    fn from(e: SemanticError) -> Self {
        let span = e.span();
        Diagnostic::new(
            (span != Span::default()).then_some(span),
            e.code(),
            e.to_string(),
        )
    }
}

/// Which program shape is being validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// As written: choice goals allowed, reserved names rejected.
    Source,
    /// After the rule-choice rewrite: choice goals must be gone.
    Desugared,
}

/// Choice domains name existing attributes, each at most once.
pub fn check_choice_domains(program: &Program) -> Result<(), Vec<SemanticError>> {
    let mut errors = Vec::new();
    for decl in &program.decls {
        for dom in &decl.choice_domains {
            let mut seen = HashSet::new();
            for attr in &dom.attrs {
                if decl.attr_position(attr).is_none() {
                    errors.push(SemanticError::UnknownAttribute {
                        relation: decl.name.clone(),
                        attr: attr.clone(),
                        span: dom.span,
                    });
                } else if !seen.insert(attr) {
                    errors.push(SemanticError::DuplicateAttributeInDomain {
                        relation: decl.name.clone(),
                        attr: attr.clone(),
                        span: dom.span,
                    });
                }
            }
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// Drops every domain implied by another one: a functional dependency on `D1`
/// implies one on any superset of `D1`. Keeps first-occurrence order.
pub fn reduce_redundant_domains(domains: &[ChoiceDomain]) -> Vec<ChoiceDomain> {
    let mut out: Vec<ChoiceDomain> = Vec::new();
    for (i, d) in domains.iter().enumerate() {
        if out.contains(d) {
            continue;
        }
        let implied = domains
            .iter()
            .enumerate()
            .any(|(j, other)| j != i && other != d && other.is_subset_of(d));
        if !implied {
            out.push(d.clone());
        }
    }
    out
}

/// Structural validation of declarations, atoms and directives.
pub fn check_program(program: &Program, phase: Phase) -> Result<(), Vec<SemanticError>> {
    let mut errors = Vec::new();
    let mut decls: HashMap<&str, &RelationDecl> = HashMap::new();
    for decl in &program.decls {
        if phase == Phase::Source && decl.name.contains(RESERVED_INFIX) {
            errors.push(SemanticError::ReservedName {
                name: decl.name.clone(),
                span: decl.span,
            });
        }
        if decls.insert(&decl.name, decl).is_some() {
            errors.push(SemanticError::DuplicateDeclaration {
                relation: decl.name.clone(),
                span: decl.span,
            });
        }
        let mut names = HashSet::new();
        for a in &decl.attrs {
            if !names.insert(&a.name) {
                errors.push(SemanticError::DuplicateAttribute {
                    relation: decl.name.clone(),
                    attr: a.name.clone(),
                    span: decl.span,
                });
            }
        }
    }
    if let Err(e) = check_choice_domains(program) {
        errors.extend(e);
    }

    let mut check_atom = |atom: &Atom, errors: &mut Vec<SemanticError>| match decls
        .get(atom.relation.as_str())
    {
        None => errors.push(SemanticError::UndeclaredRelation {
            relation: atom.relation.clone(),
            span: atom.span,
        }),
        Some(d) if d.arity() != atom.args.len() => errors.push(SemanticError::ArityMismatch {
            relation: atom.relation.clone(),
            expected: d.arity(),
            found: atom.args.len(),
            span: atom.span,
        }),
        Some(_) => {}
    };

    for io in &program.io {
        if !decls.contains_key(io.relation.as_str()) {
            errors.push(SemanticError::UndeclaredRelation {
                relation: io.relation.clone(),
                span: io.span,
            });
        }
    }
    for fact in &program.facts {
        check_atom(&fact.atom, &mut errors);
        if program.is_input(&fact.atom.relation) {
            errors.push(SemanticError::InputRelationDefined {
                relation: fact.atom.relation.clone(),
                span: fact.atom.span,
            });
        }
    }
    for rule in &program.rules {
        check_atom(&rule.head, &mut errors);
        if program.is_input(&rule.head.relation) {
            errors.push(SemanticError::InputRelationDefined {
                relation: rule.head.relation.clone(),
                span: rule.head.span,
            });
        }
        if rule.head.args.iter().any(Term::contains_wildcard) {
            errors.push(SemanticError::WildcardInHead {
                span: rule.head.span,
            });
        }
        check_body(&rule.body, rule, phase, &mut check_atom, &mut errors);
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

fn check_body(
    body: &[Literal],
    rule: &Rule,
    phase: Phase,
    check_atom: &mut impl FnMut(&Atom, &mut Vec<SemanticError>),
    errors: &mut Vec<SemanticError>,
) {
    for lit in body {
        match lit {
            Literal::Positive(a) | Literal::Negated(a) => {
                check_atom(a, errors);
                if a.args.iter().any(Term::contains_counter) {
                    errors.push(SemanticError::CounterOutsideHead { span: a.span });
                }
            }
            Literal::Compare { lhs, rhs, .. } => {
                if lhs.contains_counter() || rhs.contains_counter() {
                    errors.push(SemanticError::CounterOutsideHead { span: rule.span });
                }
                if lhs.contains_wildcard() || rhs.contains_wildcard() {
                    errors.push(SemanticError::WildcardInComparison { span: rule.span });
                }
            }
            Literal::Aggregate(agg) => {
                check_atom(&agg.target, errors);
                if agg
                    .target
                    .args
                    .iter()
                    .any(|t| matches!(t, Term::Binary(..) | Term::Counter))
                {
                    errors.push(SemanticError::ComplexAggregateArgument {
                        span: agg.target.span,
                    });
                }
            }
            Literal::Choice { .. } => {
                if phase == Phase::Desugared {
                    errors.push(SemanticError::UnloweredChoiceGoal { span: rule.span });
                }
            }
            Literal::Disjunction(branches) => {
                for b in branches {
                    check_body(b, rule, phase, check_atom, errors);
                }
            }
        }
    }
}

/// Expands every disjunction into one rule per combination of branches.
pub fn normalize(program: &Program) -> Program {
    let mut out = program.clone();
    out.rules = program
        .rules
        .iter()
        .flat_map(|r| {
            expand(&r.body).into_iter().map(move |body| Rule {
                head: r.head.clone(),
                body,
                span: r.span,
            })
        })
        .collect();
    out
}

fn expand(body: &[Literal]) -> Vec<Vec<Literal>> {
    let mut acc: Vec<Vec<Literal>> = vec![Vec::new()];
    for lit in body {
        match lit {
            Literal::Disjunction(branches) => {
                let alternatives: Vec<Vec<Literal>> =
                    branches.iter().flat_map(|b| expand(b)).collect();
                acc = acc
                    .iter()
                    .flat_map(|prefix| {
                        alternatives.iter().map(move |alt| {
                            let mut v = prefix.clone();
                            v.extend(alt.iter().cloned());
                            v
                        })
                    })
                    .collect();
            }
            other => acc.iter_mut().for_each(|v| v.push(other.clone())),
        }
    }
    acc
}

/// Variables of an aggregate's target that are shared with the rest of the rule.
pub fn correlated_vars(rule: &Rule, agg_index: usize) -> Vec<String> {
    let Literal::Aggregate(agg) = &rule.body[agg_index] else {
        return Vec::new();
    };
    let mut outside: HashSet<&str> = rule.head.vars().into_iter().collect();
    for (i, lit) in rule.body.iter().enumerate() {
        if i != agg_index {
            outside.extend(literal_vars(lit));
        }
    }
    let mut out = Vec::new();
    for v in agg.target.vars() {
        if Some(v) != agg.value.as_deref() && outside.contains(v) && !out.iter().any(|o| o == v) {
            out.push(v.to_string());
        }
    }
    out
}

/// All variables mentioned by a literal, including an aggregate's result.
pub fn literal_vars(lit: &Literal) -> Vec<&str> {
    match lit {
        Literal::Positive(a) | Literal::Negated(a) => a.vars(),
        Literal::Compare { lhs, rhs, .. } => {
            let mut v = lhs.vars();
            v.extend(rhs.vars());
            v
        }
        Literal::Aggregate(agg) => {
            let mut v = agg.target.vars();
            v.push(&agg.result);
            v
        }
        Literal::Choice { domain, dependent } => domain
            .iter()
            .chain(dependent.iter())
            .map(String::as_str)
            .collect(),
        Literal::Disjunction(bs) => bs.iter().flatten().flat_map(literal_vars).collect(),
    }
}

/// Variables bound by the body of a normalized rule.
pub fn grounded_vars(rule: &Rule) -> HashSet<String> {
    let mut bound: HashSet<String> = HashSet::new();
    for lit in &rule.body {
        if let Literal::Positive(a) = lit {
            for t in &a.args {
                if let Term::Var(v) = t {
                    bound.insert(v.clone());
                }
            }
        }
    }
    let all_bound = |t: &Term, bound: &HashSet<String>| t.vars().iter().all(|v| bound.contains(*v));
    loop {
        let before = bound.len();
        for (i, lit) in rule.body.iter().enumerate() {
            match lit {
                Literal::Compare {
                    op: CmpOp::Eq,
                    lhs,
                    rhs,
                } => {
                    if let Term::Var(v) = lhs {
                        if all_bound(rhs, &bound) {
                            bound.insert(v.clone());
                        }
                    }
                    if let Term::Var(v) = rhs {
                        if all_bound(lhs, &bound) {
                            bound.insert(v.clone());
                        }
                    }
                }
                Literal::Aggregate(agg)
                    if correlated_vars(rule, i).iter().all(|v| bound.contains(v)) => {
                        bound.insert(agg.result.clone());
                    }
                _ => {}
            }
        }
        if bound.len() == before {
            return bound;
        }
    }
}

/// Every variable in a head, negated atom, comparison, computed argument or
/// correlated aggregate position is bound by the body.
pub fn check_groundedness(program: &Program) -> Result<(), Vec<SemanticError>> {
    let mut errors = Vec::new();
    for rule in &program.rules {
        let bound = grounded_vars(rule);
        let mut needed: Vec<(&str, Span)> = Vec::new();
        needed.extend(rule.head.vars().into_iter().map(|v| (v, rule.head.span)));
        for (i, lit) in rule.body.iter().enumerate() {
            match lit {
                Literal::Positive(a) => {
                    for t in &a.args {
                        if matches!(t, Term::Binary(..)) {
                            needed.extend(t.vars().into_iter().map(|v| (v, a.span)));
                        }
                    }
                }
                Literal::Negated(a) => needed.extend(a.vars().into_iter().map(|v| (v, a.span))),
                Literal::Compare { .. } => {
                    needed.extend(literal_vars(lit).into_iter().map(|v| (v, rule.span)))
                }
                Literal::Aggregate(agg) => {
                    let span = agg.target.span;
                    for v in correlated_vars(rule, i) {
                        if !bound.contains(&v) {
                            errors.push(SemanticError::UngroundedVariable {
                                rule: rule.to_string(),
                                var: v,
                                span,
                            });
                        }
                    }
                }
                Literal::Choice { .. } | Literal::Disjunction(_) => {}
            }
        }
        let mut reported = HashSet::new();
        for (v, span) in needed {
            if !bound.contains(v) && reported.insert(v) {
                errors.push(SemanticError::UngroundedVariable {
                    rule: rule.to_string(),
                    var: v.to_string(),
                    span,
                });
            }
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// Infers a type for each variable of a normalized rule. Conflicts are errors.
pub fn infer_var_types(
    rule: &Rule,
    program: &Program,
) -> Result<HashMap<String, AttrType>, SemanticError> {
    let mut types: HashMap<String, AttrType> = HashMap::new();
    let mismatch = |message: String| SemanticError::TypeMismatch {
        message,
        span: rule.span,
    };
    let assign = |types: &mut HashMap<String, AttrType>, v: &str, ty: AttrType| {
        match types.get(v) {
            Some(&t) if t != ty => Err(mismatch(format!(
                "variable `{v}` is used both as {t} and as {ty}"
            ))),
            _ => {
                types.insert(v.to_string(), ty);
                Ok(())
            }
        }
    };
    let atom_types = |atom: &Atom| -> Vec<AttrType> {
        program
            .decl(&atom.relation)
            .map(|d| d.attrs.iter().map(|a| a.ty).collect())
            .unwrap_or_default()
    };
    for lit in &rule.body {
        match lit {
            Literal::Positive(a) | Literal::Negated(a) => {
                for (t, ty) in a.args.iter().zip(atom_types(a)) {
                    if let Term::Var(v) = t {
                        assign(&mut types, v, ty)?;
                    }
                }
            }
            Literal::Aggregate(agg) => {
                let tys = atom_types(&agg.target);
                for (t, &ty) in agg.target.args.iter().zip(&tys) {
                    if let Term::Var(v) = t {
                        assign(&mut types, v, ty)?;
                    }
                }
                assign(&mut types, &agg.result, AttrType::Number)?;
            }
            _ => {}
        }
    }
    for (t, ty) in rule.head.args.iter().zip(atom_types(&rule.head)) {
        if let Term::Var(v) = t {
            assign(&mut types, v, ty)?;
        }
    }
    // Arithmetic and equality chains.
    loop {
        let before = types.len();
        for lit in &rule.body {
            if let Literal::Compare { lhs, rhs, .. } = lit {
                for t in [lhs, rhs] {
                    if matches!(t, Term::Binary(..)) {
                        for v in t.vars() {
                            assign(&mut types, v, AttrType::Number)?;
                        }
                    }
                }
                let lt = term_type(lhs, &types);
                let rt = term_type(rhs, &types);
                match (lhs, rhs, lt, rt) {
                    (Term::Var(v), _, None, Some(t)) => assign(&mut types, v, t)?,
                    (_, Term::Var(v), Some(t), None) => assign(&mut types, v, t)?,
                    _ => {}
                }
            }
        }
        if types.len() == before {
            break;
        }
    }
    Ok(types)
}

fn term_type(t: &Term, types: &HashMap<String, AttrType>) -> Option<AttrType> {
    match t {
        Term::Var(v) => types.get(v).copied(),
        Term::Sym(_) => Some(AttrType::Symbol),
        Term::Num(_) | Term::Counter | Term::Binary(..) => Some(AttrType::Number),
        Term::Wildcard => None,
    }
}

/// Symbol and number values never meet: in atom arguments, arithmetic, and
/// comparisons.
pub fn check_types(program: &Program) -> Result<(), Vec<SemanticError>> {
    let mut errors = Vec::new();
    let check_args = |atom: &Atom,
                      types: &HashMap<String, AttrType>,
                      span: Span,
                      errors: &mut Vec<SemanticError>| {
        let Some(decl) = program.decl(&atom.relation) else {
            return;
        };
        for (t, a) in atom.args.iter().zip(&decl.attrs) {
            if let Some(ty) = term_type(t, types) {
                if ty != a.ty {
                    errors.push(SemanticError::TypeMismatch {
                        message: format!(
                            "argument `{t}` of `{}` should be {} but is {ty}",
                            atom.relation, a.ty
                        ),
                        span,
                    });
                }
            }
        }
    };
    let empty = HashMap::new();
    for fact in &program.facts {
        check_args(&fact.atom, &empty, fact.atom.span, &mut errors);
    }
    for rule in &program.rules {
        let types = match infer_var_types(rule, program) {
            Ok(t) => t,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        check_args(&rule.head, &types, rule.head.span, &mut errors);
        for lit in &rule.body {
            match lit {
                Literal::Positive(a) | Literal::Negated(a) => {
                    check_args(a, &types, a.span, &mut errors)
                }
                Literal::Aggregate(agg) => {
                    check_args(&agg.target, &types, agg.target.span, &mut errors);
                    if let Some(v) = &agg.value {
                        if types.get(v) == Some(&AttrType::Symbol) {
                            errors.push(SemanticError::TypeMismatch {
                                message: format!("`{}` over symbol variable `{v}`", agg.func),
                                span: agg.target.span,
                            });
                        }
                    }
                }
                Literal::Compare { lhs, rhs, .. } => {
                    if let (Some(l), Some(r)) = (term_type(lhs, &types), term_type(rhs, &types)) {
                        if l != r {
                            errors.push(SemanticError::TypeMismatch {
                                message: format!("cannot compare {l} `{lhs}` with {r} `{rhs}`"),
                                span: rule.span,
                            });
                        }
                    }
                }
                _ => {}
            }
        }
        let mut arith_symbol = false;
        let mut visit = |t: &Term| {
            if let Term::Binary(..) = t {
                if t.vars().iter().any(|v| types.get(*v) == Some(&AttrType::Symbol))
                    || contains_sym(t)
                {
                    arith_symbol = true;
                }
            }
        };
        rule.head.args.iter().for_each(&mut visit);
        for lit in &rule.body {
            match lit {
                Literal::Positive(a) | Literal::Negated(a) => a.args.iter().for_each(&mut visit),
                Literal::Compare { lhs, rhs, .. } => {
                    visit(lhs);
                    visit(rhs);
                }
                _ => {}
            }
        }
        if arith_symbol {
            errors.push(SemanticError::TypeMismatch {
                message: "arithmetic on a symbol".into(),
                span: rule.span,
            });
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

fn contains_sym(t: &Term) -> bool {
    match t {
        Term::Sym(_) => true,
        Term::Binary(_, l, r) => contains_sym(l) || contains_sym(r),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratum {
    /// Relations defined here, in declaration order.
    pub relations: Vec<String>,
    /// Rules whose head is in `relations`, in program order.
    pub rules: Vec<Rule>,
    /// Some rule reads a relation of this stratum positively.
    pub recursive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratifiedProgram {
    pub decls: Vec<RelationDecl>,
    pub facts: Vec<Fact>,
    pub io: Vec<IoDirective>,
    pub strata: Vec<Stratum>,
    /// Every symbol constant of the program, interned in order of appearance.
    pub symbols: SymbolTable,
}

impl StratifiedProgram {
    pub fn decl(&self, name: &str) -> Option<&RelationDecl> {
        self.decls.iter().find(|d| d.name == name)
    }

    pub fn stratum_of(&self, relation: &str) -> Option<usize> {
        self.strata
            .iter()
            .position(|s| s.relations.iter().any(|r| r == relation))
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
}

impl fmt::Display for StratifiedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.strata.iter().enumerate() {
            writeln!(
                f,
                "stratum {i}{}: {}",
                if s.recursive { " (recursive)" } else { "" },
                s.relations.join(", ")
            )?;
            for r in &s.rules {
                writeln!(f, "  {r}")?;
            }
        }
        Ok(())
    }
}

/// Partitions relations into strata so that negated and aggregated relations
/// are complete before use. Each relation gets a stratum; strata are ordered
/// topologically with ties broken by declaration order.
pub fn stratify(program: &Program) -> Result<StratifiedProgram, SemanticError> {
    let mut graph: DiGraph<usize, bool> = DiGraph::new();
    let nodes: Vec<NodeIndex> = (0..program.decls.len()).map(|i| graph.add_node(i)).collect();
    let index: HashMap<&str, usize> = program
        .decls
        .iter()
        .enumerate()
        .map(|(i, d)| (d.name.as_str(), i))
        .collect();
    // (from, to, negative, rule span)
    let mut edges: Vec<(usize, usize, bool, Span)> = Vec::new();
    for rule in &program.rules {
        let Some(&h) = index.get(rule.head.relation.as_str()) else {
            continue;
        };
        for lit in &rule.body {
            let (rel, negative) = match lit {
                Literal::Positive(a) => (&a.relation, false),
                Literal::Negated(a) => (&a.relation, true),
                Literal::Aggregate(agg) => (&agg.target.relation, true),
                _ => continue,
            };
            if let Some(&b) = index.get(rel.as_str()) {
                edges.push((b, h, negative, rule.span));
                graph.add_edge(nodes[b], nodes[h], negative);
            }
        }
    }

    let sccs = tarjan_scc(&graph);
    let mut comp = vec![0usize; nodes.len()];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (c, scc) in sccs.iter().enumerate() {
        let mut m: Vec<usize> = scc.iter().map(|n| graph[*n]).collect();
        m.sort_unstable();
        for &r in &m {
            comp[r] = c;
        }
        members.push(m);
    }

    for &(from, to, negative, span) in &edges {
        if negative && comp[from] == comp[to] {
            return Err(SemanticError::CycleError {
                cycle: cycle_through(program, &edges, &comp, from, to),
                span,
            });
        }
    }

    // Kahn's algorithm over the condensation, smallest declaration index first.
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); members.len()];
    let mut indegree = vec![0usize; members.len()];
    for &(from, to, _, _) in &edges {
        let (a, b) = (comp[from], comp[to]);
        if a != b && succ[a].insert(b) {
            indegree[b] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<(usize, usize)>> = BinaryHeap::new();
    for (c, m) in members.iter().enumerate() {
        if indegree[c] == 0 {
            ready.push(Reverse((m[0], c)));
        }
    }
    let mut order = Vec::new();
    while let Some(Reverse((_, c))) = ready.pop() {
        order.push(c);
        for &s in &succ[c] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(Reverse((members[s][0], s)));
            }
        }
    }

    let mut strata = Vec::new();
    for c in order {
        let rels: Vec<String> = members[c]
            .iter()
            .map(|&i| program.decls[i].name.clone())
            .collect();
        let rules: Vec<Rule> = program
            .rules
            .iter()
            .filter(|r| rels.contains(&r.head.relation))
            .cloned()
            .collect();
        let recursive = rules.iter().any(|r| {
            r.body.iter().any(|l| matches!(l, Literal::Positive(a) if rels.contains(&a.relation)))
        });
        strata.push(Stratum {
            relations: rels,
            rules,
            recursive,
        });
    }

    let mut symbols = SymbolTable::new();
    for fact in &program.facts {
        intern_atom(&fact.atom, &mut symbols);
    }
    for rule in &program.rules {
        intern_atom(&rule.head, &mut symbols);
        for lit in &rule.body {
            match lit {
                Literal::Positive(a) | Literal::Negated(a) => intern_atom(a, &mut symbols),
                Literal::Aggregate(agg) => intern_atom(&agg.target, &mut symbols),
                Literal::Compare { lhs, rhs, .. } => {
                    intern_term(lhs, &mut symbols);
                    intern_term(rhs, &mut symbols);
                }
                _ => {}
            }
        }
    }

    Ok(StratifiedProgram {
        decls: program.decls.clone(),
        facts: program.facts.clone(),
        io: program.io.clone(),
        strata,
        symbols,
    })
}

fn intern_atom(atom: &Atom, symbols: &mut SymbolTable) {
    atom.args.iter().for_each(|t| intern_term(t, symbols));
}

fn intern_term(t: &Term, symbols: &mut SymbolTable) {
    match t {
        Term::Sym(s) => {
            symbols.intern(s);
        }
        Term::Binary(_, l, r) => {
            intern_term(l, symbols);
            intern_term(r, symbols);
        }
        _ => {}
    }
}

/// The cycle closed by the negative edge `from -> to`: `from`, `!to`, then the
/// shortest path back to `from` inside the component.
fn cycle_through(
    program: &Program,
    edges: &[(usize, usize, bool, Span)],
    comp: &[usize],
    from: usize,
    to: usize,
) -> Vec<CycleStep> {
    let name = |i: usize| program.decls[i].name.clone();
    let mut cycle = vec![
        CycleStep {
            relation: name(from),
            negative: false,
        },
        CycleStep {
            relation: name(to),
            negative: true,
        },
    ];
    if from == to {
        return cycle;
    }
    let mut prev: HashMap<usize, (usize, bool)> = HashMap::new();
    let mut queue = VecDeque::from([to]);
    let mut seen = HashSet::from([to]);
    while let Some(n) = queue.pop_front() {
        if n == from {
            break;
        }
        for &(a, b, neg, _) in edges {
            if a == n && comp[b] == comp[from] && seen.insert(b) {
                prev.insert(b, (a, neg));
                queue.push_back(b);
            }
        }
    }
    let mut path = Vec::new();
    let mut cur = from;
    while cur != to {
        let Some(&(p, neg)) = prev.get(&cur) else {
            break;
        };
        path.push(CycleStep {
            relation: name(cur),
            negative: neg,
        });
        cur = p;
    }
    path.reverse();
    cycle.extend(path);
    cycle
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn errs(src: &str, phase: Phase) -> Vec<SemanticError> {
        check_program(&parse(src).unwrap(), phase).unwrap_err()
    }

    #[test]
    fn unknown_domain_attribute() {
        let e = errs(".decl A(x:number, y:number) choice-domain z", Phase::Source);
        assert!(matches!(&e[0], SemanticError::UnknownAttribute { relation, attr, .. }
            if relation == "A" && attr == "z"));
    }

    #[test]
    fn duplicate_domain_attribute() {
        let e = errs(".decl A(x:number, y:number) choice-domain (x,x)", Phase::Source);
        assert!(matches!(&e[0], SemanticError::DuplicateAttributeInDomain { .. }));
    }

    #[test]
    fn spanning_tree_program_is_valid() {
        let p = parse(crate::corpus::SPANNING_TREE).unwrap();
        assert!(check_choice_domains(&p).is_ok());
        assert!(check_program(&p, Phase::Desugared).is_ok());
    }

    #[test]
    fn reserved_names_and_unlowered_goals() {
        let e = errs(".decl a__choice_r1(x:number)", Phase::Source);
        assert!(matches!(&e[0], SemanticError::ReservedName { .. }));
        let src = ".decl a(x:number)\n.decl b(x:number)\na(x) :- b(x), choice((x),(x)).";
        assert!(check_program(&parse(src).unwrap(), Phase::Source).is_ok());
        let e = errs(src, Phase::Desugared);
        assert!(matches!(&e[0], SemanticError::UnloweredChoiceGoal { .. }));
    }

    #[test]
    fn undeclared_and_arity() {
        let e = errs(".decl a(x:number)\na(x) :- b(x).\na(1,2).", Phase::Source);
        assert!(e.iter().any(|e| matches!(e, SemanticError::UndeclaredRelation { relation, .. } if relation == "b")));
        assert!(e.iter().any(|e| matches!(e, SemanticError::ArityMismatch { expected: 1, found: 2, .. })));
    }

    #[test]
    fn input_relations_cannot_be_defined() {
        let e = errs(".decl a(x:number)\n.input a\na(1).", Phase::Source);
        assert!(matches!(&e[0], SemanticError::InputRelationDefined { .. }));
    }

    #[test]
    fn reduce_examples() {
        let d = |p: &[usize]| ChoiceDomain::new(p.iter().copied());
        assert_eq!(reduce_redundant_domains(&[d(&[0]), d(&[0, 2])]), vec![d(&[0])]);
        assert_eq!(reduce_redundant_domains(&[d(&[1])]), vec![d(&[1])]);
        assert_eq!(reduce_redundant_domains(&[d(&[0, 1]), d(&[0, 1])]), vec![d(&[0, 1])]);
        assert_eq!(
            reduce_redundant_domains(&[d(&[0, 2]), d(&[1]), d(&[0])]),
            vec![d(&[1]), d(&[0])]
        );
    }

    fn satisfies(rel: &[Vec<u8>], domains: &[ChoiceDomain]) -> bool {
        domains.iter().all(|d| {
            let mut seen = HashSet::new();
            rel.iter()
                .all(|t| seen.insert(d.positions().iter().map(|&p| t[p]).collect::<Vec<_>>()))
        })
    }

    /// FD satisfaction is decided pairwise, so checking every relation with at
    /// most two tuples is exhaustive for equivalence of domain lists.
    #[test]
    fn reduction_preserves_constraints_exhaustively() {
        for arity in 1..=3usize {
            let subsets: Vec<ChoiceDomain> = (1u32..(1 << arity))
                .map(|m| ChoiceDomain::new((0..arity).filter(|i| m & (1 << i) != 0)))
                .collect();
            let tuples: Vec<Vec<u8>> = (0..3usize.pow(arity as u32))
                .map(|mut n| {
                    (0..arity)
                        .map(|_| {
                            let v = (n % 3) as u8;
                            n /= 3;
                            v
                        })
                        .collect()
                })
                .collect();
            let mut lists: Vec<Vec<ChoiceDomain>> = vec![vec![]];
            for _ in 0..3 {
                let mut next = Vec::new();
                for l in &lists {
                    for s in &subsets {
                        let mut l2 = l.clone();
                        l2.push(s.clone());
                        next.push(l2);
                    }
                }
                lists.extend(next);
            }
            lists.sort();
            lists.dedup();
            for list in &lists {
                let reduced = reduce_redundant_domains(list);
                for (i, a) in tuples.iter().enumerate() {
                    for b in &tuples[i..] {
                        let rel = if a == b { vec![a.clone()] } else { vec![a.clone(), b.clone()] };
                        assert_eq!(
                            satisfies(&rel, list),
                            satisfies(&rel, &reduced),
                            "{list:?} vs {reduced:?} on {rel:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn normalize_disjunctions() {
        let p = parse(".decl node(x:symbol)\n.decl edge(x:symbol,y:symbol)\nnode(x) :- edge(x,_) ; edge(_,x).").unwrap();
        let n = normalize(&p);
        assert_eq!(n.rules.len(), 2);
        assert_eq!(n.rules[0].to_string(), "node(x) :- edge(x, _).");
        assert_eq!(n.rules[1].to_string(), "node(x) :- edge(_, x).");

        let p = parse("a(x) :- b(x).").unwrap();
        assert_eq!(normalize(&p), p);

        let p = parse("a(x) :- (b(x) ; c(x)), (d(x) ; e(x)).").unwrap();
        let n = normalize(&p);
        assert_eq!(n.rules.len(), 4);
        assert!(n.rules.iter().all(|r| r.body.len() == 2));

        let p = parse("a($) :- b(x) ; c(x).").unwrap();
        assert!(normalize(&p).rules.iter().all(|r| r.head.args == vec![Term::Counter]));
    }

    #[test]
    fn groundedness() {
        let check = |s: &str| check_groundedness(&parse(s).unwrap());
        let e = check("a(x) :- b(y).").unwrap_err();
        assert!(matches!(&e[0], SemanticError::UngroundedVariable { var, .. } if var == "x"));
        assert!(check("st(v,u) :- st(_, v), edge(v,u).").is_ok());
        assert!(check("a(x) :- b(y), x = y + 1.").is_ok());
        assert!(check("a(x) :- b(y), z = y + 1, x = z - 2.").is_ok());
        assert!(check("a(y) :- b(y), !c(z).").is_err());
        assert!(check("a(y) :- b(y), y < z.").is_err());
        assert!(check("a(n) :- n = count : b(_).").is_ok());
        assert!(check("a(g, m) :- g(g), m = max x : mark(_, g, x).").is_ok());
    }

    #[test]
    fn type_errors() {
        let src = ".decl a(x:number)\n.decl b(x:symbol)\na(x) :- b(x).";
        let e = check_types(&parse(src).unwrap()).unwrap_err();
        assert!(matches!(&e[0], SemanticError::TypeMismatch { .. }));
        let src = ".decl a(x:number)\n.decl b(x:symbol)\na(1) :- b(x), x < 3.";
        assert!(check_types(&parse(src).unwrap()).is_err());
        let src = ".decl a(x:number)\n.decl b(x:number)\na(y) :- b(x), y = x + 1.";
        assert!(check_types(&parse(src).unwrap()).is_ok());
        let src = ".decl a(x:symbol)\na(\"q\").\na(1).";
        assert!(check_types(&parse(src).unwrap()).is_err());
    }

    #[test]
    fn unstratifiable_negation() {
        let src = ".decl st(v:symbol, u:symbol)\n.decl edge(v:symbol, u:symbol)\n\
                   st(v,u) :- st(_,v), edge(v,u), !st(_,u).";
        let e = stratify(&parse(src).unwrap()).unwrap_err();
        let SemanticError::CycleError { cycle, .. } = &e else {
            panic!()
        };
        assert_eq!(render_cycle(cycle), "st -> !st");
        assert_eq!(e.code(), "CycleError");
    }

    #[test]
    fn longer_negative_cycle_is_listed() {
        let src = ".decl a(x:number)\n.decl b(x:number)\n.decl c(x:number)\n\
                   a(x) :- c(x), !b(x).\nb(x) :- a(x).\nc(1).";
        let SemanticError::CycleError { cycle, .. } = stratify(&parse(src).unwrap()).unwrap_err() else {
            panic!()
        };
        assert_eq!(render_cycle(&cycle), "b -> !a -> b");
    }

    #[test]
    fn spanning_tree_strata() {
        let p = parse(crate::corpus::SPANNING_TREE).unwrap();
        let s = stratify(&p).unwrap();
        let st = s.stratum_of("st").unwrap();
        assert!(s.stratum_of("edge").unwrap() < st);
        assert!(s.strata[st].recursive);
        assert_eq!(s.strata[st].relations, vec!["st".to_string()]);
    }

    #[test]
    fn aggregates_stratify_like_negation() {
        let src = ".decl n(x:number)\n.decl c(x:number)\nc(k) :- k = count : n(_).\nn(1).";
        let s = stratify(&parse(src).unwrap()).unwrap();
        assert!(s.stratum_of("n").unwrap() < s.stratum_of("c").unwrap());
        let src = ".decl c(x:number)\nc(k) :- k = count : c(_).";
        assert!(stratify(&parse(src).unwrap()).is_err());
    }

    #[test]
    fn native_spanning_forest_stratifies() {
        let p = normalize(&parse(crate::corpus::source("spanning_forest", crate::corpus::Version::Native)).unwrap());
        assert!(stratify(&p).is_ok());
    }

    #[test]
    fn stratification_ignores_rule_order() {
        let src = crate::corpus::source("bipartite_matching", crate::corpus::Version::Native);
        let p = normalize(&parse(src).unwrap());
        let mut q = p.clone();
        q.rules.reverse();
        let partition = |s: StratifiedProgram| {
            s.strata.into_iter().map(|s| s.relations).collect::<Vec<_>>()
        };
        assert_eq!(partition(stratify(&p).unwrap()), partition(stratify(&q).unwrap()));
    }
}
