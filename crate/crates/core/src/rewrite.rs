//! Desugars rule-level choice goals into relation-level choice domains.
//!
//! A rule `A(X) :- B, choice((D1),(Z1)), ..., choice((Dk),(Zk)).` becomes
//!
//! ```text
//! .decl A__choice_rN(...) choice-domain (D1), ..., (Dk)
//! A__choice_rN(V) :- B.
//! A(X) :- A__choice_rN(V).
//! ```
//!
//! where `V` is the head variables in head order followed by the remaining
//! choice variables in first-occurrence order.

use std::collections::HashSet;

use thiserror::Error;

use crate::ast::*;
use crate::diag::Diagnostic;
use crate::semantics::{infer_var_types, literal_vars};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("choice variable `{var}` does not occur in the rule body")]
    ChoiceVarNotInBody { var: String, span: Span },
    #[error("variable `{var}` is both a domain and a dependent variable of a choice goal")]
    ChoiceVarOverlap { var: String, span: Span },
}

impl RewriteError {
    pub fn code(&self) -> &'static str {
        match self {
            RewriteError::ChoiceVarNotInBody { .. } => "ChoiceVarNotInBody",
            RewriteError::ChoiceVarOverlap { .. } => "ChoiceVarOverlap",
        }
    }
}

impl From<RewriteError> for Diagnostic {
    fn from(e: RewriteError) -> Self {
        let span = match &e {
            RewriteError::ChoiceVarNotInBody { span, .. }
            | RewriteError::ChoiceVarOverlap { span, .. } => *span,
        };
        Diagnostic::new(Some(span), e.code(), e.to_string())
    }
}

pub fn aux_name(head: &str, rule_index: usize) -> String {
    format!("{head}__choice_r{rule_index}")
}

pub fn lower_rule_choice(program: &Program) -> Result<Program, Vec<RewriteError>> {
    let mut out = program.clone();
    out.rules.clear();
    let mut errors = Vec::new();
    for (i, rule) in program.rules.iter().enumerate() {
        if !rule.has_choice_goal() {
            out.rules.push(rule.clone());
            continue;
        }
        match rewrite_rule(program, rule, i + 1) {
            Ok((decl, aux_rule, copy_rule)) => {
                out.decls.push(decl);
                out.rules.push(aux_rule);
                out.rules.push(copy_rule);
            }
            Err(e) => errors.extend(e),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(errors)
    }
}

fn rewrite_rule(
    program: &Program,
    rule: &Rule,
    index: usize,
) -> Result<(RelationDecl, Rule, Rule), Vec<RewriteError>> {
    let mut goals = Vec::new();
    let mut body = Vec::new();
    for lit in &rule.body {
        match lit {
            Literal::Choice { domain, dependent } => goals.push((domain, dependent)),
            other => body.push(other.clone()),
        }
    }
    let body_vars: HashSet<&str> = body.iter().flat_map(literal_vars).collect();
    let mut errors = Vec::new();
    let mut attrs: Vec<String> = Vec::new();
    let push = |v: &str, attrs: &mut Vec<String>| {
        if !attrs.iter().any(|a| a == v) {
            attrs.push(v.to_string());
        }
    };
    for v in rule.head.vars() {
        push(v, &mut attrs);
    }
    for (domain, dependent) in &goals {
        for v in domain.iter().chain(dependent.iter()) {
            if !body_vars.contains(v.as_str()) {
                errors.push(RewriteError::ChoiceVarNotInBody {
                    var: v.clone(),
                    span: rule.span,
                });
            }
            push(v, &mut attrs);
        }
        for v in domain.iter() {
            if dependent.contains(v) {
                errors.push(RewriteError::ChoiceVarOverlap {
                    var: v.clone(),
                    span: rule.span,
                });
            }
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let probe = Rule {
        head: rule.head.clone(),
        body: body.clone(),
        span: rule.span,
    };
    let types = infer_var_types(&probe, program).unwrap_or_default();
    let name = aux_name(&rule.head.relation, index);
    let decl = RelationDecl {
        name: name.clone(),
        attrs: attrs
            .iter()
            .map(|a| Attribute::new(a.clone(), types.get(a).copied().unwrap_or(AttrType::Number)))
            .collect(),
        choice_domains: goals
            .iter()
            .map(|(domain, _)| DomainSpec {
                attrs: domain.to_vec(),
                span: rule.span,
            })
            .collect(),
        span: rule.span,
    };
    let aux_atom = Atom {
        relation: name,
        args: attrs.iter().map(|a| Term::var(a.clone())).collect(),
        span: rule.head.span,
    };
    let aux_rule = Rule {
        head: aux_atom.clone(),
        body,
        span: rule.span,
    };
    let copy_rule = Rule {
        head: rule.head.clone(),
        body: vec![Literal::Positive(aux_atom)],
        span: rule.span,
    };
    Ok((decl, aux_rule, copy_rule))
}
