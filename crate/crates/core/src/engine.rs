//! The compilation pipeline from source text to an indexed, guarded RAM program.

use crate::ast::Program;
use crate::diag::Diagnostic;
use crate::eval::{self, EvalError, EvalOptions, Outcome};
use crate::frontend;
use crate::ram::{self, RamProgram};
use crate::rewrite;
use crate::semantics::{self, Phase, StratifiedProgram};
use crate::storage::{plan_indexes, IndexPlan, Instance};

#[derive(Debug, Clone)]
pub struct Compiled {
    /// As parsed.
    pub source: Program,
    /// After the rule-choice rewrite.
    pub desugared: Program,
    /// After disjunction elimination.
    pub normalized: Program,
    pub stratified: StratifiedProgram,
    /// Lowered and guarded.
    pub ram: RamProgram,
    pub plan: IndexPlan,
}

fn diags<E: Into<Diagnostic>>(errors: Vec<E>) -> Vec<Diagnostic> {
    errors.into_iter().map(Into::into).collect()
}

/// Parses, validates and applies the rule-choice rewrite.
pub fn desugar(source: &str) -> Result<Program, Vec<Diagnostic>> {
    let program = frontend::parse(source).map_err(|e| vec![e.into()])?;
    desugar_program(&program)
}

pub fn desugar_program(program: &Program) -> Result<Program, Vec<Diagnostic>> {
    semantics::check_program(program, Phase::Source).map_err(diags)?;
    let desugared = rewrite::lower_rule_choice(program).map_err(diags)?;
    semantics::check_program(&desugared, Phase::Desugared).map_err(diags)?;
    Ok(desugared)
}

pub fn compile(source: &str) -> Result<Compiled, Vec<Diagnostic>> {
    let program = frontend::parse(source).map_err(|e| vec![e.into()])?;
    compile_program(program)
}

pub fn compile_program(source: Program) -> Result<Compiled, Vec<Diagnostic>> {
    let desugared = desugar_program(&source)?;
    let normalized = semantics::normalize(&desugared);
    semantics::check_groundedness(&normalized).map_err(diags)?;
    semantics::check_types(&normalized).map_err(diags)?;
    let stratified = semantics::stratify(&normalized).map_err(|e| vec![e.into()])?;
    let ram = ram::add_guards(ram::lower(&stratified));
    let plan = plan_indexes(&ram);
    Ok(Compiled {
        source,
        desugared,
        normalized,
        stratified,
        ram,
        plan,
    })
}

impl Compiled {
    /// An empty instance with the planned indexes, ready to receive input tuples.
    pub fn instance(&self) -> Instance {
        Instance::new(&self.ram, &self.plan)
    }

    pub fn run(&self, opts: &EvalOptions) -> Result<Outcome, EvalError> {
        eval::run(&self.ram, self.instance(), opts)
    }

    pub fn run_with(&self, edb: Instance, opts: &EvalOptions) -> Result<Outcome, EvalError> {
        eval::run(&self.ram, edb, opts)
    }

    pub fn emit_ram(&self) -> String {
        self.ram.to_string()
    }

    /// Number of clauses after the rule-choice rewrite, before disjunctions
    /// are expanded.
    pub fn clause_count(&self) -> usize {
        self.desugared.clause_count()
    }
}
