//! A bottom-up Datalog engine with relation-level non-deterministic choice.
//!
//! Programs are parsed, desugared, stratified and lowered into a relational
//! algebra machine (RAM) program whose inserts into choice-constrained
//! relations are guarded by existence checks. The RAM program is interpreted
//! with semi-naive evaluation.
//!
//! ```
//! use choicelog::{compile, eval::EvalOptions};
//!
//! let src = r#"
//!     .decl edge(x:symbol, y:symbol)
//!     .decl st(x:symbol, y:symbol) choice-domain y
//!     edge("a", "b"). edge("a", "c"). edge("b", "c").
//!     st("root", "a").
//!     st(x, y) :- st(_, x), edge(x, y).
//! "#;
//! let program = compile(src).unwrap();
//! let out = program.run(&EvalOptions::default()).unwrap();
//! assert_eq!(out.instance.relation("st").unwrap().len(), 3);
//! ```

pub mod ast;
pub mod bench;
pub mod corpus;
pub mod diag;
pub mod engine;
pub mod eval;
pub mod frontend;
pub mod io;
pub mod ram;
pub mod rewrite;
pub mod semantics;
pub mod storage;

pub use diag::Diagnostic;
pub use engine::{compile, compile_program, desugar, Compiled};
