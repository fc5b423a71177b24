//! Reuse-distance and data-movement-distance analysis for affine loop
//! programs.
//!
//! The pipeline is [`compile`] (tokenize, parse, validate), then either
//! [`locality::analyze_concrete`] at a fixed parameter binding or
//! [`symbolic::analyze_symbolic`] for closed forms.

pub mod affine;
pub mod ast;
pub mod diagnostic;
pub mod exec;
pub mod formula;
pub mod lexer;
pub mod locality;
pub mod oracle;
pub mod parser;
pub mod polyhedral;
pub mod report;
pub mod semantics;
pub mod symbolic;

pub use diagnostic::{Category, Diagnostic, Span};
pub use exec::Execution;
pub use formula::{FormulaError, FormulaExpr, Rendered};
pub use semantics::{validate, StmtId, ValidatedProgram};

/// Tokenizes, parses and validates `source`.
pub fn compile(source: &str) -> Result<ValidatedProgram, Vec<Diagnostic>> {
    let tokens = lexer::tokenize(source).map_err(|d| vec![d])?;
    let program = parser::parse(&tokens).map_err(|d| vec![d])?;
    validate(&program)
}
