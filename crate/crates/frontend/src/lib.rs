//! Parser, desugaring and static checks for DiPWhile programs.
//!
//! ```
//! use dip_frontend::{parse_program, static_check};
//! let p = parse_program("input q\noutput o\nr <- Lap(eps, q)\nb <- r >= 0\nif b { o <- 1 } else { o <- 0 }").unwrap();
//! assert!(static_check(&p).is_empty());
//! ```

pub mod ast;
pub mod check;
mod lexer;
pub(crate) mod lower;
mod parser;
pub mod print;
pub mod space;

use std::collections::BTreeMap;

pub use ast::{ChooseDef, CmpOp, Dom, Expr, Program, ScoreTable, Stmt, StmtKind, VarSort};
pub use check::{static_check, Diagnostic};
pub use lower::DEFAULT_DOM;
pub use print::{print_expr, print_program};
pub use space::{adjacent_pairs, enumerate_valuations, product, AdjacencySpec, Which};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrontendError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown identifier `{name}` at {line}:{col}")]
    UnknownIdent { name: String, line: usize, col: usize },
    #[error("non-rational constant at {line}:{col}: {msg}")]
    NonRational { line: usize, col: usize, msg: String },
    #[error("{what} space has {size} valuations, more than the cap of {cap}")]
    SpaceTooLarge { what: &'static str, size: String, cap: usize },
    #[error("bad adjacency relation: {0}")]
    Adjacency(String),
}

/// Parse and desugar a program.
pub fn parse_program(text: &str) -> Result<Program, FrontendError> {
    parse_program_with(text, &BTreeMap::new())
}

/// Like [`parse_program`], with some `const` declarations overridden.
pub fn parse_program_with(text: &str, consts: &BTreeMap<String, i64>) -> Result<Program, FrontendError> {
    lower::build(parser::parse_items(text)?, consts)
}
