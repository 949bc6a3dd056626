//! Surface language: lexing, parsing, validation and pretty-printing of loops.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;

pub use ast::{AssignRhs, BoolExpr, CmpOp, Expr, ProgramAst, Statement};
pub use parser::{parse, parse_bool, parse_const, parse_expr};
pub use printer::pretty_print;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("probability error at {line}:{col}: {msg}")]
    Probability { line: usize, col: usize, msg: String },
    #[error("invalid program at {line}:{col}: {msg}")]
    Semantic { line: usize, col: usize, msg: String },
}
