//! Front end for transition functions: lexing, parsing, typechecking, and
//! the JSON formats for parameter maps, traces, and corrections.
//!
//! Surface syntax of a `.rsm` file:
//!
//! ```text
//! states {START, GOTO, KICK, END} start START end END;
//! inputs {ballLoc: vec2, time: num};
//! vars {lastKick: num = 0, relLoc: vec2};
//! params {maxDist, kickTimeout};
//! transition {
//!   var:relLoc := in:ballLoc - <0, 0>;
//!   if (state == "GOTO" && norm(var:relLoc) < param:maxDist) return "KICK";
//!   else return state;
//! }
//! ```
//!
//! Variables declared with an initializer are persistent: they are recorded
//! in traces and updated only by emission controllers. Variables without an
//! initializer are scratch values local to a single transition step.

mod ast;
mod data;
mod lexer;
mod ops;
mod parser;
mod pretty;
mod typecheck;

use thiserror::Error;

pub use ast::{BinOp, Expr, Ident, Namespace, Stmt, TransitionFn, Type, UnOp, Value, VarDecl};
pub use data::{
    corrections_to_json, parse_corrections, parse_params, parse_trace, value_from_json, value_to_json,
    Correction, ParamMap, Trace, TraceElement,
};
pub use lexer::Pos;
pub use ops::{
    angle_mod, binary_linearity, binary_symbol, eval_binary, eval_unary, unary_linearity, unary_symbol,
    EvalError, Linearity,
};
pub use parser::{parse_expr, parse_stmt};
pub use pretty::{expr_to_string, fn_to_string, stmt_to_string};
pub use typecheck::{typecheck, Diagnostic};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("{pos}: expected {}, found {found}", expected_list(.expected))]
    Syntax { pos: Pos, expected: Vec<String>, found: String },
    #[error("{0}")]
    Invalid(Diagnostic),
    #[error("{0}")]
    Schema(String),
    #[error("{what}: missing {missing:?}, unexpected {extra:?}")]
    SignatureMismatch { what: String, missing: Vec<String>, extra: Vec<String> },
    #[error("unknown state {0:?}")]
    UnknownState(String),
}

fn expected_list(e: &[String]) -> String {
    if e.is_empty() {
        "valid input".into()
    } else {
        e.join(" or ")
    }
}

impl DslError {
    pub fn kind(&self) -> &'static str {
        match self {
            DslError::Syntax { .. } => "SyntaxError",
            DslError::Invalid(d) => d.kind(),
            DslError::Schema(_) => "SchemaError",
            DslError::SignatureMismatch { .. } => "SignatureMismatch",
            DslError::UnknownState(_) => "UnknownState",
        }
    }
}

/// Parses and typechecks a `.rsm` source. The first diagnostic, if any, is
/// returned as the error.
pub fn parse_rsm(src: &str) -> Result<TransitionFn, DslError> {
    let f = parser::Parser::new(src)?.parse_file()?;
    match typecheck(&f).into_iter().next() {
        Some(d) => Err(DslError::Invalid(d)),
        None => Ok(f),
    }
}
