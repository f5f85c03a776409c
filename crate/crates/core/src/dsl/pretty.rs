//! Pretty-printer producing `.rsm` syntax that re-parses to the same AST.

use std::fmt::Write;

use super::ast::{BinOp, Expr, Stmt, TransitionFn, Type, UnOp, Value, VarDecl};
use super::ops::{binary_symbol, unary_symbol};

const P_OR: u8 = 1;
const P_AND: u8 = 2;
const P_CMP: u8 = 3;
const P_ADD: u8 = 4;
const P_MUL: u8 = 5;
const P_UNARY: u8 = 6;
const P_ATOM: u8 = 7;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Const(Value::Num(x)) if x.is_sign_negative() => P_UNARY,
        Expr::Const(_) | Expr::Ident(_) | Expr::Vec2(..) => P_ATOM,
        Expr::Unary(UnOp::Neg | UnOp::Not, _) => P_UNARY,
        Expr::Unary(..) => P_ATOM,
        Expr::Binary(op, ..) => match op {
            BinOp::Or => P_OR,
            BinOp::And => P_AND,
            BinOp::Add | BinOp::Sub => P_ADD,
            BinOp::Mul | BinOp::Div => P_MUL,
            BinOp::Dot => P_ATOM,
            _ => P_CMP,
        },
    }
}

pub fn write_state_lit(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
}

fn write_expr(out: &mut String, e: &Expr, min: u8) {
    let p = prec(e);
    let paren = p < min;
    if paren {
        out.push('(');
    }
    match e {
        Expr::Const(Value::Num(x)) => {
            let _ = write!(out, "{x}");
        }
        Expr::Const(Value::Bool(b)) => {
            let _ = write!(out, "{b}");
        }
        Expr::Const(Value::Vec2(x, y)) => {
            let _ = write!(out, "<{x}, {y}>");
        }
        Expr::Const(Value::State(s)) => write_state_lit(out, s),
        Expr::Ident(id) => {
            let _ = write!(out, "{id}");
        }
        Expr::Vec2(x, y) => {
            out.push('<');
            write_expr(out, x, P_ADD);
            out.push_str(", ");
            write_expr(out, y, P_ADD);
            out.push('>');
        }
        Expr::Unary(op @ (UnOp::Neg | UnOp::Not), a) => {
            out.push_str(unary_symbol(*op));
            // A bare literal after `-` would re-parse as a negative constant.
            if matches!(**a, Expr::Const(Value::Num(_))) {
                out.push('(');
                write_expr(out, a, P_OR);
                out.push(')');
            } else {
                write_expr(out, a, P_UNARY);
            }
        }
        Expr::Unary(op, a) => {
            out.push_str(unary_symbol(*op));
            out.push('(');
            write_expr(out, a, P_OR);
            out.push(')');
        }
        Expr::Binary(BinOp::Dot, l, r) => {
            out.push_str("dot(");
            write_expr(out, l, P_OR);
            out.push_str(", ");
            write_expr(out, r, P_OR);
            out.push(')');
        }
        Expr::Binary(op, l, r) => {
            let (lp, rp) = match prec(e) {
                P_OR => (P_OR, P_AND),
                P_AND => (P_AND, P_CMP),
                P_CMP => (P_ADD, P_ADD),
                P_ADD => (P_ADD, P_MUL),
                _ => (P_MUL, P_UNARY),
            };
            write_expr(out, l, lp);
            let _ = write!(out, " {} ", binary_symbol(*op));
            write_expr(out, r, rp);
        }
    }
    if paren {
        out.push(')');
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, P_OR);
    s
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_stmt(out: &mut String, s: &Stmt, level: usize, in_then: bool) {
    match s {
        Stmt::Return(e) => {
            out.push_str("return ");
            write_expr(out, e, P_OR);
            out.push(';');
        }
        Stmt::Assign(n, e) => {
            let _ = write!(out, "var:{n} := ");
            write_expr(out, e, P_OR);
            out.push(';');
        }
        Stmt::Block(stmts) => {
            if stmts.is_empty() {
                out.push_str("{ }");
                return;
            }
            out.push_str("{\n");
            for st in stmts {
                indent(out, level + 1);
                write_stmt(out, st, level + 1, false);
                out.push('\n');
            }
            indent(out, level);
            out.push('}');
        }
        Stmt::If(g, t, e) => {
            out.push_str("if (");
            write_expr(out, g, P_OR);
            out.push_str(") ");
            write_stmt(out, t, level, true);
            let empty_else = matches!(&**e, Stmt::Block(v) if v.is_empty());
            // An if nested in a then-branch keeps its else so the outer else
            // cannot attach to it on re-parse.
            if !empty_else || in_then {
                out.push_str(" else ");
                write_stmt(out, e, level, false);
            }
        }
    }
}

pub fn stmt_to_string(s: &Stmt) -> String {
    let mut out = String::new();
    write_stmt(&mut out, s, 0, false);
    out
}

fn literal(v: &Value) -> String {
    match v {
        Value::Vec2(x, y) => format!("<{x}, {y}>"),
        other => other.to_string(),
    }
}

fn var_decl(n: &str, d: &VarDecl) -> String {
    match &d.init {
        Some(v) => format!("{n}: {} = {}", d.ty, literal(v)),
        None => format!("{n}: {}", d.ty),
    }
}

/// Renders a complete `.rsm` file.
pub fn fn_to_string(f: &TransitionFn) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "states {{{}}} start {} end {};",
        f.states.join(", "),
        f.start,
        f.end
    );
    let ins: Vec<String> = f.inputs.iter().map(|(n, t)| format!("{n}: {}", type_name(*t))).collect();
    let _ = writeln!(out, "inputs {{{}}};", ins.join(", "));
    let vars: Vec<String> = f.vars.iter().map(|(n, d)| var_decl(n, d)).collect();
    let _ = writeln!(out, "vars {{{}}};", vars.join(", "));
    let _ = writeln!(out, "params {{{}}};", f.params.join(", "));
    out.push_str("transition ");
    write_stmt(&mut out, &f.body, 0, false);
    out.push('\n');
    out
}

fn type_name(t: Type) -> String {
    t.to_string()
}
