use std::collections::BTreeSet;
use std::fmt;

use super::ast::{BinOp, Expr, Ident, Namespace, Stmt, TransitionFn, Type, UnOp, Value};
use super::ops::{binary_symbol, binary_type, unary_type};
use super::pretty::expr_to_string;

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    TypeError { node: String, expected: String, found: String },
    UnboundIdentifier { name: String, namespace: Namespace, guess: Option<Namespace> },
    MissingReturn { path: String },
    UseBeforeAssign { name: String },
    DivisionByZero { node: String },
    BadDeclaration { detail: String },
}

impl Diagnostic {
    pub fn kind(&self) -> &'static str {
        match self {
            Diagnostic::TypeError { .. } => "TypeError",
            Diagnostic::UnboundIdentifier { .. } => "UnboundIdentifier",
            Diagnostic::MissingReturn { .. } => "MissingReturn",
            Diagnostic::UseBeforeAssign { .. } => "UseBeforeAssign",
            Diagnostic::DivisionByZero { .. } => "DivisionByZero",
            Diagnostic::BadDeclaration { .. } => "BadDeclaration",
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::TypeError { node, expected, found } => {
                write!(f, "in `{node}`: expected {expected}, found {found}")
            }
            Diagnostic::UnboundIdentifier { name, namespace, guess } => {
                write!(f, "`{name}` is not declared in namespace {namespace}")?;
                if let Some(g) = guess {
                    write!(f, " (did you mean {g}:{name}?)")?;
                }
                Ok(())
            }
            Diagnostic::MissingReturn { path } => write!(f, "control reaches end without return via {path}"),
            Diagnostic::UseBeforeAssign { name } => {
                write!(f, "scratch variable var:{name} may be read before it is assigned")
            }
            Diagnostic::DivisionByZero { node } => write!(f, "division by literal zero in `{node}`"),
            Diagnostic::BadDeclaration { detail } => f.write_str(detail),
        }
    }
}

struct Checker<'a> {
    f: &'a TransitionFn,
    diags: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn guess(&self, name: &str, not: Namespace) -> Option<Namespace> {
        let mut candidates = vec![];
        if self.f.inputs.contains_key(name) {
            candidates.push(Namespace::Input);
        }
        if self.f.vars.contains_key(name) {
            candidates.push(Namespace::Var);
        }
        if self.f.has_param(name) {
            candidates.push(Namespace::Param);
        }
        candidates.into_iter().find(|n| *n != not)
    }

    fn unbound(&mut self, name: &str, ns: Namespace) {
        let guess = self.guess(name, ns);
        self.diags.push(Diagnostic::UnboundIdentifier { name: name.to_string(), namespace: ns, guess });
    }

    fn expr(&mut self, e: &Expr, assigned: &BTreeSet<String>) -> Option<Type> {
        match e {
            Expr::Const(Value::State(s)) => {
                if !self.f.has_state(s) {
                    self.unbound(s, Namespace::State);
                }
                Some(Type::State)
            }
            Expr::Const(v) => Some(v.ty()),
            Expr::Ident(Ident::State) => Some(Type::State),
            Expr::Ident(Ident::Input(n)) => match self.f.inputs.get(n) {
                Some(t) => Some(*t),
                None => {
                    self.unbound(n, Namespace::Input);
                    None
                }
            },
            Expr::Ident(Ident::Var(n)) => match self.f.vars.get(n) {
                Some(d) => {
                    if !d.is_persistent() && !assigned.contains(n) {
                        self.diags.push(Diagnostic::UseBeforeAssign { name: n.clone() });
                    }
                    Some(d.ty)
                }
                None => {
                    self.unbound(n, Namespace::Var);
                    None
                }
            },
            Expr::Ident(Ident::Param(n)) => {
                if self.f.has_param(n) {
                    Some(Type::Num)
                } else {
                    self.unbound(n, Namespace::Param);
                    None
                }
            }
            Expr::Vec2(x, y) => {
                let tx = self.expr(x, assigned);
                let ty = self.expr(y, assigned);
                for (t, sub) in [(tx, x), (ty, y)] {
                    if let Some(t) = t {
                        if t != Type::Num {
                            self.diags.push(Diagnostic::TypeError {
                                node: expr_to_string(sub),
                                expected: "num".into(),
                                found: t.to_string(),
                            });
                        }
                    }
                }
                Some(Type::Vec2)
            }
            Expr::Unary(op, a) => {
                let ta = self.expr(a, assigned)?;
                match unary_type(*op, ta) {
                    Some(t) => Some(t),
                    None => {
                        self.diags.push(Diagnostic::TypeError {
                            node: expr_to_string(e),
                            expected: unary_expectation(*op).into(),
                            found: ta.to_string(),
                        });
                        None
                    }
                }
            }
            Expr::Binary(op, l, r) => {
                if *op == BinOp::Div && matches!(**r, Expr::Const(Value::Num(z)) if z == 0.0) {
                    self.diags.push(Diagnostic::DivisionByZero { node: expr_to_string(e) });
                }
                let tl = self.expr(l, assigned);
                let tr = self.expr(r, assigned);
                let (tl, tr) = (tl?, tr?);
                match binary_type(*op, tl, tr) {
                    Some(t) => Some(t),
                    None => {
                        self.diags.push(Diagnostic::TypeError {
                            node: expr_to_string(e),
                            expected: binary_expectation(*op).into(),
                            found: format!("{tl} {} {tr}", binary_symbol(*op)),
                        });
                        None
                    }
                }
            }
        }
    }

    fn expect(&mut self, e: &Expr, want: Type, assigned: &BTreeSet<String>) {
        if let Some(t) = self.expr(e, assigned) {
            if t != want {
                self.diags.push(Diagnostic::TypeError {
                    node: expr_to_string(e),
                    expected: want.to_string(),
                    found: t.to_string(),
                });
            }
        }
    }

    /// Returns the set of scratch variables definitely assigned after `s`,
    /// or `None` when `s` always returns.
    fn stmt(&mut self, s: &Stmt, assigned: BTreeSet<String>) -> Option<BTreeSet<String>> {
        match s {
            Stmt::Return(e) => {
                self.expect(e, Type::State, &assigned);
                None
            }
            Stmt::Assign(n, e) => {
                let mut assigned = assigned;
                match self.f.vars.get(n) {
                    Some(d) => {
                        let want = d.ty;
                        self.expect(e, want, &assigned);
                    }
                    None => {
                        self.expr(e, &assigned);
                        self.unbound(n, Namespace::Var);
                    }
                }
                assigned.insert(n.clone());
                Some(assigned)
            }
            Stmt::If(g, t, e) => {
                self.expect(g, Type::Bool, &assigned);
                let a = self.stmt(t, assigned.clone());
                let b = self.stmt(e, assigned);
                match (a, b) {
                    (Some(a), Some(b)) => Some(a.intersection(&b).cloned().collect()),
                    (Some(x), None) | (None, Some(x)) => Some(x),
                    (None, None) => None,
                }
            }
            Stmt::Block(stmts) => {
                let mut cur = Some(assigned);
                for st in stmts {
                    match cur {
                        Some(a) => cur = self.stmt(st, a),
                        // unreachable tail: still typecheck it
                        None => {
                            self.stmt(st, BTreeSet::new());
                        }
                    }
                }
                cur
            }
        }
    }
}

fn unary_expectation(op: UnOp) -> &'static str {
    match op {
        UnOp::Neg => "num or vec2",
        UnOp::Not => "bool",
        UnOp::Norm => "num or vec2",
        _ => "num",
    }
}

fn binary_expectation(op: BinOp) -> &'static str {
    match op {
        BinOp::Add | BinOp::Sub => "num and num, or vec2 and vec2",
        BinOp::Mul => "num and num, or num and vec2",
        BinOp::Div => "num or vec2 divided by num",
        BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => "num and num (ordering is undefined on states)",
        BinOp::Eq | BinOp::Ne => "num and num, or state and state",
        BinOp::And | BinOp::Or => "bool and bool",
        BinOp::Dot => "vec2 and vec2",
    }
}

fn fallthrough_path(s: &Stmt, path: &mut Vec<String>) -> bool {
    match s {
        Stmt::Return(_) => false,
        Stmt::Assign(..) => true,
        Stmt::If(g, t, e) => {
            let g = expr_to_string(g);
            path.push(format!("then-branch of `if ({g})`"));
            if fallthrough_path(t, path) {
                return true;
            }
            path.pop();
            path.push(format!("else-branch of `if ({g})`"));
            if fallthrough_path(e, path) {
                return true;
            }
            path.pop();
            false
        }
        Stmt::Block(stmts) => {
            let mark = path.len();
            for st in stmts {
                path.truncate(mark);
                if !fallthrough_path(st, path) {
                    return false;
                }
            }
            true
        }
    }
}

/// Checks declarations and body; an empty result means the function is
/// well-formed.
pub fn typecheck(f: &TransitionFn) -> Vec<Diagnostic> {
    let mut c = Checker { f, diags: vec![] };
    for (k, s) in f.states.iter().enumerate() {
        if f.states[..k].contains(s) {
            c.diags.push(Diagnostic::BadDeclaration { detail: format!("state {s} declared twice") });
        }
    }
    for s in [&f.start, &f.end] {
        if !f.has_state(s) {
            c.unbound(s, Namespace::State);
        }
    }
    for (n, d) in &f.vars {
        if let Some(v) = &d.init {
            if v.ty() != d.ty {
                c.diags.push(Diagnostic::TypeError {
                    node: format!("initial value of var:{n}"),
                    expected: d.ty.to_string(),
                    found: v.ty().to_string(),
                });
            }
        }
    }
    let tail = c.stmt(&f.body, BTreeSet::new());
    if tail.is_some() {
        let mut path = vec![];
        fallthrough_path(&f.body, &mut path);
        let path = if path.is_empty() { "the end of the body".to_string() } else { path.join(" > ") };
        c.diags.push(Diagnostic::MissingReturn { path });
    }
    c.diags
}
