use indexmap::IndexMap;

use crate::dsl::{eval_binary, eval_unary, BinOp, Expr, Ident, Stmt, TransitionFn, Value};

/// Values for any subset of identifiers.
pub type IdentMap = IndexMap<Ident, Value>;

/// Result of partially evaluating an expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Sym {
    Known(Value),
    Unknown(Expr),
}

impl Sym {
    pub fn into_expr(self) -> Expr {
        match self {
            Sym::Known(v) => Expr::Const(v),
            Sym::Unknown(e) => e,
        }
    }

    pub fn known(&self) -> Option<&Value> {
        match self {
            Sym::Known(v) => Some(v),
            Sym::Unknown(_) => None,
        }
    }
}

/// Bitwise equality, so that `0.0` and `-0.0` are kept apart.
pub(crate) fn same_value(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Num(x), Value::Num(y)) => x.to_bits() == y.to_bits(),
        (Value::Vec2(a, b), Value::Vec2(c, d)) => a.to_bits() == c.to_bits() && b.to_bits() == d.to_bits(),
        _ => a == b,
    }
}

pub(crate) struct Ctx<'a> {
    pub binds: &'a IdentMap,
    pub vars: IndexMap<String, Sym>,
    /// Replace references to variables holding unknown values by their
    /// defining expression instead of keeping `var:x`.
    pub inline: bool,
}

impl Ctx<'_> {
    fn lookup(&self, id: &Ident) -> Sym {
        if let Ident::Var(n) = id {
            return match self.vars.get(n) {
                Some(Sym::Known(v)) => Sym::Known(v.clone()),
                Some(Sym::Unknown(e)) if self.inline => Sym::Unknown(e.clone()),
                _ => Sym::Unknown(Expr::Ident(id.clone())),
            };
        }
        match self.binds.get(id) {
            Some(v) => Sym::Known(v.clone()),
            None => Sym::Unknown(Expr::Ident(id.clone())),
        }
    }

    /// Folds where every operand is known. An operation that fails on known
    /// operands is left in place, so the error surfaces only if the residual
    /// reaches it.
    pub fn expr(&self, e: &Expr) -> Sym {
        match e {
            Expr::Const(v) => Sym::Known(v.clone()),
            Expr::Ident(id) => self.lookup(id),
            Expr::Vec2(x, y) => match (self.expr(x), self.expr(y)) {
                (Sym::Known(Value::Num(x)), Sym::Known(Value::Num(y))) => Sym::Known(Value::Vec2(x, y)),
                (x, y) => Sym::Unknown(Expr::Vec2(Box::new(x.into_expr()), Box::new(y.into_expr()))),
            },
            Expr::Unary(op, a) => match self.expr(a) {
                Sym::Known(v) => match eval_unary(*op, &v) {
                    Ok(r) => Sym::Known(r),
                    Err(_) => Sym::Unknown(Expr::unary(*op, Expr::Const(v))),
                },
                Sym::Unknown(a) => Sym::Unknown(Expr::unary(*op, a)),
            },
            Expr::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
                let short = *op == BinOp::Or;
                match self.expr(l) {
                    Sym::Known(Value::Bool(b)) if b == short => Sym::Known(Value::Bool(b)),
                    Sym::Known(Value::Bool(_)) => self.expr(r),
                    l => match self.expr(r) {
                        // `l && true` and `l || false` are `l`; the other
                        // constant cases keep `l` so it is still evaluated.
                        Sym::Known(Value::Bool(b)) if b != short => l,
                        r => Sym::Unknown(Expr::binary(*op, l.into_expr(), r.into_expr())),
                    },
                }
            }
            Expr::Binary(op, l, r) => match (self.expr(l), self.expr(r)) {
                (Sym::Known(a), Sym::Known(b)) => match eval_binary(*op, &a, &b) {
                    Ok(v) => Sym::Known(v),
                    Err(_) => Sym::Unknown(Expr::binary(*op, Expr::Const(a), Expr::Const(b))),
                },
                (l, r) => Sym::Unknown(Expr::binary(*op, l.into_expr(), r.into_expr())),
            },
        }
    }
}

fn append(s: Stmt, extra: Vec<Stmt>) -> Stmt {
    if extra.is_empty() {
        return s;
    }
    let mut v = match s {
        Stmt::Block(v) => v,
        other => vec![other],
    };
    v.extend(extra);
    if v.len() == 1 {
        v.pop().expect("one element")
    } else {
        Stmt::Block(v)
    }
}

/// Joins the variable environments of two branches that both fall through.
/// Variables whose known values disagree become unknown, and a branch that
/// knew the value gets an explicit assignment, since assignments of known
/// values are otherwise dropped.
fn merge(
    t: Stmt,
    te: IndexMap<String, Sym>,
    f: Stmt,
    fe: IndexMap<String, Sym>,
) -> (Stmt, Stmt, IndexMap<String, Sym>) {
    let mut out = IndexMap::new();
    let (mut t_extra, mut f_extra) = (vec![], vec![]);
    let names: Vec<String> = te.keys().chain(fe.keys()).cloned().collect();
    for n in names {
        if out.contains_key(&n) {
            continue;
        }
        let (a, b) = (te.get(&n), fe.get(&n));
        if let (Some(Sym::Known(x)), Some(Sym::Known(y))) = (a, b) {
            if same_value(x, y) {
                out.insert(n, Sym::Known(x.clone()));
                continue;
            }
        }
        if let Some(Sym::Known(x)) = a {
            t_extra.push(Stmt::Assign(n.clone(), Expr::Const(x.clone())));
        }
        if let Some(Sym::Known(y)) = b {
            f_extra.push(Stmt::Assign(n.clone(), Expr::Const(y.clone())));
        }
        out.insert(n.clone(), Sym::Unknown(Expr::var(n)));
    }
    (append(t, t_extra), append(f, f_extra), out)
}

fn stmt(s: &Stmt, ctx: &mut Ctx<'_>) -> Stmt {
    match s {
        Stmt::Return(e) => Stmt::Return(ctx.expr(e).into_expr()),
        Stmt::Assign(n, e) => match ctx.expr(e) {
            Sym::Known(k) => {
                ctx.vars.insert(n.clone(), Sym::Known(k));
                Stmt::Block(vec![])
            }
            Sym::Unknown(e) => {
                ctx.vars.insert(n.clone(), Sym::Unknown(Expr::var(n.clone())));
                Stmt::Assign(n.clone(), e)
            }
        },
        Stmt::If(g, t, f) => match ctx.expr(g) {
            Sym::Known(Value::Bool(b)) => stmt(if b { t } else { f }, ctx),
            g => {
                let base = ctx.vars.clone();
                let t2 = stmt(t, ctx);
                let te = std::mem::replace(&mut ctx.vars, base);
                let f2 = stmt(f, ctx);
                let fe = std::mem::take(&mut ctx.vars);
                let (t2, f2, env) = match (t2.always_returns(), f2.always_returns()) {
                    (true, true) => (t2, f2, fe),
                    (true, false) => (t2, f2, fe),
                    (false, true) => (t2, f2, te),
                    (false, false) => merge(t2, te, f2, fe),
                };
                ctx.vars = env;
                Stmt::if_else(g.into_expr(), t2, f2)
            }
        },
        Stmt::Block(v) => {
            let mut out = Vec::with_capacity(v.len());
            for st in v {
                let r = stmt(st, ctx);
                let done = r.always_returns();
                if r != Stmt::Block(vec![]) {
                    out.push(r);
                }
                if done {
                    break;
                }
            }
            Stmt::Block(out)
        }
    }
}

pub(crate) fn initial_vars(binds: &IdentMap) -> IndexMap<String, Sym> {
    binds
        .iter()
        .filter_map(|(id, v)| match id {
            Ident::Var(n) => Some((n.clone(), Sym::Known(v.clone()))),
            _ => None,
        })
        .collect()
}

/// Partially evaluates the body of `f` under `binds`: bound identifiers are
/// substituted, fully known subexpressions folded, conditionals with known
/// guards pruned, and assignments of known values propagated and dropped. Executing the result under any completion of
/// `binds` behaves like executing the original body.
pub fn peval(f: &TransitionFn, binds: &IdentMap) -> Stmt {
    let mut ctx = Ctx { binds, vars: initial_vars(binds), inline: false };
    stmt(&f.body, &mut ctx)
}
