use std::collections::BTreeSet;
use std::fmt;

use super::classify::{classify_params, Classification};
use super::partial::{initial_vars, peval, Ctx, IdentMap, Sym};
use crate::dsl::{stmt_to_string, EvalError, Expr, Ident, ParamMap, Stmt, TraceElement, TransitionFn, Value};
use crate::interp::{eval_expr, step_transition};

/// Residual transition function as a decision tree: every internal node
/// tests a guard over repairable parameters, every leaf names a state.
#[derive(Debug, Clone, PartialEq)]
pub enum RStmt {
    Return(String),
    If(Expr, Box<RStmt>, Box<RStmt>),
}

impl RStmt {
    pub fn to_stmt(&self) -> Stmt {
        match self {
            RStmt::Return(s) => Stmt::Return(Expr::state_lit(s.clone())),
            RStmt::If(g, t, f) => Stmt::if_else(g.clone(), t.to_stmt(), f.to_stmt()),
        }
    }

    /// Evaluates the tree with the given parameter values.
    pub fn eval(&self, params: &ParamMap) -> Result<String, EvalError> {
        let mut node = self;
        loop {
            match node {
                RStmt::Return(s) => return Ok(s.clone()),
                RStmt::If(g, t, f) => {
                    node = match eval_expr(g, params)? {
                        Value::Bool(true) => t,
                        Value::Bool(false) => f,
                        v => return Err(EvalError::TypeMismatch(format!("guard evaluated to {v}"))),
                    }
                }
            }
        }
    }

    pub fn for_each_guard(&self, f: &mut impl FnMut(&Expr)) {
        if let RStmt::If(g, t, e) = self {
            f(g);
            t.for_each_guard(f);
            e.for_each_guard(f);
        }
    }

    /// States reachable at some leaf.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = vec![];
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            match n {
                RStmt::Return(s) => out.push(s.as_str()),
                RStmt::If(_, t, f) => {
                    stack.push(f);
                    stack.push(t);
                }
            }
        }
        out
    }
}

/// A transition function specialized to one trace element.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualFn {
    pub body: RStmt,
    pub rep: Vec<String>,
    pub tau: TraceElement,
    pub params: ParamMap,
}

impl ResidualFn {
    /// Evaluates with the repairable parameters taken from `params`.
    pub fn eval(&self, params: &ParamMap) -> Result<String, EvalError> {
        self.body.eval(params)
    }
}

impl fmt::Display for ResidualFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&stmt_to_string(&self.body.to_stmt()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LowerError {
    FallThrough,
    NonConcreteReturn(Expr),
    NonBoolGuard(Value),
}

/// Turns a partially evaluated body into a decision tree. The statements
/// after a retained conditional are specialized separately in each branch,
/// with variables inlined by their defining expressions along that path.
fn lower(mut rest: Vec<&Stmt>, mut ctx: Ctx<'_>) -> Result<RStmt, LowerError> {
    while let Some(s) = rest.pop() {
        match s {
            Stmt::Return(e) => {
                return match ctx.expr(e) {
                    Sym::Known(Value::State(s)) => Ok(RStmt::Return(s)),
                    other => Err(LowerError::NonConcreteReturn(other.into_expr())),
                }
            }
            Stmt::Assign(n, e) => {
                let v = ctx.expr(e);
                ctx.vars.insert(n.clone(), v);
            }
            Stmt::Block(v) => rest.extend(v.iter().rev()),
            Stmt::If(g, t, f) => match ctx.expr(g) {
                Sym::Known(Value::Bool(b)) => rest.push(if b { t } else { f }),
                Sym::Known(v) => return Err(LowerError::NonBoolGuard(v)),
                Sym::Unknown(g) => {
                    let mut rt = rest.clone();
                    rt.push(t);
                    rest.push(f);
                    let ct = Ctx { binds: ctx.binds, vars: ctx.vars.clone(), inline: true };
                    let then = lower(rt, ct)?;
                    let otherwise = lower(rest, ctx)?;
                    return Ok(RStmt::If(g, Box::new(then), Box::new(otherwise)));
                }
            },
        }
    }
    Err(LowerError::FallThrough)
}

/// Bindings used to specialize `f` at `tau`: inputs, recorded variables, the
/// current state, and the unrepairable parameters at their values in `params`.
pub fn residual_bindings(cls: &Classification, tau: &TraceElement, params: &ParamMap) -> IdentMap {
    let mut b = IdentMap::new();
    b.insert(Ident::State, Value::State(tau.state.clone()));
    for (n, v) in &tau.ins {
        b.insert(Ident::Input(n.clone()), v.clone());
    }
    for (n, v) in &tau.vars {
        b.insert(Ident::Var(n.clone()), v.clone());
    }
    for p in &cls.unrep {
        b.insert(Ident::Param(p.clone()), Value::Num(params[p.as_str()]));
    }
    b
}

/// Specializes `f` to one trace element; also available as `residual`.
/// Errors raised by concrete execution at `params` are propagated.
pub fn make_residual(f: &TransitionFn, tau: &TraceElement, params: &ParamMap) -> Result<ResidualFn, EvalError> {
    make_residual_with(f, &classify_params(f), tau, params)
}

pub use make_residual as residual;

pub fn make_residual_with(
    f: &TransitionFn,
    cls: &Classification,
    tau: &TraceElement,
    params: &ParamMap,
) -> Result<ResidualFn, EvalError> {
    step_transition(f, tau, params)?;
    let binds = residual_bindings(cls, tau, params);
    let body = peval(f, &binds);
    let ctx = Ctx { binds: &binds, vars: initial_vars(&binds), inline: true };
    let tree = lower(vec![&body], ctx).map_err(|e| EvalError::Domain(format!("residualization failed: {e:?}")))?;
    Ok(ResidualFn { body: tree, rep: cls.rep.clone(), tau: tau.clone(), params: params.clone() })
}

/// Identifiers in guards that are not repairable parameters; empty for a
/// finished residual.
pub fn stray_identifiers(r: &ResidualFn) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    r.body.for_each_guard(&mut |g| {
        g.for_each_ident(&mut |id| match id {
            Ident::Param(p) if r.rep.contains(p) => {}
            other => {
                out.insert(other.to_string());
            }
        })
    });
    out
}
