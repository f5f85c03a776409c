use std::collections::BTreeSet;

use indexmap::IndexMap;

use crate::dsl::{binary_linearity, unary_linearity, Expr, Ident, Linearity, Stmt, TransitionFn};

/// Split of the declared parameters into repairable and unrepairable sets,
/// each in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub rep: Vec<String>,
    pub unrep: Vec<String>,
}

impl Classification {
    pub fn is_rep(&self, p: &str) -> bool {
        self.rep.iter().any(|x| x == p)
    }

    pub fn is_unrep(&self, p: &str) -> bool {
        self.unrep.iter().any(|x| x == p)
    }
}

fn collect<'a>(s: &'a Stmt, exprs: &mut Vec<&'a Expr>, assigns: &mut Vec<(&'a str, &'a Expr)>) {
    match s {
        Stmt::Return(e) => exprs.push(e),
        Stmt::Assign(n, e) => {
            exprs.push(e);
            assigns.push((n, e));
        }
        Stmt::If(g, t, f) => {
            exprs.push(g);
            collect(t, exprs, assigns);
            collect(f, exprs, assigns);
        }
        Stmt::Block(v) => v.iter().for_each(|s| collect(s, exprs, assigns)),
    }
}

/// Still-repairable parameters an expression may depend on, directly or
/// through variables.
fn params_of(e: &Expr, deps: &IndexMap<&str, BTreeSet<String>>, unrep: &BTreeSet<String>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    e.for_each_ident(&mut |id| match id {
        Ident::Param(p) if !unrep.contains(p) => {
            out.insert(p.clone());
        }
        Ident::Var(v) => {
            if let Some(d) = deps.get(v.as_str()) {
                out.extend(d.iter().cloned());
            }
        }
        _ => {}
    });
    out
}

/// Flow-insensitive: a variable depends on every parameter any of its
/// assignments depends on.
fn var_deps<'a>(assigns: &[(&'a str, &'a Expr)], unrep: &BTreeSet<String>) -> IndexMap<&'a str, BTreeSet<String>> {
    let mut deps: IndexMap<&str, BTreeSet<String>> = IndexMap::new();
    loop {
        let mut changed = false;
        for (n, e) in assigns {
            let ps = params_of(e, &deps, unrep);
            let entry = deps.entry(n).or_default();
            let before = entry.len();
            entry.extend(ps);
            changed |= entry.len() != before;
        }
        if !changed {
            return deps;
        }
    }
}

fn nonlinear_unary(e: &Expr, deps: &IndexMap<&str, BTreeSet<String>>, unrep: &BTreeSet<String>) -> Option<BTreeSet<String>> {
    match e {
        Expr::Const(_) | Expr::Ident(_) => None,
        Expr::Unary(op, a) => {
            if unary_linearity(*op) == Linearity::Nonlinear {
                let ps = params_of(a, deps, unrep);
                if !ps.is_empty() {
                    return Some(ps);
                }
            }
            nonlinear_unary(a, deps, unrep)
        }
        Expr::Binary(_, l, r) | Expr::Vec2(l, r) => {
            nonlinear_unary(l, deps, unrep).or_else(|| nonlinear_unary(r, deps, unrep))
        }
    }
}

fn nonlinear_binary(e: &Expr, deps: &IndexMap<&str, BTreeSet<String>>, unrep: &BTreeSet<String>) -> Option<BTreeSet<String>> {
    match e {
        Expr::Const(_) | Expr::Ident(_) => None,
        Expr::Unary(_, a) => nonlinear_binary(a, deps, unrep),
        Expr::Vec2(l, r) => nonlinear_binary(l, deps, unrep).or_else(|| nonlinear_binary(r, deps, unrep)),
        Expr::Binary(op, l, r) => {
            let hit = match binary_linearity(*op) {
                Linearity::Bilinear => {
                    let pl = params_of(l, deps, unrep);
                    let pr = params_of(r, deps, unrep);
                    match (pl.is_empty(), pr.is_empty()) {
                        (false, false) if pl.len() < pr.len() => Some(pl),
                        (false, false) => Some(pr),
                        _ => None,
                    }
                }
                Linearity::Quotient => Some(params_of(r, deps, unrep)).filter(|p| !p.is_empty()),
                Linearity::Linear | Linearity::Nonlinear => None,
            };
            hit.or_else(|| nonlinear_binary(l, deps, unrep)).or_else(|| nonlinear_binary(r, deps, unrep))
        }
    }
}

/// Repairability analysis. Parameters under a nonlinear unary operator are
/// unrepairable; then, one node at a time, a product of two
/// parameter-dependent operands loses the operand with fewer parameters (the
/// right one on ties) and a quotient loses its divisor, until no such node
/// remains.
pub fn classify_params(f: &TransitionFn) -> Classification {
    let mut exprs = vec![];
    let mut assigns = vec![];
    collect(&f.body, &mut exprs, &mut assigns);
    let mut unrep: BTreeSet<String> = BTreeSet::new();
    for pass in [nonlinear_unary, nonlinear_binary] {
        loop {
            let deps = var_deps(&assigns, &unrep);
            match exprs.iter().find_map(|e| pass(e, &deps, &unrep)) {
                Some(ps) => unrep.extend(ps),
                None => break,
            }
        }
    }
    let (unrep, rep) = f.params.iter().cloned().partition(|p| unrep.contains(p));
    Classification { rep, unrep }
}
