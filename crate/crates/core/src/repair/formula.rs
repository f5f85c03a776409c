//! Lowering residual decision trees to path formulas over adjustments.

use indexmap::IndexMap;

use super::RepairError;
use crate::dsl::{eval_binary, eval_unary, BinOp, Correction, Expr, Ident, ParamMap, TransitionFn, UnOp, Value};
use crate::peval::{make_residual_with, Classification, RStmt};
use crate::solver::{Affine, Atom, PathFormula, RelOp};

/// Cap on the number of disjuncts a single correction may expand to.
pub const MAX_PATHS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
enum Lin {
    Num(Affine<f64>),
    Vec(Affine<f64>, Affine<f64>),
}

#[derive(Debug, Clone, PartialEq)]
enum LinError {
    /// Evaluation of a constant subexpression fails; the interpreter would
    /// fail on this path too.
    Fails,
    NonAffine(String),
}

impl Lin {
    fn constant_value(&self) -> Option<Value> {
        match self {
            Lin::Num(a) if a.is_constant() => Some(Value::Num(a.constant)),
            Lin::Vec(x, y) if x.is_constant() && y.is_constant() => Some(Value::Vec2(x.constant, y.constant)),
            _ => None,
        }
    }

    fn from_value(v: &Value, dim: usize) -> Result<Lin, LinError> {
        match v {
            Value::Num(x) => Ok(Lin::Num(Affine::constant(*x, dim))),
            Value::Vec2(x, y) => Ok(Lin::Vec(Affine::constant(*x, dim), Affine::constant(*y, dim))),
            other => Err(LinError::NonAffine(format!("non-numeric constant {other}"))),
        }
    }
}

struct Linearizer<'a> {
    index: &'a IndexMap<String, usize>,
    dim: usize,
}

impl Linearizer<'_> {
    fn non_affine(e: &Expr) -> LinError {
        LinError::NonAffine(crate::dsl::expr_to_string(e))
    }

    fn lin(&self, e: &Expr) -> Result<Lin, LinError> {
        match e {
            Expr::Const(v) => Lin::from_value(v, self.dim),
            Expr::Ident(Ident::Param(p)) => match self.index.get(p) {
                Some(&j) => Ok(Lin::Num(Affine::var(j, self.dim))),
                None => Err(Self::non_affine(e)),
            },
            Expr::Ident(_) => Err(Self::non_affine(e)),
            Expr::Vec2(x, y) => match (self.lin(x)?, self.lin(y)?) {
                (Lin::Num(x), Lin::Num(y)) => Ok(Lin::Vec(x, y)),
                _ => Err(Self::non_affine(e)),
            },
            Expr::Unary(op, a) => {
                let a = self.lin(a)?;
                if let Some(v) = a.constant_value() {
                    let r = eval_unary(*op, &v).map_err(|_| LinError::Fails)?;
                    return Lin::from_value(&r, self.dim);
                }
                match (op, a) {
                    (UnOp::Neg, Lin::Num(a)) => Ok(Lin::Num(a.neg())),
                    (UnOp::Neg, Lin::Vec(x, y)) => Ok(Lin::Vec(x.neg(), y.neg())),
                    _ => Err(Self::non_affine(e)),
                }
            }
            Expr::Binary(op, l, r) => {
                let (l, r) = (self.lin(l)?, self.lin(r)?);
                if let (Some(a), Some(b)) = (l.constant_value(), r.constant_value()) {
                    let v = eval_binary(*op, &a, &b).map_err(|_| LinError::Fails)?;
                    return Lin::from_value(&v, self.dim);
                }
                let num = |l: &Lin| match l {
                    Lin::Num(a) if a.is_constant() => Some(a.constant),
                    _ => None,
                };
                match (op, &l, &r) {
                    (BinOp::Add, Lin::Num(a), Lin::Num(b)) => Ok(Lin::Num(a.add(b))),
                    (BinOp::Add, Lin::Vec(a, b), Lin::Vec(c, d)) => Ok(Lin::Vec(a.add(c), b.add(d))),
                    (BinOp::Sub, Lin::Num(a), Lin::Num(b)) => Ok(Lin::Num(a.sub(b))),
                    (BinOp::Sub, Lin::Vec(a, b), Lin::Vec(c, d)) => Ok(Lin::Vec(a.sub(c), b.sub(d))),
                    (BinOp::Mul, _, _) => {
                        let (k, other) = match (num(&l), num(&r)) {
                            (Some(k), _) => (k, &r),
                            (_, Some(k)) => (k, &l),
                            _ => return Err(Self::non_affine(e)),
                        };
                        Ok(match other {
                            Lin::Num(a) => Lin::Num(a.scale(&k)),
                            Lin::Vec(x, y) => Lin::Vec(x.scale(&k), y.scale(&k)),
                        })
                    }
                    (BinOp::Div, _, _) => match num(&r) {
                        Some(0.0) => Err(LinError::Fails),
                        Some(k) => Ok(match &l {
                            Lin::Num(a) => Lin::Num(a.div(&k)),
                            Lin::Vec(x, y) => Lin::Vec(x.div(&k), y.div(&k)),
                        }),
                        None => Err(Self::non_affine(e)),
                    },
                    (BinOp::Dot, Lin::Vec(a, b), Lin::Vec(c, d)) => {
                        match (l.constant_value(), r.constant_value()) {
                            (Some(Value::Vec2(x, y)), _) => Ok(Lin::Num(c.scale(&x).add(&d.scale(&y)))),
                            (_, Some(Value::Vec2(x, y))) => Ok(Lin::Num(a.scale(&x).add(&b.scale(&y)))),
                            _ => Err(Self::non_affine(e)),
                        }
                    }
                    _ => Err(Self::non_affine(e)),
                }
            }
        }
    }

    fn num(&self, e: &Expr) -> Result<Affine<f64>, LinError> {
        match self.lin(e)? {
            Lin::Num(a) => Ok(a),
            Lin::Vec(..) => Err(Self::non_affine(e)),
        }
    }
}

type Dnf = Vec<Vec<Atom<f64>>>;

fn and(a: Dnf, b: Dnf) -> Result<Dnf, RepairError> {
    if a.len().saturating_mul(b.len()) > MAX_PATHS {
        return Err(RepairError::FormulaTooLarge(MAX_PATHS));
    }
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in &a {
        for y in &b {
            out.push(x.iter().chain(y).cloned().collect());
        }
    }
    Ok(out)
}

fn or(mut a: Dnf, b: Dnf) -> Result<Dnf, RepairError> {
    a.extend(b);
    if a.len() > MAX_PATHS {
        return Err(RepairError::FormulaTooLarge(MAX_PATHS));
    }
    Ok(a)
}

fn rel(op: BinOp) -> Option<RelOp> {
    Some(match op {
        BinOp::Lt => RelOp::Lt,
        BinOp::Le => RelOp::Le,
        BinOp::Gt => RelOp::Gt,
        BinOp::Ge => RelOp::Ge,
        BinOp::Eq => RelOp::Eq,
        _ => return None,
    })
}

struct Lowering<'a> {
    lin: Linearizer<'a>,
    base: Vec<f64>,
}

impl Lowering<'_> {
    fn atom(&self, lhs: &Affine<f64>, op: RelOp, rhs: &Affine<f64>) -> Dnf {
        let atom = Atom { lhs: lhs.shift(&self.base), op, rhs: rhs.shift(&self.base) };
        if atom.is_constant() {
            return if op.holds(atom.lhs.constant, atom.rhs.constant) { vec![vec![]] } else { vec![] };
        }
        vec![vec![atom]]
    }

    /// DNF of `g` (or of its negation when `positive` is false), in
    /// negation normal form. `!=` and negated `==` split into `<` or `>`.
    fn literal(&self, g: &Expr, positive: bool) -> Result<Dnf, RepairError> {
        match g {
            Expr::Const(Value::Bool(b)) => Ok(if *b == positive { vec![vec![]] } else { vec![] }),
            Expr::Unary(UnOp::Not, a) => self.literal(a, !positive),
            Expr::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
                let (l, r) = (self.literal(l, positive)?, self.literal(r, positive)?);
                if (*op == BinOp::And) == positive {
                    and(l, r)
                } else {
                    or(l, r)
                }
            }
            Expr::Binary(op, l, r) if op.is_comparison() => {
                let sides = self.lin.num(l).and_then(|a| Ok((a, self.lin.num(r)?)));
                let (a, b) = match sides {
                    Ok(s) => s,
                    Err(LinError::Fails) => return Ok(vec![]),
                    Err(LinError::NonAffine(s)) => return Err(RepairError::NonAffine(s)),
                };
                let split = || or(self.atom(&a, RelOp::Lt, &b), self.atom(&a, RelOp::Gt, &b));
                match (rel(*op), positive) {
                    (Some(RelOp::Eq), false) => split(),
                    (None, true) => split(),
                    (None, false) => Ok(self.atom(&a, RelOp::Eq, &b)),
                    (Some(r), true) => Ok(self.atom(&a, r, &b)),
                    (Some(r), false) => Ok(self.atom(&a, r.negate().expect("non-equality"), &b)),
                }
            }
            other => Err(RepairError::NonAffine(crate::dsl::expr_to_string(other))),
        }
    }

    fn paths(&self, node: &RStmt, acc: Dnf, expected: &str, out: &mut Dnf) -> Result<(), RepairError> {
        if acc.is_empty() {
            return Ok(());
        }
        match node {
            RStmt::Return(s) => {
                if s == expected {
                    out.extend(acc);
                    if out.len() > MAX_PATHS {
                        return Err(RepairError::FormulaTooLarge(MAX_PATHS));
                    }
                }
                Ok(())
            }
            RStmt::If(g, t, f) => {
                self.paths(t, and(acc.clone(), self.literal(g, true)?)?, expected, out)?;
                self.paths(f, and(acc, self.literal(g, false)?)?, expected, out)
            }
        }
    }
}

pub(crate) fn rep_index(cls: &Classification) -> IndexMap<String, usize> {
    cls.rep.iter().enumerate().map(|(j, p)| (p.clone(), j)).collect()
}

/// Formula over the adjustments of `cls.rep` (in that order) that holds
/// exactly when the step at `tau` moves to `c.expected`.
pub fn correct_one_with(
    f: &TransitionFn,
    cls: &Classification,
    tau: &crate::dsl::TraceElement,
    params: &ParamMap,
    c: &Correction,
) -> Result<PathFormula<f64>, RepairError> {
    if !f.has_state(&c.expected) {
        return Err(RepairError::UnknownState(c.expected.clone()));
    }
    let residual = make_residual_with(f, cls, tau, params).map_err(|source| RepairError::Eval { t: tau.t, source })?;
    let index = rep_index(cls);
    let lowering = Lowering {
        lin: Linearizer { index: &index, dim: cls.rep.len() },
        base: cls.rep.iter().map(|p| params[p.as_str()]).collect(),
    };
    let mut out = vec![];
    lowering.paths(&residual.body, vec![vec![]], &c.expected, &mut out)?;
    Ok(PathFormula { paths: out })
}
