//! Operator table: type signatures, concrete semantics, and the linearity
//! class consumed by repairability analysis. Adding an operator means adding
//! one arm to each function below.

use std::f64::consts::PI;

use thiserror::Error;

use super::ast::{BinOp, Type, UnOp, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unbound identifier {0}")]
    Unbound(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
}

impl EvalError {
    pub fn kind(&self) -> &'static str {
        match self {
            EvalError::DivisionByZero => "DivisionByZero",
            EvalError::Domain(_) => "DomainError",
            EvalError::Unbound(_) => "UnboundIdentifier",
            EvalError::TypeMismatch(_) => "TypeError",
        }
    }
}

/// How an operator combines parameter-dependent operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linearity {
    /// Preserves affinity in every operand.
    Linear,
    /// Affine only when the operand is parameter-free.
    Nonlinear,
    /// Affine when at most one operand depends on parameters.
    Bilinear,
    /// Affine when the right operand (the divisor) is parameter-free.
    Quotient,
}

pub fn unary_symbol(op: UnOp) -> &'static str {
    match op {
        UnOp::Neg => "-",
        UnOp::Not => "!",
        UnOp::Sin => "sin",
        UnOp::Cos => "cos",
        UnOp::Abs => "abs",
        UnOp::Norm => "norm",
        UnOp::AngleMod => "anglemod",
    }
}

pub fn unary_from_name(name: &str) -> Option<UnOp> {
    Some(match name {
        "sin" => UnOp::Sin,
        "cos" => UnOp::Cos,
        "abs" => UnOp::Abs,
        "norm" => UnOp::Norm,
        "anglemod" => UnOp::AngleMod,
        _ => return None,
    })
}

pub fn binary_symbol(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::Lt => "<",
        BinOp::Gt => ">",
        BinOp::Le => "<=",
        BinOp::Ge => ">=",
        BinOp::Eq => "==",
        BinOp::Ne => "!=",
        BinOp::And => "&&",
        BinOp::Or => "||",
        BinOp::Dot => "dot",
    }
}

pub fn unary_linearity(op: UnOp) -> Linearity {
    match op {
        UnOp::Neg | UnOp::Not => Linearity::Linear,
        UnOp::Sin | UnOp::Cos | UnOp::Abs | UnOp::Norm | UnOp::AngleMod => Linearity::Nonlinear,
    }
}

pub fn binary_linearity(op: BinOp) -> Linearity {
    match op {
        BinOp::Mul | BinOp::Dot => Linearity::Bilinear,
        BinOp::Div => Linearity::Quotient,
        _ => Linearity::Linear,
    }
}

pub fn unary_type(op: UnOp, arg: Type) -> Option<Type> {
    use Type::*;
    match (op, arg) {
        (UnOp::Neg, Num) => Some(Num),
        (UnOp::Neg, Vec2) => Some(Vec2),
        (UnOp::Not, Bool) => Some(Bool),
        (UnOp::Sin | UnOp::Cos | UnOp::Abs | UnOp::AngleMod, Num) => Some(Num),
        (UnOp::Norm, Num | Vec2) => Some(Num),
        _ => None,
    }
}

pub fn binary_type(op: BinOp, l: Type, r: Type) -> Option<Type> {
    use Type::*;
    match (op, l, r) {
        (BinOp::Add | BinOp::Sub, Num, Num) => Some(Num),
        (BinOp::Add | BinOp::Sub, Vec2, Vec2) => Some(Vec2),
        (BinOp::Mul, Num, Num) => Some(Num),
        (BinOp::Mul, Num, Vec2) | (BinOp::Mul, Vec2, Num) => Some(Vec2),
        (BinOp::Div, Num, Num) => Some(Num),
        (BinOp::Div, Vec2, Num) => Some(Vec2),
        (BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge, Num, Num) => Some(Bool),
        (BinOp::Eq | BinOp::Ne, Num, Num) | (BinOp::Eq | BinOp::Ne, State, State) => Some(Bool),
        (BinOp::And | BinOp::Or, Bool, Bool) => Some(Bool),
        (BinOp::Dot, Vec2, Vec2) => Some(Num),
        _ => None,
    }
}

/// Normalizes an angle to (-pi, pi]. Values already in range are returned
/// unchanged so that exact inputs stay exact.
pub fn angle_mod(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let r = (x + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

fn finite(v: Value) -> Result<Value, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Domain(format!("non-finite result {v}")))
    }
}

fn mismatch(what: String) -> EvalError {
    EvalError::TypeMismatch(what)
}

pub fn eval_unary(op: UnOp, v: &Value) -> Result<Value, EvalError> {
    use Value::*;
    let out = match (op, v) {
        (UnOp::Neg, Num(x)) => Num(-x),
        (UnOp::Neg, Vec2(x, y)) => Vec2(-x, -y),
        (UnOp::Not, Bool(b)) => Bool(!b),
        (UnOp::Sin, Num(x)) => Num(x.sin()),
        (UnOp::Cos, Num(x)) => Num(x.cos()),
        (UnOp::Abs | UnOp::Norm, Num(x)) => Num(x.abs()),
        (UnOp::Norm, Vec2(x, y)) => Num(x.hypot(*y)),
        (UnOp::AngleMod, Num(x)) => {
            if !x.is_finite() {
                return Err(EvalError::Domain(format!("anglemod of {x}")));
            }
            Num(angle_mod(*x))
        }
        _ => return Err(mismatch(format!("{} applied to {v}", unary_symbol(op)))),
    };
    finite(out)
}

/// Strict binary evaluation. `&&`/`||` short-circuiting is the caller's job;
/// this function sees both operands already evaluated.
pub fn eval_binary(op: BinOp, l: &Value, r: &Value) -> Result<Value, EvalError> {
    use Value::*;
    let out = match (op, l, r) {
        (BinOp::Add, Num(a), Num(b)) => Num(a + b),
        (BinOp::Add, Vec2(a, b), Vec2(c, d)) => Vec2(a + c, b + d),
        (BinOp::Sub, Num(a), Num(b)) => Num(a - b),
        (BinOp::Sub, Vec2(a, b), Vec2(c, d)) => Vec2(a - c, b - d),
        (BinOp::Mul, Num(a), Num(b)) => Num(a * b),
        (BinOp::Mul, Num(k), Vec2(x, y)) => Vec2(k * x, k * y),
        (BinOp::Mul, Vec2(x, y), Num(k)) => Vec2(x * k, y * k),
        (BinOp::Div, _, Num(b)) if *b == 0.0 => return Err(EvalError::DivisionByZero),
        (BinOp::Div, Num(a), Num(b)) => Num(a / b),
        (BinOp::Div, Vec2(x, y), Num(k)) => Vec2(x / k, y / k),
        (BinOp::Lt, Num(a), Num(b)) => Bool(a < b),
        (BinOp::Gt, Num(a), Num(b)) => Bool(a > b),
        (BinOp::Le, Num(a), Num(b)) => Bool(a <= b),
        (BinOp::Ge, Num(a), Num(b)) => Bool(a >= b),
        (BinOp::Eq, Num(a), Num(b)) => Bool(a == b),
        (BinOp::Ne, Num(a), Num(b)) => Bool(a != b),
        (BinOp::Eq, State(a), State(b)) => Bool(a == b),
        (BinOp::Ne, State(a), State(b)) => Bool(a != b),
        (BinOp::And, Bool(a), Bool(b)) => Bool(*a && *b),
        (BinOp::Or, Bool(a), Bool(b)) => Bool(*a || *b),
        (BinOp::Dot, Vec2(a, b), Vec2(c, d)) => Num(a * c + b * d),
        _ => {
            return Err(mismatch(format!(
                "{l} {} {r}",
                binary_symbol(op)
            )))
        }
    };
    finite(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_mod_range() {
        assert_eq!(angle_mod(PI), PI);
        assert_eq!(angle_mod(-PI), PI);
        assert_eq!(angle_mod(PI / 60.0), PI / 60.0);
        assert!((angle_mod(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((angle_mod(-7.0 * PI / 2.0) - PI / 2.0).abs() < 1e-12);
        for k in -50..50 {
            let a = angle_mod(k as f64 * 0.37);
            assert!(a > -PI && a <= PI);
        }
    }

    #[test]
    fn division_by_zero() {
        assert_eq!(
            eval_binary(BinOp::Div, &Value::Num(1.0), &Value::Num(0.0)),
            Err(EvalError::DivisionByZero)
        );
        assert_eq!(
            eval_binary(BinOp::Div, &Value::Vec2(1.0, 1.0), &Value::Num(0.0)),
            Err(EvalError::DivisionByZero)
        );
    }

    #[test]
    fn overflow_is_a_domain_error() {
        let r = eval_binary(BinOp::Mul, &Value::Num(1e200), &Value::Num(1e200));
        assert!(matches!(r, Err(EvalError::Domain(_))));
    }

    #[test]
    fn norm_of_scalar_is_abs() {
        assert_eq!(eval_unary(UnOp::Norm, &Value::Num(-40.0)), Ok(Value::Num(40.0)));
        assert_eq!(eval_unary(UnOp::Norm, &Value::Vec2(30.0, 40.0)), Ok(Value::Num(50.0)));
    }

    #[test]
    fn signatures_agree_with_evaluation() {
        let samples = [
            Value::Num(1.5),
            Value::Bool(true),
            Value::Vec2(1.0, 2.0),
            Value::State("A".into()),
        ];
        let unops = [UnOp::Neg, UnOp::Not, UnOp::Sin, UnOp::Cos, UnOp::Abs, UnOp::Norm, UnOp::AngleMod];
        for op in unops {
            for v in &samples {
                let ty = unary_type(op, v.ty());
                let r = eval_unary(op, v);
                assert_eq!(ty.is_some(), r.is_ok(), "{op:?} {v}");
                if let (Some(t), Ok(out)) = (ty, r) {
                    assert_eq!(t, out.ty());
                }
            }
        }
        let binops = [
            BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Lt, BinOp::Gt, BinOp::Le,
            BinOp::Ge, BinOp::Eq, BinOp::Ne, BinOp::And, BinOp::Or, BinOp::Dot,
        ];
        for op in binops {
            for l in &samples {
                for r in &samples {
                    let ty = binary_type(op, l.ty(), r.ty());
                    let out = eval_binary(op, l, r);
                    assert_eq!(ty.is_some(), out.is_ok(), "{op:?} {l} {r}");
                    if let (Some(t), Ok(v)) = (ty, out) {
                        assert_eq!(t, v.ty());
                    }
                }
            }
        }
    }
}
