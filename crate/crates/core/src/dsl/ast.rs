use std::fmt;

use indexmap::IndexMap;

/// Runtime value of an expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Bool(bool),
    Vec2(f64, f64),
    State(String),
}

impl Value {
    pub fn ty(&self) -> Type {
        match self {
            Value::Num(_) => Type::Num,
            Value::Bool(_) => Type::Bool,
            Value::Vec2(..) => Type::Vec2,
            Value::State(_) => Type::State,
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_state(&self) -> Option<&str> {
        match self {
            Value::State(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Value::Num(x) => x.is_finite(),
            Value::Vec2(x, y) => x.is_finite() && y.is_finite(),
            _ => true,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Vec2(x, y) => write!(f, "<{x}, {y}>"),
            Value::State(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Type {
    Num,
    Bool,
    Vec2,
    State,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Num => "num",
            Type::Bool => "bool",
            Type::Vec2 => "vec2",
            Type::State => "state",
        })
    }
}

/// The four identifier namespaces of a transition function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Namespace {
    State,
    Input,
    Var,
    Param,
}

impl fmt::Display for Namespace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Namespace::State => "state",
            Namespace::Input => "in",
            Namespace::Var => "var",
            Namespace::Param => "param",
        })
    }
}

/// A namespaced identifier. `State` is the bare `state` keyword.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ident {
    State,
    Input(String),
    Var(String),
    Param(String),
}

impl Ident {
    pub fn namespace(&self) -> Namespace {
        match self {
            Ident::State => Namespace::State,
            Ident::Input(_) => Namespace::Input,
            Ident::Var(_) => Namespace::Var,
            Ident::Param(_) => Namespace::Param,
        }
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ident::State => f.write_str("state"),
            Ident::Input(n) => write!(f, "in:{n}"),
            Ident::Var(n) => write!(f, "var:{n}"),
            Ident::Param(n) => write!(f, "param:{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
    Sin,
    Cos,
    Abs,
    Norm,
    AngleMod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    Dot,
}

impl BinOp {
    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Value),
    Ident(Ident),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Vec2(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn num(x: f64) -> Self {
        Expr::Const(Value::Num(x))
    }

    pub fn state_lit(s: impl Into<String>) -> Self {
        Expr::Const(Value::State(s.into()))
    }

    pub fn param(n: impl Into<String>) -> Self {
        Expr::Ident(Ident::Param(n.into()))
    }

    pub fn input(n: impl Into<String>) -> Self {
        Expr::Ident(Ident::Input(n.into()))
    }

    pub fn var(n: impl Into<String>) -> Self {
        Expr::Ident(Ident::Var(n.into()))
    }

    pub fn unary(op: UnOp, e: Expr) -> Self {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Self {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn as_const(&self) -> Option<&Value> {
        match self {
            Expr::Const(v) => Some(v),
            _ => None,
        }
    }

    /// Visits every identifier occurring in the expression, left to right.
    pub fn for_each_ident(&self, f: &mut impl FnMut(&Ident)) {
        match self {
            Expr::Const(_) => {}
            Expr::Ident(id) => f(id),
            Expr::Unary(_, e) => e.for_each_ident(f),
            Expr::Binary(_, l, r) | Expr::Vec2(l, r) => {
                l.for_each_ident(f);
                r.for_each_ident(f);
            }
        }
    }

    pub fn mentions(&self, pred: impl Fn(&Ident) -> bool) -> bool {
        let mut hit = false;
        self.for_each_ident(&mut |id| hit |= pred(id));
        hit
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Return(Expr),
    Assign(String, Expr),
    If(Expr, Box<Stmt>, Box<Stmt>),
    Block(Vec<Stmt>),
}

impl Stmt {
    pub fn if_else(guard: Expr, then: Stmt, otherwise: Stmt) -> Self {
        Stmt::If(guard, Box::new(then), Box::new(otherwise))
    }

    /// True when every control path through the statement ends in a return.
    pub fn always_returns(&self) -> bool {
        match self {
            Stmt::Return(_) => true,
            Stmt::Assign(..) => false,
            Stmt::If(_, t, e) => t.always_returns() && e.always_returns(),
            Stmt::Block(stmts) => stmts.iter().any(Stmt::always_returns),
        }
    }
}

/// Declared type and, for persistent variables, the initial value.
#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub ty: Type,
    /// `None` marks a scratch variable: local to one transition step, never
    /// recorded in traces, and required to be assigned before it is read.
    pub init: Option<Value>,
}

impl VarDecl {
    pub fn is_persistent(&self) -> bool {
        self.init.is_some()
    }
}

/// A parsed and typechecked transition function with its declarations.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionFn {
    pub states: Vec<String>,
    pub start: String,
    pub end: String,
    pub inputs: IndexMap<String, Type>,
    pub vars: IndexMap<String, VarDecl>,
    pub params: Vec<String>,
    pub body: Stmt,
}

impl TransitionFn {
    pub fn has_state(&self, s: &str) -> bool {
        self.states.iter().any(|x| x == s)
    }

    pub fn has_param(&self, p: &str) -> bool {
        self.params.iter().any(|x| x == p)
    }

    /// Variables recorded in traces, in declaration order.
    pub fn persistent_vars(&self) -> impl Iterator<Item = (&String, &VarDecl)> {
        self.vars.iter().filter(|(_, d)| d.is_persistent())
    }

    pub fn initial_vars(&self) -> IndexMap<String, Value> {
        self.persistent_vars()
            .map(|(n, d)| (n.clone(), d.init.clone().expect("persistent")))
            .collect()
    }
}
