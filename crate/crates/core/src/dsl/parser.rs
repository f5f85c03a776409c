//! Recursive-descent parser for `.rsm` sources.

use indexmap::IndexMap;

use super::ast::{BinOp, Expr, Ident, Stmt, TransitionFn, Type, UnOp, Value, VarDecl};
use super::lexer::{lex, Pos, Tok, Token};
use super::ops::unary_from_name;
use super::DslError;

pub struct Parser {
    toks: Vec<Token>,
    i: usize,
}

type PResult<T> = Result<T, DslError>;

impl Parser {
    pub fn new(src: &str) -> PResult<Self> {
        let toks = lex(src).map_err(|e| DslError::Syntax {
            pos: e.pos,
            expected: vec![],
            found: e.msg,
        })?;
        Ok(Parser { toks, i: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let j = (self.i + k).min(self.toks.len() - 1);
        &self.toks[j].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(DslError::Syntax {
            pos: self.pos(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(x) if x == w)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.fail(&[&format!("`{s}`")])
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<()> {
        if self.is_word(w) {
            self.bump();
            Ok(())
        } else {
            self.fail(&[&format!("`{w}`")])
        }
    }

    fn name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Word(w) => {
                self.bump();
                Ok(w)
            }
            _ => self.fail(&["identifier"]),
        }
    }

    pub fn expect_eof(&self) -> PResult<()> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.fail(&["end of input"])
        }
    }

    // ---- declarations -------------------------------------------------

    pub fn parse_file(&mut self) -> PResult<TransitionFn> {
        let mut states: Option<(Vec<String>, String, String)> = None;
        let mut inputs = IndexMap::new();
        let mut vars = IndexMap::new();
        let mut params = Vec::new();
        loop {
            if self.is_word("states") {
                self.bump();
                let names = self.name_set()?;
                self.expect_word("start")?;
                let start = self.state_name()?;
                self.expect_word("end")?;
                let end = self.state_name()?;
                self.expect_sym(";")?;
                states = Some((names, start, end));
            } else if self.is_word("inputs") {
                self.bump();
                self.expect_sym("{")?;
                while !self.is_sym("}") {
                    let pos = self.pos();
                    let n = self.name()?;
                    self.expect_sym(":")?;
                    let ty = self.signal_type()?;
                    if inputs.insert(n.clone(), ty).is_some() {
                        return Err(duplicate(pos, &n));
                    }
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym("}")?;
                self.expect_sym(";")?;
            } else if self.is_word("vars") {
                self.bump();
                self.expect_sym("{")?;
                while !self.is_sym("}") {
                    let pos = self.pos();
                    let n = self.name()?;
                    self.expect_sym(":")?;
                    let ty = self.signal_type()?;
                    let init = if self.eat_sym("=") { Some(self.literal()?) } else { None };
                    if vars.insert(n.clone(), VarDecl { ty, init }).is_some() {
                        return Err(duplicate(pos, &n));
                    }
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym("}")?;
                self.expect_sym(";")?;
            } else if self.is_word("params") {
                self.bump();
                let pos = self.pos();
                let names = self.name_set()?;
                for (k, n) in names.iter().enumerate() {
                    if names[..k].contains(n) {
                        return Err(duplicate(pos, n));
                    }
                }
                params = names;
                self.expect_sym(";")?;
            } else if self.is_word("transition") {
                self.bump();
                break;
            } else {
                return self.fail(&["`states`", "`inputs`", "`vars`", "`params`", "`transition`"]);
            }
        }
        let Some((states, start, end)) = states else {
            return Err(DslError::Syntax {
                pos: self.pos(),
                expected: vec!["`states` declaration before `transition`".into()],
                found: "`transition`".into(),
            });
        };
        let body = self.block()?;
        self.expect_eof()?;
        Ok(TransitionFn { states, start, end, inputs, vars, params, body })
    }

    fn name_set(&mut self) -> PResult<Vec<String>> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.is_sym("}") {
            out.push(self.state_name()?);
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym("}")?;
        Ok(out)
    }

    fn state_name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Word(w) | Tok::Str(w) => {
                self.bump();
                Ok(w)
            }
            _ => self.fail(&["name"]),
        }
    }

    fn signal_type(&mut self) -> PResult<Type> {
        if self.is_word("num") {
            self.bump();
            Ok(Type::Num)
        } else if self.is_word("vec2") {
            self.bump();
            Ok(Type::Vec2)
        } else {
            self.fail(&["`num`", "`vec2`"])
        }
    }

    fn signed_number(&mut self) -> PResult<f64> {
        let neg = self.eat_sym("-");
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(if neg { -x } else { x })
            }
            Tok::Word(w) if w == "pi" => {
                self.bump();
                Ok(if neg { -std::f64::consts::PI } else { std::f64::consts::PI })
            }
            _ => self.fail(&["number"]),
        }
    }

    fn literal(&mut self) -> PResult<Value> {
        if self.eat_sym("<") {
            let x = self.signed_number()?;
            self.expect_sym(",")?;
            let y = self.signed_number()?;
            self.expect_sym(">")?;
            Ok(Value::Vec2(x, y))
        } else {
            Ok(Value::Num(self.signed_number()?))
        }
    }

    // ---- statements ---------------------------------------------------

    pub fn block(&mut self) -> PResult<Stmt> {
        self.expect_sym("{")?;
        let mut stmts = Vec::new();
        while !self.is_sym("}") {
            if matches!(self.peek(), Tok::Eof) {
                return self.fail(&["`}`"]);
            }
            stmts.push(self.stmt()?);
        }
        self.expect_sym("}")?;
        Ok(Stmt::Block(stmts))
    }

    pub fn stmt(&mut self) -> PResult<Stmt> {
        if self.is_sym("{") {
            return self.block();
        }
        if self.is_word("return") {
            self.bump();
            let e = self.expr()?;
            self.expect_sym(";")?;
            return Ok(Stmt::Return(e));
        }
        if self.is_word("if") {
            self.bump();
            self.expect_sym("(")?;
            let g = self.expr()?;
            self.expect_sym(")")?;
            let then = self.stmt()?;
            let otherwise = if self.is_word("else") {
                self.bump();
                self.stmt()?
            } else {
                Stmt::Block(vec![])
            };
            return Ok(Stmt::if_else(g, then, otherwise));
        }
        if self.is_word("var") && matches!(self.peek_at(1), Tok::Sym(":")) {
            self.bump();
            self.bump();
            let n = self.name()?;
            self.expect_sym(":=")?;
            let e = self.expr()?;
            self.expect_sym(";")?;
            return Ok(Stmt::Assign(n, e));
        }
        self.fail(&["`return`", "`if`", "`var:<name> :=`", "`{`"])
    }

    // ---- expressions --------------------------------------------------

    pub fn expr(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut l = self.and_expr()?;
        while self.eat_sym("||") {
            let r = self.and_expr()?;
            l = Expr::binary(BinOp::Or, l, r);
        }
        Ok(l)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut l = self.cmp_expr()?;
        while self.eat_sym("&&") {
            let r = self.cmp_expr()?;
            l = Expr::binary(BinOp::And, l, r);
        }
        Ok(l)
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let l = self.add_expr()?;
        let op = match self.peek() {
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">=") => BinOp::Ge,
            Tok::Sym("==") => BinOp::Eq,
            Tok::Sym("!=") => BinOp::Ne,
            _ => return Ok(l),
        };
        self.bump();
        let r = self.add_expr()?;
        Ok(Expr::binary(op, l, r))
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut l = self.mul_expr()?;
        loop {
            let op = if self.is_sym("+") {
                BinOp::Add
            } else if self.is_sym("-") {
                BinOp::Sub
            } else {
                return Ok(l);
            };
            self.bump();
            let r = self.mul_expr()?;
            l = Expr::binary(op, l, r);
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut l = self.unary_expr()?;
        loop {
            let op = if self.is_sym("*") {
                BinOp::Mul
            } else if self.is_sym("/") {
                BinOp::Div
            } else {
                return Ok(l);
            };
            self.bump();
            let r = self.unary_expr()?;
            l = Expr::binary(op, l, r);
        }
    }

    fn unary_expr(&mut self) -> PResult<Expr> {
        if self.eat_sym("-") {
            // `-<literal>` is a negative constant, not a negation node.
            if let Tok::Num(x) = *self.peek() {
                self.bump();
                return Ok(Expr::num(-x));
            }
            let e = self.unary_expr()?;
            return Ok(Expr::unary(UnOp::Neg, e));
        }
        if self.eat_sym("!") {
            let e = self.unary_expr()?;
            return Ok(Expr::unary(UnOp::Not, e));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr::num(x))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::state_lit(s))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("<") => {
                self.bump();
                let x = self.add_expr()?;
                self.expect_sym(",")?;
                let y = self.add_expr()?;
                self.expect_sym(">")?;
                Ok(Expr::Vec2(Box::new(x), Box::new(y)))
            }
            Tok::Word(w) => {
                let prefixed = matches!(self.peek_at(1), Tok::Sym(":"));
                match w.as_str() {
                    "true" => {
                        self.bump();
                        Ok(Expr::Const(Value::Bool(true)))
                    }
                    "false" => {
                        self.bump();
                        Ok(Expr::Const(Value::Bool(false)))
                    }
                    "pi" => {
                        self.bump();
                        Ok(Expr::num(std::f64::consts::PI))
                    }
                    "state" => {
                        self.bump();
                        Ok(Expr::Ident(Ident::State))
                    }
                    "in" | "var" | "param" if prefixed => {
                        self.bump();
                        self.bump();
                        let n = self.name()?;
                        Ok(Expr::Ident(match w.as_str() {
                            "in" => Ident::Input(n),
                            "var" => Ident::Var(n),
                            _ => Ident::Param(n),
                        }))
                    }
                    "dot" => {
                        self.bump();
                        self.expect_sym("(")?;
                        let a = self.expr()?;
                        self.expect_sym(",")?;
                        let b = self.expr()?;
                        self.expect_sym(")")?;
                        Ok(Expr::binary(BinOp::Dot, a, b))
                    }
                    _ => match unary_from_name(&w) {
                        Some(op) => {
                            self.bump();
                            self.expect_sym("(")?;
                            let a = self.expr()?;
                            self.expect_sym(")")?;
                            Ok(Expr::unary(op, a))
                        }
                        None => self.fail(&["expression"]),
                    },
                }
            }
            _ => self.fail(&["expression"]),
        }
    }
}

fn duplicate(pos: Pos, name: &str) -> DslError {
    DslError::Syntax {
        pos,
        expected: vec!["a fresh name".into()],
        found: format!("duplicate declaration of `{name}`"),
    }
}

/// Parses a standalone statement (a block, an `if`, ...), without declarations.
pub fn parse_stmt(src: &str) -> PResult<Stmt> {
    let mut p = Parser::new(src)?;
    let s = p.stmt()?;
    p.expect_eof()?;
    Ok(s)
}

pub fn parse_expr(src: &str) -> PResult<Expr> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}
