//! Concrete evaluation of expressions and transition functions, and the
//! closed-loop execution of a full state machine.

use indexmap::IndexMap;
use thiserror::Error;

use crate::dsl::{eval_binary, eval_unary, BinOp, EvalError, Expr, Ident, ParamMap, Stmt, Trace, TraceElement, TransitionFn, Value};

/// Identifier lookup used by [`eval_expr`].
pub trait Bindings {
    fn state(&self) -> Option<&str>;
    fn input(&self, name: &str) -> Option<&Value>;
    fn var(&self, name: &str) -> Option<&Value>;
    fn param(&self, name: &str) -> Option<f64>;
}

/// Everything a transition step can read.
#[derive(Debug, Clone, Copy)]
pub struct Env<'a> {
    pub state: &'a str,
    pub ins: &'a IndexMap<String, Value>,
    pub vars: &'a IndexMap<String, Value>,
    pub params: &'a ParamMap,
}

impl<'a> Env<'a> {
    pub fn new(tau: &'a TraceElement, params: &'a ParamMap) -> Self {
        Env { state: &tau.state, ins: &tau.ins, vars: &tau.vars, params }
    }
}

impl Bindings for Env<'_> {
    fn state(&self) -> Option<&str> {
        Some(self.state)
    }
    fn input(&self, name: &str) -> Option<&Value> {
        self.ins.get(name)
    }
    fn var(&self, name: &str) -> Option<&Value> {
        self.vars.get(name)
    }
    fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name)
    }
}

/// Binds parameters only; the environment residual guards are evaluated in.
impl Bindings for ParamMap {
    fn state(&self) -> Option<&str> {
        None
    }
    fn input(&self, _: &str) -> Option<&Value> {
        None
    }
    fn var(&self, _: &str) -> Option<&Value> {
        None
    }
    fn param(&self, name: &str) -> Option<f64> {
        self.get(name)
    }
}

fn lookup<B: Bindings + ?Sized>(id: &Ident, env: &B) -> Result<Value, EvalError> {
    let v = match id {
        Ident::State => env.state().map(|s| Value::State(s.to_string())),
        Ident::Input(n) => env.input(n).cloned(),
        Ident::Var(n) => env.var(n).cloned(),
        Ident::Param(n) => env.param(n).map(Value::Num),
    };
    v.ok_or_else(|| EvalError::Unbound(id.to_string()))
}

fn truth(v: Value) -> Result<bool, EvalError> {
    v.as_bool().ok_or_else(|| EvalError::TypeMismatch(format!("expected bool, found {v}")))
}

/// Strict evaluation with short-circuit `&&` and `||`.
pub fn eval_expr<B: Bindings + ?Sized>(e: &Expr, env: &B) -> Result<Value, EvalError> {
    match e {
        Expr::Const(v) => Ok(v.clone()),
        Expr::Ident(id) => lookup(id, env),
        Expr::Vec2(x, y) => {
            let x = eval_expr(x, env)?;
            let y = eval_expr(y, env)?;
            match (x, y) {
                (Value::Num(x), Value::Num(y)) => Ok(Value::Vec2(x, y)),
                (x, y) => Err(EvalError::TypeMismatch(format!("vector of {x} and {y}"))),
            }
        }
        Expr::Unary(op, a) => eval_unary(*op, &eval_expr(a, env)?),
        Expr::Binary(BinOp::And, l, r) => {
            if !truth(eval_expr(l, env)?)? {
                return Ok(Value::Bool(false));
            }
            Ok(Value::Bool(truth(eval_expr(r, env)?)?))
        }
        Expr::Binary(BinOp::Or, l, r) => {
            if truth(eval_expr(l, env)?)? {
                return Ok(Value::Bool(true));
            }
            Ok(Value::Bool(truth(eval_expr(r, env)?)?))
        }
        Expr::Binary(op, l, r) => eval_binary(*op, &eval_expr(l, env)?, &eval_expr(r, env)?),
    }
}

/// Step-local view: assignments shadow the recorded variables.
struct Frame<'a> {
    base: Env<'a>,
    locals: IndexMap<String, Value>,
}

impl Bindings for Frame<'_> {
    fn state(&self) -> Option<&str> {
        Some(self.base.state)
    }
    fn input(&self, name: &str) -> Option<&Value> {
        self.base.ins.get(name)
    }
    fn var(&self, name: &str) -> Option<&Value> {
        self.locals.get(name).or_else(|| self.base.vars.get(name))
    }
    fn param(&self, name: &str) -> Option<f64> {
        self.base.params.get(name)
    }
}

fn exec(s: &Stmt, frame: &mut Frame<'_>) -> Result<Option<String>, EvalError> {
    match s {
        Stmt::Return(e) => match eval_expr(e, frame)? {
            Value::State(s) => Ok(Some(s)),
            v => Err(EvalError::TypeMismatch(format!("return of non-state {v}"))),
        },
        Stmt::Assign(n, e) => {
            let v = eval_expr(e, frame)?;
            frame.locals.insert(n.clone(), v);
            Ok(None)
        }
        Stmt::If(g, t, f) => {
            if truth(eval_expr(g, frame)?)? {
                exec(t, frame)
            } else {
                exec(f, frame)
            }
        }
        Stmt::Block(stmts) => {
            for st in stmts {
                if let Some(r) = exec(st, frame)? {
                    return Ok(Some(r));
                }
            }
            Ok(None)
        }
    }
}

/// Runs the transition body once. Variable assignments inside the body are
/// local to the step and discarded.
pub fn transition(f: &TransitionFn, env: Env<'_>) -> Result<String, EvalError> {
    let mut frame = Frame { base: env, locals: IndexMap::new() };
    exec(&f.body, &mut frame)?.ok_or_else(|| EvalError::Domain("transition fell through without return".into()))
}

pub fn step_transition(f: &TransitionFn, tau: &TraceElement, params: &ParamMap) -> Result<String, EvalError> {
    transition(f, Env::new(tau, params))
}

/// Emission function: picks outputs for the newly selected state and returns
/// the updated persistent variables. It never sees a mutable state.
pub trait Emission {
    type Output;
    fn emit(
        &self,
        state: &str,
        ins: &IndexMap<String, Value>,
        vars: &IndexMap<String, Value>,
    ) -> (Self::Output, IndexMap<String, Value>);
}

/// Supplies inputs each step and receives the emitted outputs, which lets a
/// simulator close the loop.
pub trait World<O> {
    /// Inputs for step `t`, or `None` when the stream is exhausted.
    fn sense(&mut self, t: u64) -> Option<IndexMap<String, Value>>;
    fn act(&mut self, output: &O);
}

/// Open-loop input stream that ignores outputs.
pub struct Stream<I>(pub I);

impl<O, I: Iterator<Item = IndexMap<String, Value>>> World<O> for Stream<I> {
    fn sense(&mut self, _: u64) -> Option<IndexMap<String, Value>> {
        self.0.next()
    }
    fn act(&mut self, _: &O) {}
}

pub struct Rsm<E> {
    pub transition: TransitionFn,
    pub emission: E,
    pub params: ParamMap,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("step {t}: {source}")]
pub struct StepError {
    pub t: u64,
    pub source: EvalError,
}

impl<E: Emission> Rsm<E> {
    pub fn new(transition: TransitionFn, emission: E, params: ParamMap) -> Self {
        Rsm { transition, emission, params }
    }

    /// Executes until the end state is recorded, the world runs out of
    /// inputs, or `max_steps` elements have been recorded. Each element is
    /// the snapshot taken before that step's transition.
    pub fn run<W: World<E::Output>>(&self, world: &mut W, max_steps: u64) -> Result<Trace, StepError> {
        let f = &self.transition;
        let mut trace = Trace::default();
        let mut state = f.start.clone();
        let mut vars = f.initial_vars();
        for t in 0..max_steps {
            let Some(ins) = world.sense(t) else { break };
            let tau = TraceElement { t, state, ins, vars };
            if tau.state == f.end {
                trace.push(tau);
                break;
            }
            let next = step_transition(f, &tau, &self.params).map_err(|source| StepError { t, source })?;
            let (out, new_vars) = self.emission.emit(&next, &tau.ins, &tau.vars);
            debug_assert!(new_vars.keys().eq(tau.vars.keys()), "emission changed the variable signature");
            world.act(&out);
            state = next;
            vars = new_vars;
            trace.push(tau);
        }
        Ok(trace)
    }
}

pub fn run_rsm<E: Emission, W: World<E::Output>>(
    rsm: &Rsm<E>,
    world: &mut W,
    max_steps: u64,
) -> Result<Trace, StepError> {
    rsm.run(world, max_steps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub t: u64,
    pub replayed: Result<String, EvalError>,
    pub recorded: String,
}

/// Replays each element whose successor (timestep `t + 1`) is present and
/// reports where the replayed next state differs from the recorded one.
pub fn check_trace_consistency(f: &TransitionFn, params: &ParamMap, trace: &Trace) -> Vec<Mismatch> {
    trace
        .elements()
        .windows(2)
        .filter(|w| w[1].t == w[0].t + 1)
        .filter_map(|w| {
            let replayed = step_transition(f, &w[0], params);
            (replayed.as_deref() != Ok(w[1].state.as_str())).then(|| Mismatch {
                t: w[0].t,
                replayed,
                recorded: w[1].state.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::dsl::{parse_expr, parse_params, parse_rsm, parse_trace};

    const ATTACKER: &str = include_str!("../fixtures/worked_example/attacker.rsm");
    const PARAMS: &str = include_str!("../fixtures/worked_example/params.json");
    const TRACE: &str = include_str!("../fixtures/worked_example/trace.jsonl");

    fn fixture() -> (TransitionFn, ParamMap, Trace) {
        let f = parse_rsm(ATTACKER).unwrap();
        let p = parse_params(PARAMS, &f).unwrap();
        let t = parse_trace(TRACE, &f).unwrap();
        (f, p, t)
    }

    fn eval_at_tau5(src: &str) -> Value {
        let (_, p, t) = fixture();
        eval_expr(&parse_expr(src).unwrap(), &Env::new(t.get(5).unwrap(), &p)).unwrap()
    }

    #[test]
    fn worked_example_subexpressions() {
        assert_eq!(eval_at_tau5("anglemod(in:targetAng - in:robotAng)"), Value::Num(PI / 60.0));
        assert_eq!(
            eval_at_tau5("norm(dot(<sin(in:robotAng), -cos(in:robotAng)>, in:ballLoc - in:robotLoc))"),
            Value::Num(40.0)
        );
        assert_eq!(eval_at_tau5("sin(0)"), Value::Num(0.0));
    }

    #[test]
    fn step_at_tau5() {
        let (f, mut p, t) = fixture();
        let tau = t.get(5).unwrap();
        assert_eq!(step_transition(&f, tau, &p).unwrap(), "GOTO");
        p.insert("maxDist", 80.5);
        assert_eq!(step_transition(&f, tau, &p).unwrap(), "KICK");
        let mut start = tau.clone();
        start.state = "START".into();
        assert_eq!(step_transition(&f, &start, &p).unwrap(), "GOTO");
    }

    #[test]
    fn step_leaves_inputs_untouched() {
        let (f, p, t) = fixture();
        let tau = t.get(5).unwrap().clone();
        let before = (tau.clone(), p.clone());
        step_transition(&f, &tau, &p).unwrap();
        assert_eq!((tau, p), before);
    }

    #[test]
    fn short_circuit_skips_division_by_zero() {
        let p = ParamMap::from_iter([("z", 0.0)]);
        let e = parse_expr("false && 1 / param:z > 0").unwrap();
        assert_eq!(eval_expr(&e, &p), Ok(Value::Bool(false)));
        let e = parse_expr("true || 1 / param:z > 0").unwrap();
        assert_eq!(eval_expr(&e, &p), Ok(Value::Bool(true)));
        let e = parse_expr("1 / param:z > 0").unwrap();
        assert_eq!(eval_expr(&e, &p), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn consistency_of_fixture() {
        let (f, mut p, t) = fixture();
        assert!(check_trace_consistency(&f, &p, &t).is_empty());
        p.insert("maxDist", 80.5);
        let m = check_trace_consistency(&f, &p, &t);
        assert!(m.contains(&Mismatch { t: 5, replayed: Ok("KICK".into()), recorded: "GOTO".into() }));
    }

    #[test]
    fn corrupted_state_is_reported() {
        let (f, p, t) = fixture();
        let mut elems = t.elements().to_vec();
        elems[4].state = "KICK".into();
        let m = check_trace_consistency(&f, &p, &Trace::new(elems).unwrap());
        assert!(m.iter().any(|m| m.t == 3));
    }

    struct Idle;

    impl Emission for Idle {
        type Output = ();
        fn emit(&self, _: &str, _: &IndexMap<String, Value>, vars: &IndexMap<String, Value>) -> ((), IndexMap<String, Value>) {
            ((), vars.clone())
        }
    }

    fn trivial(body: &str) -> Rsm<Idle> {
        let f = parse_rsm(&format!("states {{A, B}} start A end A; transition {body}")).unwrap();
        Rsm::new(f, Idle, ParamMap::new())
    }

    #[test]
    fn zero_steps_is_empty() {
        let rsm = trivial("{ return state; }");
        let tr = rsm.run(&mut Stream(std::iter::repeat(IndexMap::new())), 0).unwrap();
        assert!(tr.is_empty());
    }

    #[test]
    fn start_equal_to_end_records_one_element() {
        let rsm = trivial("{ return state; }");
        let tr = rsm.run(&mut Stream(std::iter::repeat(IndexMap::new())), 100).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.elements()[0].state, "A");
    }

    #[test]
    fn step_error_carries_timestep() {
        let f = parse_rsm(
            "states {A, B} start A end B; inputs {x: num}; transition { if (1 / in:x > 0) return \"A\"; else return \"A\"; }",
        )
        .unwrap();
        let rsm = Rsm::new(f, Idle, ParamMap::new());
        let ins = [1.0, 2.0, 0.0].map(|x| IndexMap::from([("x".to_string(), Value::Num(x))]));
        let err = rsm.run(&mut Stream(ins.into_iter()), 10).unwrap_err();
        assert_eq!(err, StepError { t: 2, source: EvalError::DivisionByZero });
    }
}
