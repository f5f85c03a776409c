//! SMT-LIB2 (QF_LRA) emission for external optimizing solvers, and parsing
//! of the model they print back.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::process::{Command, Stdio};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::maxsmt::{Atom, MaxSmtProblem, RelOp, SolverConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmtError {
    #[error("solver reported unsat")]
    Unsat,
    #[error("cannot parse solver output: {0}")]
    Parse(String),
    #[error("solver process failed: {0}")]
    Process(String),
    #[error("value is not representable in SMT-LIB: {0}")]
    NonFinite(f64),
}

impl SmtError {
    pub fn kind(&self) -> &'static str {
        match self {
            SmtError::Unsat => "Unsat",
            SmtError::Parse(_) => "SmtParseError",
            SmtError::Process(_) => "SolverError",
            SmtError::NonFinite(_) => "NumericalFailure",
        }
    }
}

/// How a violated correction is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Encoding {
    /// A Boolean `w_i` per clause with `(xor w_i φ_i)` and the penalty in a
    /// single objective alongside the L1 norm.
    #[default]
    Xor,
    /// `assert-soft` per clause. Solvers treat soft constraints as a
    /// separate objective ranked ahead of the norm.
    AssertSoft,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmtConfig {
    pub epsilon: f64,
    pub eta: f64,
    pub encoding: Encoding,
}

impl From<&SolverConfig> for SmtConfig {
    fn from(c: &SolverConfig) -> Self {
        SmtConfig { epsilon: c.epsilon, eta: c.eta, encoding: Encoding::Xor }
    }
}

impl Default for SmtConfig {
    fn default() -> Self {
        SmtConfig::from(&SolverConfig::default())
    }
}

/// Exact decimal-free rendering of a float: `3`, `(- 3)`, `(/ 1 4)`.
pub fn real_literal(x: f64) -> Result<String, SmtError> {
    let r = BigRational::from_float(x).ok_or(SmtError::NonFinite(x))?;
    let abs = r.abs();
    let body = if abs.is_integer() {
        format!("{}.0", abs.numer())
    } else {
        format!("(/ {}.0 {}.0)", abs.numer(), abs.denom())
    };
    Ok(if r.is_negative() { format!("(- {body})") } else { body })
}

fn sym(name: &str) -> String {
    if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || "_.-".contains(c)) {
        name.to_string()
    } else {
        format!("|{}|", name.replace('|', "_"))
    }
}

pub fn delta_symbol(param: &str) -> String {
    sym(&format!("d_{param}"))
}

fn linear(coeffs: &[f64], constant: f64, names: &[String]) -> Result<String, SmtError> {
    let mut terms = vec![];
    for (c, n) in coeffs.iter().zip(names) {
        if *c == 0.0 {
            continue;
        }
        if *c == 1.0 {
            terms.push(n.clone());
        } else {
            terms.push(format!("(* {} {n})", real_literal(*c)?));
        }
    }
    if constant != 0.0 || terms.is_empty() {
        terms.push(real_literal(constant)?);
    }
    Ok(if terms.len() == 1 { terms.pop().unwrap() } else { format!("(+ {})", terms.join(" ")) })
}

/// `lhs - rhs` compared against zero with the same margins the internal
/// engine uses.
fn atom(a: &Atom<f64>, cfg: &SmtConfig, names: &[String]) -> Result<String, SmtError> {
    let diff = a.lhs.sub(&a.rhs);
    let e = linear(&diff.coeffs, diff.constant, names)?;
    Ok(match a.op {
        RelOp::Lt => format!("(<= {e} {})", real_literal(-cfg.epsilon)?),
        RelOp::Le => format!("(<= {e} {})", real_literal(-cfg.eta)?),
        RelOp::Gt => format!("(>= {e} {})", real_literal(cfg.epsilon)?),
        RelOp::Ge => format!("(>= {e} {})", real_literal(cfg.eta)?),
        RelOp::Eq => format!("(= {e} 0.0)"),
    })
}

fn conj(parts: Vec<String>, empty: &str) -> String {
    match parts.len() {
        0 => empty.to_string(),
        1 => parts.into_iter().next().unwrap(),
        _ => format!("(and {})", parts.join(" ")),
    }
}

/// Renders the problem as an SMT-LIB2 script ending in `check-sat`,
/// `get-objectives` and `get-model`. `names[j]` labels adjustment `j`.
pub fn emit_smtlib(p: &MaxSmtProblem, names: &[String], cfg: &SmtConfig) -> Result<String, SmtError> {
    let d: Vec<String> = names.iter().map(|n| delta_symbol(n)).collect();
    let mut out = String::new();
    out.push_str("(set-logic QF_LRA)\n(set-option :produce-models true)\n");
    for (j, s) in d.iter().enumerate() {
        let _ = writeln!(out, "(declare-fun {s} () Real)");
        let _ = writeln!(out, "(declare-fun a_{j} () Real)");
        let _ = writeln!(out, "(assert (>= a_{j} {s}))");
        let _ = writeln!(out, "(assert (>= a_{j} (- {s})))");
        if let Some(&(lo, hi)) = p.bounds.get(j) {
            if lo.is_finite() {
                let _ = writeln!(out, "(assert (>= {s} {}))", real_literal(lo)?);
            }
            if hi.is_finite() {
                let _ = writeln!(out, "(assert (<= {s} {}))", real_literal(hi)?);
            }
        }
    }
    let mut phis = vec![];
    for clause in &p.clauses {
        let mut paths = vec![];
        for path in &clause.paths {
            paths.push(conj(path.iter().map(|a| atom(a, cfg, &d)).collect::<Result<_, _>>()?, "true"));
        }
        phis.push(match paths.len() {
            0 => "false".to_string(),
            1 => paths.pop().unwrap(),
            _ => format!("(or {})", paths.join(" ")),
        });
    }
    let norm = if d.is_empty() {
        "0.0".to_string()
    } else {
        format!("(+ 0.0 {})", (0..d.len()).map(|j| format!("a_{j}")).collect::<Vec<_>>().join(" "))
    };
    let h = real_literal(p.penalty)?;
    match cfg.encoding {
        Encoding::Xor => {
            for (i, phi) in phis.iter().enumerate() {
                let _ = writeln!(out, "(declare-fun w_{i} () Bool)");
                let _ = writeln!(out, "(assert (xor w_{i} {phi}))");
            }
            let ws: Vec<String> = (0..phis.len()).map(|i| format!("(ite w_{i} {h} 0.0)")).collect();
            let _ = writeln!(out, "(minimize (+ {norm} {}))", if ws.is_empty() { "0.0".into() } else { ws.join(" ") });
        }
        Encoding::AssertSoft => {
            for (i, phi) in phis.iter().enumerate() {
                let _ = writeln!(out, "(define-fun w_{i} () Bool (not {phi}))");
                let _ = writeln!(out, "(assert-soft {phi} :weight {h} :id violations)");
            }
            let _ = writeln!(out, "(minimize {norm})");
        }
    }
    out.push_str("(check-sat)\n(get-objectives)\n(get-model)\n");
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(s: &str) -> Vec<String> {
    let mut out = vec![];
    let mut cur = String::new();
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
            '|' => {
                cur.push(c);
                for c in chars.by_ref() {
                    cur.push(c);
                    if c == '|' {
                        break;
                    }
                }
            }
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn parse_all(s: &str) -> Result<Vec<Sexp>, SmtError> {
    let mut stack: Vec<Vec<Sexp>> = vec![vec![]];
    for tok in tokenize(s) {
        match tok.as_str() {
            "(" => stack.push(vec![]),
            ")" => {
                let done = stack.pop().filter(|_| !stack.is_empty()).ok_or_else(|| SmtError::Parse("unbalanced ')'".into()))?;
                stack.last_mut().unwrap().push(Sexp::List(done));
            }
            _ => stack.last_mut().unwrap().push(Sexp::Atom(tok)),
        }
    }
    if stack.len() != 1 {
        return Err(SmtError::Parse("unbalanced '('".into()));
    }
    Ok(stack.pop().unwrap())
}

fn number(tok: &str) -> Option<BigRational> {
    if let Some((n, d)) = tok.split_once('/') {
        return Some(number(n)? / number(d)?);
    }
    let (int, frac) = tok.split_once('.').unwrap_or((tok, ""));
    if int.is_empty() || !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    Some(BigRational::new(digits, BigInt::from(10).pow(frac.len() as u32)))
}

fn real(e: &Sexp) -> Option<BigRational> {
    match e {
        Sexp::Atom(t) => number(t),
        Sexp::List(v) => {
            let op = match v.first()? {
                Sexp::Atom(a) => a.as_str(),
                Sexp::List(_) => return None,
            };
            let args: Vec<BigRational> = v[1..].iter().map(real).collect::<Option<_>>()?;
            match (op, args.as_slice()) {
                ("-", [x]) => Some(-x.clone()),
                ("-", [x, rest @ ..]) => Some(rest.iter().fold(x.clone(), |a, b| a - b)),
                ("+", _) => Some(args.iter().fold(BigRational::zero(), |a, b| a + b)),
                ("*", [x, rest @ ..]) => Some(rest.iter().fold(x.clone(), |a, b| a * b)),
                ("/", [x, y]) if !y.is_zero() => Some(x / y),
                _ => None,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SmtValue {
    Real(f64),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SmtModel {
    pub values: indexmap::IndexMap<String, SmtValue>,
    /// Objective values the solver printed, where they are plain numbers.
    pub objectives: Vec<f64>,
}

/// Parses `sat` followed by optional `(objectives ...)` and a model of
/// `define-fun` entries. Unparseable objective terms (such as infinitesimals)
/// are skipped.
pub fn parse_smt_model(output: &str) -> Result<SmtModel, SmtError> {
    let items = parse_all(output)?;
    let mut it = items.iter();
    match it.next() {
        Some(Sexp::Atom(a)) if a == "sat" => {}
        Some(Sexp::Atom(a)) if a == "unsat" => return Err(SmtError::Unsat),
        other => return Err(SmtError::Parse(format!("expected sat, got {other:?}"))),
    }
    let mut model = SmtModel::default();
    for item in it {
        let Sexp::List(v) = item else {
            return Err(SmtError::Parse(format!("unexpected {item:?}")));
        };
        match v.first() {
            Some(Sexp::Atom(a)) if a == "objectives" => {
                for o in &v[1..] {
                    if let Sexp::List(pair) = o {
                        if let Some(x) = pair.get(1).and_then(real).and_then(|r| r.to_f64()) {
                            model.objectives.push(x);
                        }
                    }
                }
            }
            Some(Sexp::Atom(a)) if a == "error" => return Err(SmtError::Parse(format!("solver error: {v:?}"))),
            _ => {
                let defs = match v.first() {
                    Some(Sexp::Atom(a)) if a == "model" => &v[1..],
                    _ => &v[..],
                };
                for d in defs {
                    let Sexp::List(f) = d else { continue };
                    let [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), Sexp::Atom(ty), body] = f.as_slice() else {
                        continue;
                    };
                    if kw != "define-fun" || !args.is_empty() {
                        continue;
                    }
                    let value = match (ty.as_str(), body) {
                        ("Bool", Sexp::Atom(b)) if b == "true" || b == "false" => SmtValue::Bool(b == "true"),
                        ("Real" | "Int", e) => SmtValue::Real(
                            real(e)
                                .and_then(|r| r.to_f64())
                                .ok_or_else(|| SmtError::Parse(format!("value of {name}: {e:?}")))?,
                        ),
                        _ => continue,
                    };
                    model.values.insert(name.trim_matches('|').to_string(), value);
                }
            }
        }
    }
    Ok(model)
}

static SCRIPTS: AtomicU64 = AtomicU64::new(0);

/// Writes the script to a scratch file, runs `cmd` with that path as its last
/// argument and returns the solver's stdout.
pub fn run_solver(cmd: &[String], script: &str) -> Result<String, SmtError> {
    let (prog, args) = cmd.split_first().ok_or_else(|| SmtError::Process("empty solver command".into()))?;
    let n = SCRIPTS.fetch_add(1, AtomicOrdering::Relaxed);
    let path = std::env::temp_dir().join(format!("srtr-{}-{n}.smt2", std::process::id()));
    std::fs::write(&path, script).map_err(|e| SmtError::Process(format!("{}: {e}", path.display())))?;
    let out = Command::new(prog).args(args).arg(&path).stdin(Stdio::null()).output();
    let _ = std::fs::remove_file(&path);
    let out = out.map_err(|e| SmtError::Process(format!("{prog}: {e}")))?;
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    if stdout.trim().is_empty() {
        return Err(SmtError::Process(format!(
            "{prog} exited with {} and no output: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(stdout)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSolution {
    pub delta: Vec<f64>,
    pub satisfied: Vec<bool>,
    /// `penalty · violated + Σ|δ|`, recomputed from the model.
    pub objective: f64,
}

pub fn solve_external(
    p: &MaxSmtProblem,
    names: &[String],
    cfg: &SmtConfig,
    cmd: &[String],
) -> Result<ExternalSolution, SmtError> {
    let script = emit_smtlib(p, names, cfg)?;
    let model = parse_smt_model(&run_solver(cmd, &script)?)?;
    let delta: Vec<f64> = names
        .iter()
        .map(|n| match model.values.get(delta_symbol(n).trim_matches('|')) {
            Some(SmtValue::Real(x)) => *x,
            _ => 0.0,
        })
        .collect();
    let satisfied: Vec<bool> = (0..p.clauses.len())
        .map(|i| match model.values.get(&format!("w_{i}")) {
            Some(SmtValue::Bool(w)) => !*w,
            _ => p.clauses[i].holds(&delta, 1e-9).is_some(),
        })
        .collect();
    let violated = satisfied.iter().filter(|s| !**s).count() as f64;
    let objective = p.penalty * violated + delta.iter().map(|d| d.abs()).sum::<f64>();
    Ok(ExternalSolution { delta, satisfied, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{Affine, PathFormula};

    #[test]
    fn literals_are_exact() {
        assert_eq!(real_literal(3.0).unwrap(), "3.0");
        assert_eq!(real_literal(-0.25).unwrap(), "(- (/ 1.0 4.0))");
        let back = real(&parse_all(&real_literal(0.1).unwrap()).unwrap()[0]).unwrap();
        assert_eq!(back.to_f64().unwrap(), 0.1);
        assert!(real_literal(f64::NAN).is_err());
    }

    #[test]
    fn script_shape() {
        let p = MaxSmtProblem {
            dim: 1,
            clauses: vec![PathFormula {
                paths: vec![vec![Atom { lhs: Affine::var(0, 1), op: RelOp::Gt, rhs: Affine::constant(1.0, 1) }]],
            }],
            penalty: 10.0,
            bounds: vec![(-5.0, f64::INFINITY)],
        };
        let s = emit_smtlib(&p, &["maxDist".into()], &SmtConfig::default()).unwrap();
        assert!(s.starts_with("(set-logic QF_LRA)"));
        assert!(s.contains("(declare-fun d_maxDist () Real)"));
        assert!(s.contains("(assert (>= d_maxDist (- 5.0)))"));
        assert!(s.contains("(assert (xor w_0 (>= (+ d_maxDist (- 1.0)) "), "{s}");
        assert!(s.contains("(minimize (+ (+ 0.0 a_0) (ite w_0 10.0 0.0)))"), "{s}");
        assert!(s.trim_end().ends_with("(check-sat)\n(get-objectives)\n(get-model)"));
        let soft = emit_smtlib(&p, &["maxDist".into()], &SmtConfig { encoding: Encoding::AssertSoft, ..Default::default() })
            .unwrap();
        assert!(soft.contains("(assert-soft (>= (+ d_maxDist (- 1.0))"), "{soft}");
    }

    #[test]
    fn parses_typical_models() {
        let out = "sat\n(objectives\n (cost (/ 1.0 2.0))\n (x (+ 1.0 (* 2.0 epsilon)))\n)\n(\n  (define-fun d_a () Real\n    (- (/ 1.0 2.0)))\n  (define-fun w_0 () Bool\n    false)\n  (define-fun |d_b c| () Real 3)\n)\n";
        let m = parse_smt_model(out).unwrap();
        assert_eq!(m.values["d_a"], SmtValue::Real(-0.5));
        assert_eq!(m.values["w_0"], SmtValue::Bool(false));
        assert_eq!(m.values["d_b c"], SmtValue::Real(3.0));
        assert_eq!(m.objectives, vec![0.5]);
        let wrapped = parse_smt_model("sat (model (define-fun x () Real 1.5))").unwrap();
        assert_eq!(wrapped.values["x"], SmtValue::Real(1.5));
        assert_eq!(parse_smt_model("unsat\n"), Err(SmtError::Unsat));
        assert!(parse_smt_model("sat ((define-fun x () Real 1)").is_err());
        assert!(parse_smt_model("").is_err());
    }
}
