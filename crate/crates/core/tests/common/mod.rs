//! Random transition functions, trace elements and repair instances, plus a
//! brute-force optimum for small repair problems.
#![allow(dead_code)]

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use srtr_core::dsl::{parse_rsm, Correction, ParamMap, Trace, TraceElement, TransitionFn, Value};
use srtr_core::interp::step_transition;
use srtr_core::solver::{Atom, MaxSmtProblem, RelOp};

pub const STATES: [&str; 4] = ["S0", "S1", "S2", "S3"];

pub struct Gen {
    pub rng: ChaCha8Rng,
    params: usize,
    depth: usize,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed), params: 3, depth: 3 }
    }

    /// Smaller programs, for instances the brute-force oracle can handle.
    pub fn small(seed: u64) -> Self {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed), params: 3, depth: 2 }
    }

    fn konst(&mut self) -> String {
        let c: f64 = (self.rng.gen_range(-3.0f64..3.0) * 100.0).round() / 100.0;
        if c < 0.0 { format!("(0 - {})", -c) } else { format!("{c}") }
    }

    fn param(&mut self) -> String {
        format!("param:p{}", self.rng.gen_range(0..self.params))
    }

    fn leaf(&mut self, scratch: bool) -> String {
        match self.rng.gen_range(0..if scratch { 7 } else { 6 }) {
            0 => "in:x".into(),
            1 => "in:y".into(),
            2 => "var:a".into(),
            3 | 4 => self.param(),
            5 => self.konst(),
            _ => "var:s".into(),
        }
    }

    pub fn num(&mut self, depth: usize, scratch: bool) -> String {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return self.leaf(scratch);
        }
        let d = depth - 1;
        match self.rng.gen_range(0..12) {
            0 | 1 => format!("({} + {})", self.num(d, scratch), self.num(d, scratch)),
            2 | 3 => format!("({} - {})", self.num(d, scratch), self.num(d, scratch)),
            4 => format!("({} * {})", self.konst(), self.num(d, scratch)),
            5 => format!("({} * {})", self.leaf(scratch), self.leaf(scratch)),
            6 => format!("({} / {})", self.num(d, scratch), ["2.5", "in:y", "(0 - 4)"][self.rng.gen_range(0..3)]),
            7 => format!("sin({})", self.num(d, scratch)),
            8 => format!("abs({})", self.num(d, scratch)),
            9 => format!("anglemod({})", self.num(d, scratch)),
            10 => {
                let p = self.param();
                format!("dot(in:v, <{p}, {}>)", self.konst())
            }
            _ => "norm(in:v)".into(),
        }
    }

    fn cmp(&mut self, scratch: bool) -> String {
        if self.rng.gen_bool(0.15) {
            let s = *STATES[..3].choose(&mut self.rng).unwrap();
            return format!("state == \"{s}\"");
        }
        let ops = ["<", "<=", ">", ">=", "<", ">", "!=", "=="];
        let op = ops[self.rng.gen_range(0..ops.len())];
        format!("{} {op} {}", self.num(2, scratch), self.num(2, scratch))
    }

    pub fn guard(&mut self, depth: usize) -> String {
        if depth == 0 || self.rng.gen_bool(0.5) {
            return self.cmp(true);
        }
        match self.rng.gen_range(0..3) {
            0 => format!("({} && {})", self.guard(depth - 1), self.guard(depth - 1)),
            1 => format!("({} || {})", self.guard(depth - 1), self.guard(depth - 1)),
            _ => format!("!({})", self.guard(depth - 1)),
        }
    }

    fn stmt(&mut self, depth: usize) -> String {
        if depth == 0 || self.rng.gen_bool(0.2) {
            return format!("return \"{}\";", STATES.choose(&mut self.rng).unwrap());
        }
        let g = self.guard(2);
        format!("if ({g}) {{ {} }} else {{ {} }}", self.stmt(depth - 1), self.stmt(depth - 1))
    }

    pub fn source(&mut self) -> String {
        self.params = self.rng.gen_range(1..=3);
        let params: Vec<String> = (0..self.params).map(|i| format!("p{i}")).collect();
        let s = self.num(2, false);
        let body = self.stmt(self.depth);
        format!(
            "states {{S0, S1, S2, S3}} start S0 end S3;\n\
             inputs {{x: num, y: num, v: vec2}};\n\
             vars {{a: num = 0, s: num}};\n\
             params {{{}}};\n\
             transition {{\n  var:s := {s};\n  {body}\n}}\n",
            params.join(", ")
        )
    }

    pub fn function(&mut self) -> TransitionFn {
        let src = self.source();
        parse_rsm(&src).unwrap_or_else(|e| panic!("generated program does not parse: {e}\n{src}"))
    }

    fn small_num(&mut self) -> f64 {
        // occasionally exact zero, to exercise division failures
        if self.rng.gen_bool(0.05) { 0.0 } else { (self.rng.gen_range(-3.0f64..3.0) * 1000.0).round() / 1000.0 }
    }

    pub fn element(&mut self, t: u64) -> TraceElement {
        let mut ins = IndexMap::new();
        ins.insert("x".to_string(), Value::Num(self.small_num()));
        ins.insert("y".to_string(), Value::Num(self.small_num()));
        ins.insert("v".to_string(), Value::Vec2(self.small_num(), self.small_num()));
        let mut vars = IndexMap::new();
        vars.insert("a".to_string(), Value::Num(self.small_num()));
        let state = STATES[..3].choose(&mut self.rng).unwrap().to_string();
        TraceElement { t, state, ins, vars }
    }

    pub fn params_for(&mut self, f: &TransitionFn) -> ParamMap {
        f.params.iter().map(|p| (p.clone(), (self.rng.gen_range(-2.0f64..2.0) * 100.0).round() / 100.0)).collect()
    }

    /// A trace of `n` steps with one correction per step. Half the expected
    /// states come from nearby parameters, so many clauses are satisfiable.
    pub fn instance(&mut self, n: usize) -> Instance {
        let f = self.function();
        let params = self.params_for(&f);
        let trace = Trace::new((0..n as u64).map(|t| self.element(t)).collect()).unwrap();
        let corrections = trace
            .elements()
            .iter()
            .map(|tau| {
                let expected = if self.rng.gen_bool(0.5) {
                    let near: ParamMap = params.iter().map(|(k, v)| (k.clone(), v + self.rng.gen_range(-1.0..1.0))).collect();
                    step_transition(&f, tau, &near).unwrap_or_else(|_| "S1".into())
                } else {
                    STATES.choose(&mut self.rng).unwrap().to_string()
                };
                Correction::new(tau.t, expected)
            })
            .collect();
        Instance { f, params, trace, corrections }
    }
}

pub struct Instance {
    pub f: TransitionFn,
    pub params: ParamMap,
    pub trace: Trace,
    pub corrections: Vec<Correction>,
}

/// `a · x <= b`
#[derive(Clone, Debug)]
struct Half {
    a: Vec<f64>,
    b: f64,
}

/// Rows for one path, or `None` when a constant atom is false.
fn path_rows(path: &[Atom<f64>], eps: f64, eta: f64) -> Option<Vec<Half>> {
    let mut rows = vec![];
    for atom in path {
        let d = atom.lhs.sub(&atom.rhs);
        if d.coeffs.iter().all(|c| *c == 0.0) {
            if !atom.op.holds(atom.lhs.constant, atom.rhs.constant) {
                return None;
            }
            continue;
        }
        let neg: Vec<f64> = d.coeffs.iter().map(|c| -c).collect();
        match atom.op {
            RelOp::Lt => rows.push(Half { a: d.coeffs.clone(), b: -d.constant - eps }),
            RelOp::Le => rows.push(Half { a: d.coeffs.clone(), b: -d.constant - eta }),
            RelOp::Gt => rows.push(Half { a: neg, b: d.constant - eps }),
            RelOp::Ge => rows.push(Half { a: neg, b: d.constant - eta }),
            RelOp::Eq => {
                rows.push(Half { a: d.coeffs.clone(), b: -d.constant });
                rows.push(Half { a: neg, b: d.constant });
            }
        }
    }
    Some(rows)
}

/// Solves the square system by Gaussian elimination with partial pivoting.
fn solve_square(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-12 {
            return None;
        }
        m.swap(c, p);
        r.swap(c, p);
        for i in 0..n {
            if i != c {
                let k = m[i][c] / m[c][c];
                for j in c..n {
                    m[i][j] -= k * m[c][j];
                }
                r[i] -= k * r[c];
            }
        }
    }
    Some((0..n).map(|i| r[i] / m[i][i]).collect())
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    go(0, n, k, &mut vec![], f);
}

/// Minimum of `Σ|x|` subject to `rows` by enumerating the vertices of each
/// orthant's feasible region. `None` when infeasible.
fn min_l1(rows: &[Half], dim: usize) -> Option<f64> {
    if dim == 0 {
        return rows.iter().all(|r| 0.0 <= r.b + 1e-12).then_some(0.0);
    }
    let mut best: Option<f64> = None;
    for signs in 0..(1u32 << dim) {
        let s: Vec<f64> = (0..dim).map(|j| if signs >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let mut all = rows.to_vec();
        for j in 0..dim {
            let mut a = vec![0.0; dim];
            a[j] = -s[j];
            all.push(Half { a, b: 0.0 });
        }
        combinations(all.len(), dim, &mut |pick| {
            let m = pick.iter().map(|&i| all[i].a.clone()).collect();
            let r = pick.iter().map(|&i| all[i].b).collect();
            let Some(x) = solve_square(m, r) else { return };
            let feasible = all.iter().all(|h| {
                let lhs: f64 = h.a.iter().zip(&x).map(|(a, x)| a * x).sum();
                lhs <= h.b + 1e-9 * (1.0 + h.b.abs())
            });
            if feasible {
                let v: f64 = x.iter().map(|x| x.abs()).sum();
                if best.is_none_or(|b| v < b) {
                    best = Some(v);
                }
            }
        });
    }
    best
}

/// Optimal objective over every subset of clauses to satisfy and every choice
/// of path within them.
pub fn brute_force(p: &MaxSmtProblem, eps: f64, eta: f64) -> f64 {
    let n = p.clauses.len();
    let options: Vec<Vec<Vec<Half>>> =
        p.clauses.iter().map(|c| c.paths.iter().filter_map(|path| path_rows(path, eps, eta)).collect()).collect();
    let mut best = f64::INFINITY;
    for subset in 0..(1u32 << n) {
        let chosen: Vec<usize> = (0..n).filter(|i| subset >> i & 1 == 1).collect();
        let cost = p.penalty * (n - chosen.len()) as f64;
        if cost >= best || chosen.iter().any(|&i| options[i].is_empty()) {
            continue;
        }
        let mut idx = vec![0usize; chosen.len()];
        'combos: loop {
            let rows: Vec<Half> = chosen.iter().zip(&idx).flat_map(|(&i, &k)| options[i][k].clone()).collect();
            if let Some(v) = min_l1(&rows, p.dim) {
                best = best.min(cost + v);
            }
            let mut k = chosen.len();
            loop {
                if k == 0 {
                    break 'combos;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < options[chosen[k]].len() {
                    continue 'combos;
                }
                idx[k] = 0;
            }
        }
    }
    best
}

/// Least-squares fit `y = a + b x`, returning R².
pub fn linear_r2(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}
