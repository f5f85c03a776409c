//! Weighted MaxSMT over linear real arithmetic: best-first branch and bound
//! over penalty and path choices, with an L1 linear program at each node.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use super::affine::Affine;
use super::lp::{solve_lp_certified, LpProblem, LpResult, NumericalFailure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl RelOp {
    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Gt => ">",
            RelOp::Ge => ">=",
            RelOp::Eq => "=",
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, RelOp::Lt | RelOp::Gt)
    }

    pub fn negate(self) -> Option<RelOp> {
        match self {
            RelOp::Lt => Some(RelOp::Ge),
            RelOp::Le => Some(RelOp::Gt),
            RelOp::Gt => Some(RelOp::Le),
            RelOp::Ge => Some(RelOp::Lt),
            RelOp::Eq => None,
        }
    }

    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            RelOp::Lt => a < b,
            RelOp::Le => a <= b,
            RelOp::Gt => a > b,
            RelOp::Ge => a >= b,
            RelOp::Eq => a == b,
        }
    }
}

/// `lhs op rhs` with both sides affine in the adjustment variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom<S> {
    pub lhs: Affine<S>,
    pub op: RelOp,
    pub rhs: Affine<S>,
}

impl Atom<f64> {
    /// Direct evaluation; strict relations are strict, non-strict ones allow
    /// `tol` of rounding.
    pub fn holds(&self, delta: &[f64], tol: f64) -> bool {
        let (a, b) = (self.lhs.eval(delta), self.rhs.eval(delta));
        match self.op {
            RelOp::Lt | RelOp::Gt => self.op.holds(a, b),
            RelOp::Le => a <= b + tol,
            RelOp::Ge => a + tol >= b,
            RelOp::Eq => (a - b).abs() <= tol,
        }
    }

    /// True when `δ` cancels out, as in `p < p`; decided by the constants.
    pub fn is_constant(&self) -> bool {
        self.lhs.coeffs == self.rhs.coeffs
    }
}

/// Disjunction over paths, each path a conjunction of atoms. No paths means
/// unsatisfiable; a path with no atoms means trivially true.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFormula<S> {
    pub paths: Vec<Vec<Atom<S>>>,
}

impl PathFormula<f64> {
    pub fn holds(&self, delta: &[f64], tol: f64) -> Option<usize> {
        self.paths.iter().position(|p| p.iter().all(|a| a.holds(delta, tol)))
    }
}

/// Soft clauses sharing one adjustment vector: violating a clause costs
/// `penalty`, and the objective adds the L1 norm of the adjustments.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxSmtProblem {
    pub dim: usize,
    pub clauses: Vec<PathFormula<f64>>,
    pub penalty: f64,
    /// Per-variable bounds on the adjustment; infinite ends are unbounded.
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Margin replacing strict inequalities: `a < b` becomes `a + epsilon <= b`.
    pub epsilon: f64,
    /// Safety margin on non-strict inequalities, absorbing the rounding
    /// between the affine form and concrete evaluation.
    pub eta: f64,
    /// Record every pruned node with its bound.
    pub record_pruned: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { epsilon: 1e-4, eta: 1e-9, record_pruned: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Violate,
    Path(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrunedNode {
    /// Choices for a prefix of the clauses, indexed by clause.
    pub choices: Vec<(usize, Choice)>,
    pub bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverStats {
    pub nodes: usize,
    pub lps: usize,
    pub pruned: Vec<PrunedNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxSmtSolution {
    pub delta: Vec<f64>,
    /// Per clause, the satisfied path or `Violate`.
    pub choices: Vec<Choice>,
    pub objective: f64,
    pub stats: SolverStats,
}

impl MaxSmtSolution {
    pub fn satisfied(&self) -> Vec<bool> {
        self.choices.iter().map(|c| *c != Choice::Violate).collect()
    }

    pub fn violated(&self) -> usize {
        self.choices.iter().filter(|c| **c == Choice::Violate).count()
    }
}

/// `a · delta <= b`
#[derive(Debug, Clone, PartialEq)]
struct Row {
    a: Vec<f64>,
    b: f64,
}

impl Row {
    fn holds(&self, delta: &[f64]) -> bool {
        self.a.iter().zip(delta).map(|(a, d)| a * d).sum::<f64>() <= self.b + 1e-12
    }
}

/// `a · |delta| <= b`
#[derive(Debug, Clone, PartialEq)]
struct AbsRow {
    a: Vec<f64>,
    b: f64,
}

impl AbsRow {
    fn holds(&self, delta: &[f64]) -> bool {
        self.a.iter().zip(delta).map(|(a, d)| a * d.abs()).sum::<f64>() <= self.b + 1e-12
    }
}

fn lower_atom(atom: &Atom<f64>, cfg: &SolverConfig, out: &mut Vec<Row>) {
    let diff = atom.lhs.sub(&atom.rhs);
    let (neg, margin) = match atom.op {
        RelOp::Lt => (false, cfg.epsilon),
        RelOp::Le => (false, cfg.eta),
        RelOp::Gt => (true, cfg.epsilon),
        RelOp::Ge => (true, cfg.eta),
        RelOp::Eq => {
            out.push(Row { a: diff.coeffs.clone(), b: -diff.constant });
            let n = diff.neg();
            out.push(Row { a: n.coeffs, b: -n.constant });
            return;
        }
    };
    let d = if neg { diff.neg() } else { diff };
    out.push(Row { a: d.coeffs, b: -margin - d.constant });
}

/// A clause after constant atoms are decided and each path is lowered.
struct Prepared {
    /// Original path index and its rows.
    options: Vec<(usize, Vec<Row>)>,
    /// A path with no remaining atoms, if any.
    trivial: Option<usize>,
}

fn prepare(clause: &PathFormula<f64>, cfg: &SolverConfig) -> Prepared {
    let mut options = vec![];
    for (k, path) in clause.paths.iter().enumerate() {
        let mut rows = vec![];
        let mut dead = false;
        for atom in path {
            if atom.is_constant() {
                dead |= !atom.op.holds(atom.lhs.constant, atom.rhs.constant);
            } else {
                lower_atom(atom, cfg, &mut rows);
            }
        }
        if dead {
            continue;
        }
        if rows.is_empty() {
            return Prepared { options: vec![], trivial: Some(k) };
        }
        options.push((k, rows));
    }
    Prepared { options, trivial: None }
}

#[derive(Debug, Clone)]
struct Node {
    depth: usize,
    choices: Vec<Choice>,
    violated: usize,
    /// LP optimum (value, delta) under this node's constraints, if computed.
    lp: Option<(f64, Vec<f64>)>,
    bound: f64,
    seq: u64,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    /// Max-heap order: smaller bound first, then deeper, then older.
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&o.depth))
            .then(o.seq.cmp(&self.seq))
    }
}

/// One branch-and-bound search: minimize `objective_penalty · violated +
/// weights · |delta|`, optionally under `Σ|delta| <= budget - penalty · violated`.
struct Search<'a> {
    prepared: &'a [Prepared],
    order: &'a [usize],
    dim: usize,
    penalty: f64,
    objective_penalty: f64,
    weights: Vec<f64>,
    budget: Option<f64>,
    base_rows: Vec<Row>,
    abs_rows: Vec<AbsRow>,
    record_pruned: bool,
    stats: SolverStats,
}

const PRUNE_TOL: f64 = 1e-9;

impl Search<'_> {
    fn budget_row(&self, violated: usize) -> Option<AbsRow> {
        self.budget.map(|b| AbsRow { a: vec![1.0; self.dim], b: b - self.penalty * violated as f64 })
    }

    fn rows_for<'b>(&'b self, choices: &[Choice]) -> impl Iterator<Item = &'b Row> + 'b {
        let picked: Vec<&'b [Row]> = choices
            .iter()
            .enumerate()
            .filter_map(|(d, c)| match c {
                Choice::Path(k) => {
                    let p = &self.prepared[self.order[d]];
                    p.options.iter().find(|(i, _)| i == k).map(|(_, r)| r.as_slice())
                }
                Choice::Violate => None,
            })
            .collect();
        self.base_rows.iter().chain(picked.into_iter().flatten())
    }

    fn solve(&mut self, choices: &[Choice], violated: usize) -> Result<Option<(f64, Vec<f64>)>, NumericalFailure> {
        let n = self.dim;
        let mut rows: Vec<(Vec<f64>, f64)> = self
            .rows_for(choices)
            .map(|r| {
                let mut a = r.a.clone();
                a.extend(r.a.iter().map(|v| -v));
                (a, r.b)
            })
            .collect();
        for r in self.abs_rows.iter().cloned().chain(self.budget_row(violated)) {
            let mut a = r.a.clone();
            a.extend(r.a.iter().copied());
            rows.push((a, r.b));
        }
        let mut objective = self.weights.clone();
        objective.extend(self.weights.iter().copied());
        self.stats.lps += 1;
        match solve_lp_certified(&LpProblem { n: 2 * n, rows, objective })? {
            LpResult::Optimal { x, objective } => {
                let delta: Vec<f64> = (0..n).map(|j| x[j] - x[n + j]).collect();
                Ok(Some((objective, delta)))
            }
            LpResult::Infeasible { .. } => Ok(None),
            LpResult::Unbounded => Err(NumericalFailure("unbounded L1 objective".into())),
        }
    }

    fn satisfies_extra(&self, delta: &[f64], rows: &[Row], violated: usize) -> bool {
        rows.iter().all(|r| r.holds(delta)) && self.budget_row(violated).is_none_or(|r| r.holds(delta))
    }

    fn prune(&mut self, node: &Node) {
        if self.record_pruned {
            self.stats.pruned.push(PrunedNode {
                choices: node.choices.iter().enumerate().map(|(d, c)| (self.order[d], *c)).collect(),
                bound: node.bound,
            });
        }
    }

    fn run(&mut self) -> Result<Option<(Vec<Choice>, f64, Vec<f64>)>, NumericalFailure> {
        let total = self.order.len();
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        let Some(root) = self.solve(&[], 0)? else { return Ok(None) };
        heap.push(Node { depth: 0, choices: vec![], violated: 0, bound: root.0, lp: Some(root), seq });
        let mut best: Option<(Vec<Choice>, f64, Vec<f64>)> = None;
        let incumbent = |b: &Option<(Vec<Choice>, f64, Vec<f64>)>| b.as_ref().map_or(f64::INFINITY, |x| x.1);
        while let Some(mut node) = heap.pop() {
            if node.bound >= incumbent(&best) - PRUNE_TOL {
                self.prune(&node);
                continue;
            }
            let Some((value, delta)) = node.lp.clone() else {
                match self.solve(&node.choices, node.violated)? {
                    Some(lp) => {
                        node.bound = self.objective_penalty * node.violated as f64 + lp.0;
                        node.lp = Some(lp);
                        seq += 1;
                        node.seq = seq;
                        heap.push(node);
                    }
                    None => self.prune(&node),
                }
                continue;
            };
            self.stats.nodes += 1;
            if node.depth == total {
                best = Some((node.choices, node.bound, delta));
                continue;
            }
            let clause = &self.prepared[self.order[node.depth]];
            let mut children = vec![];
            if let Some(k) = clause.trivial {
                children.push((Choice::Path(k), node.violated, &[][..]));
            } else {
                for (k, rows) in &clause.options {
                    children.push((Choice::Path(*k), node.violated, rows.as_slice()));
                }
                children.push((Choice::Violate, node.violated + 1, &[][..]));
            }
            for (choice, violated, rows) in children {
                let mut choices = node.choices.clone();
                choices.push(choice);
                let base = self.objective_penalty * violated as f64;
                let lp = self.satisfies_extra(&delta, rows, violated).then(|| (value, delta.clone()));
                seq += 1;
                heap.push(Node { depth: node.depth + 1, choices, violated, lp, bound: base + value, seq });
            }
        }
        Ok(best)
    }
}

fn bound_rows(bounds: &[(f64, f64)], dim: usize) -> Vec<Row> {
    let mut rows = vec![];
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        let mut e = vec![0.0; dim];
        if hi.is_finite() {
            e[j] = 1.0;
            rows.push(Row { a: e.clone(), b: hi });
        }
        if lo.is_finite() {
            e[j] = -1.0;
            rows.push(Row { a: e, b: -lo });
        }
    }
    rows
}

/// Global optimum of `penalty · violated + Σ|delta|`. Among optima the
/// adjustment vector with lexicographically smallest `|delta|` is returned,
/// found by one further search per variable.
pub fn solve_maxsmt(p: &MaxSmtProblem, cfg: &SolverConfig) -> Result<MaxSmtSolution, NumericalFailure> {
    let dim = p.dim;
    let prepared: Vec<Prepared> = p.clauses.iter().map(|c| prepare(c, cfg)).collect();
    let base_rows = bound_rows(&p.bounds, dim);
    let zero = vec![0.0; dim];
    let sat_at_zero =
        |c: &Prepared| c.trivial.is_some() || c.options.iter().any(|(_, rows)| rows.iter().all(|r| r.holds(&zero)));
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    order.sort_by_key(|&i| sat_at_zero(&prepared[i]));

    let mut search = Search {
        prepared: &prepared,
        order: &order,
        dim,
        penalty: p.penalty,
        objective_penalty: p.penalty,
        weights: vec![1.0; dim],
        budget: None,
        base_rows,
        abs_rows: vec![],
        record_pruned: cfg.record_pruned,
        stats: SolverStats::default(),
    };
    let (mut choices, optimum, mut delta) =
        search.run()?.ok_or_else(|| NumericalFailure("adjustment bounds are infeasible".into()))?;
    let mut stats = std::mem::take(&mut search.stats);

    let tol = PRUNE_TOL * optimum.abs().max(1.0);
    for j in 0..dim {
        let mut weights = vec![0.0; dim];
        weights[j] = 1.0;
        search.objective_penalty = 0.0;
        search.weights = weights;
        search.budget = Some(optimum + tol);
        search.record_pruned = false;
        if let Some((c, v, d)) = search.run()? {
            let mut fix = vec![0.0; dim];
            fix[j] = 1.0;
            search.abs_rows.push(AbsRow { a: fix, b: v + PRUNE_TOL });
            choices = c;
            delta = d;
        }
        stats.nodes += search.stats.nodes;
        stats.lps += search.stats.lps;
        search.stats = SolverStats::default();
    }

    let mut by_clause = vec![Choice::Violate; prepared.len()];
    for (d, c) in choices.into_iter().enumerate() {
        by_clause[order[d]] = c;
    }
    // certified feasibility: claimed paths must hold by direct evaluation
    for (i, c) in by_clause.iter_mut().enumerate() {
        if let Choice::Path(k) = *c {
            if !p.clauses[i].paths[k].iter().all(|a| a.holds(&delta, 1e-9)) {
                *c = Choice::Violate;
            }
        }
    }
    let violated = by_clause.iter().filter(|c| **c == Choice::Violate).count();
    let objective = p.penalty * violated as f64 + delta.iter().map(|d| d.abs()).sum::<f64>();
    Ok(MaxSmtSolution { delta, choices: by_clause, objective, stats })
}

impl fmt::Display for Atom<f64> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_affine(f, &self.lhs)?;
        write!(f, " {} ", self.op.symbol())?;
        write_affine(f, &self.rhs)
    }
}

fn write_affine(f: &mut fmt::Formatter<'_>, a: &Affine<f64>) -> fmt::Result {
    write!(f, "{}", a.constant)?;
    for (j, c) in a.coeffs.iter().enumerate() {
        if *c != 0.0 {
            write!(f, " + {c}·d{j}")?;
        }
    }
    Ok(())
}
