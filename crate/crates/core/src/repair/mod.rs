//! Turning user corrections into parameter adjustments.
//!
//! Each correction becomes a disjunction of path conditions over the
//! adjustments `δ` of the repairable parameters. A MaxSMT problem then trades
//! the number of corrections left unmet (each costing the penalty `H`)
//! against the L1 size of `δ`.

mod formula;

use std::time::Instant;

use indexmap::IndexMap;
use thiserror::Error;

pub use formula::{correct_one_with, MAX_PATHS};

use crate::dsl::{Correction, EvalError, ParamMap, Trace, TransitionFn};
use crate::interp::step_transition;
use crate::peval::{classify_params, Classification};
use crate::solver::smtlib::{self, Encoding, SmtError};
use crate::solver::{solve_maxsmt, MaxSmtProblem, NumericalFailure, PathFormula, SolverConfig, SolverStats};

/// Adjustment per repairable parameter.
pub type DeltaMap = ParamMap;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RepairError {
    #[error("unknown state {0:?}")]
    UnknownState(String),
    #[error("no trace element with t = {0}")]
    IndexError(u64),
    #[error("{0:?} is not a repairable parameter")]
    KeyError(String),
    #[error("guard is not affine in the repairable parameters: {0}")]
    NonAffine(String),
    #[error("path formula exceeds {0} disjuncts")]
    FormulaTooLarge(usize),
    #[error("evaluation failed at t={t}: {source}")]
    Eval { t: u64, source: EvalError },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Numerical(#[from] NumericalFailure),
    #[error(transparent)]
    Smt(#[from] SmtError),
}

impl RepairError {
    pub fn kind(&self) -> &'static str {
        match self {
            RepairError::UnknownState(_) => "UnknownState",
            RepairError::IndexError(_) => "IndexError",
            RepairError::KeyError(_) => "KeyError",
            RepairError::NonAffine(_) => "NonAffine",
            RepairError::FormulaTooLarge(_) => "FormulaTooLarge",
            RepairError::Eval { source, .. } => source.kind(),
            RepairError::InvalidConfig(_) => "InvalidConfig",
            RepairError::Numerical(_) => "NumericalFailure",
            RepairError::Smt(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Internal,
    /// An external SMT-LIB2 optimizer such as `["z3"]`, given the script path as its last argument.
    External { cmd: Vec<String>, encoding: Encoding },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOptions {
    /// Cost of leaving one correction unmet.
    pub penalty: f64,
    /// Margin that turns strict comparisons into non-strict ones.
    pub epsilon: f64,
    /// Optional box on individual adjustments, keyed by parameter name.
    pub bounds: IndexMap<String, (f64, f64)>,
    pub backend: Backend,
    pub record_pruned: bool,
}

impl Default for RepairOptions {
    fn default() -> Self {
        RepairOptions {
            penalty: 1.0,
            epsilon: SolverConfig::default().epsilon,
            bounds: IndexMap::new(),
            backend: Backend::Internal,
            record_pruned: false,
        }
    }
}

impl RepairOptions {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { epsilon: self.epsilon, record_pruned: self.record_pruned, ..SolverConfig::default() }
    }
}

/// MaxSMT instance over `δ`, one clause per correction.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairProblem {
    pub cls: Classification,
    pub base: ParamMap,
    pub corrections: Vec<Correction>,
    pub problem: MaxSmtProblem,
}

impl RepairProblem {
    pub fn rep(&self) -> &[String] {
        &self.cls.rep
    }

    pub fn clauses(&self) -> &[PathFormula<f64>] {
        &self.problem.clauses
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairResult {
    pub params: ParamMap,
    pub deltas: DeltaMap,
    /// Whether each correction holds when the repaired parameters are
    /// replayed through the interpreter.
    pub satisfied: Vec<bool>,
    /// Whether the optimizer claims each correction is met.
    pub claimed: Vec<bool>,
    pub objective: f64,
    pub solver_ms: f64,
    pub stats: SolverStats,
    /// Times the problem was re-solved after a claim failed replay.
    pub refinements: usize,
}

impl RepairResult {
    /// The report document: deltas, satisfied, objective and solver_ms.
    pub fn report_json(&self) -> serde_json::Value {
        serde_json::json!({
            "deltas": self.deltas,
            "satisfied": self.satisfied,
            "objective": self.objective,
            "solver_ms": self.solver_ms,
        })
    }
}

/// Path formula for a single correction against its trace element.
pub fn correct_one(
    f: &TransitionFn,
    trace: &Trace,
    params: &ParamMap,
    c: &Correction,
) -> Result<PathFormula<f64>, RepairError> {
    let tau = trace.get(c.t).ok_or(RepairError::IndexError(c.t))?;
    correct_one_with(f, &classify_params(f), tau, params, c)
}

pub fn correct_all(
    f: &TransitionFn,
    params: &ParamMap,
    trace: &Trace,
    corrections: &[Correction],
    opts: &RepairOptions,
) -> Result<RepairProblem, RepairError> {
    if !(opts.penalty > 0.0 && opts.penalty.is_finite()) {
        return Err(RepairError::InvalidConfig(format!("penalty must be positive, got {}", opts.penalty)));
    }
    if !(opts.epsilon > 0.0 && opts.epsilon.is_finite()) {
        return Err(RepairError::InvalidConfig(format!("epsilon must be positive, got {}", opts.epsilon)));
    }
    let cls = classify_params(f);
    let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); cls.rep.len()];
    for (name, &(lo, hi)) in &opts.bounds {
        if !f.has_param(name) {
            return Err(RepairError::KeyError(name.clone()));
        }
        if lo > hi || lo > 0.0 || hi < 0.0 || lo.is_nan() || hi.is_nan() {
            return Err(RepairError::InvalidConfig(format!("bound for {name} must contain 0, got [{lo}, {hi}]")));
        }
        if let Some(j) = cls.rep.iter().position(|p| p == name) {
            bounds[j] = (lo, hi);
        }
    }
    let mut clauses = Vec::with_capacity(corrections.len());
    for c in corrections {
        let tau = trace.get(c.t).ok_or(RepairError::IndexError(c.t))?;
        clauses.push(correct_one_with(f, &cls, tau, params, c)?);
    }
    let problem = MaxSmtProblem { dim: cls.rep.len(), clauses, penalty: opts.penalty, bounds };
    Ok(RepairProblem { cls, base: params.clone(), corrections: corrections.to_vec(), problem })
}

/// Adds `deltas` to `params`. Every key must name a repairable parameter.
pub fn apply_deltas(cls: &Classification, params: &ParamMap, deltas: &DeltaMap) -> Result<ParamMap, RepairError> {
    let mut out = params.clone();
    for (name, d) in deltas.iter() {
        if !cls.is_rep(name) {
            return Err(RepairError::KeyError(name.clone()));
        }
        let base = params.get(name).ok_or_else(|| RepairError::KeyError(name.clone()))?;
        out.insert(name.clone(), base + d);
    }
    Ok(out)
}

/// Solves a prepared repair problem and replays every correction with the
/// repaired parameters.
///
/// A clause the optimizer claims but the interpreter rejects (an `==` atom
/// that rounding breaks, say) loses the paths the claim relied on, and the
/// problem is solved again.
pub fn solve_repair(
    f: &TransitionFn,
    trace: &Trace,
    rp: &RepairProblem,
    opts: &RepairOptions,
) -> Result<RepairResult, RepairError> {
    let start = Instant::now();
    let mut problem = rp.problem.clone();
    let mut refinements = 0;
    loop {
        let (delta, claimed, objective, stats) = match &opts.backend {
            Backend::Internal => {
                let sol = solve_maxsmt(&problem, &opts.solver_config())?;
                (sol.delta.clone(), sol.satisfied(), sol.objective, sol.stats)
            }
            Backend::External { cmd, encoding } => {
                let cfg = smtlib::SmtConfig { encoding: *encoding, ..smtlib::SmtConfig::from(&opts.solver_config()) };
                let sol = smtlib::solve_external(&problem, rp.rep(), &cfg, cmd)?;
                (sol.delta, sol.satisfied, sol.objective, SolverStats::default())
            }
        };
        let mut deltas = DeltaMap::new();
        for (name, d) in rp.rep().iter().zip(&delta) {
            deltas.insert(name.clone(), *d);
        }
        let params = apply_deltas(&rp.cls, &rp.base, &deltas)?;
        let satisfied: Vec<bool> = rp
            .corrections
            .iter()
            .map(|c| {
                let tau = trace.get(c.t).expect("checked when the problem was built");
                step_transition(f, tau, &params).map(|s| s == c.expected).unwrap_or(false)
            })
            .collect();
        let broken: Vec<usize> = (0..claimed.len()).filter(|&i| claimed[i] && !satisfied[i]).collect();
        if broken.is_empty() {
            let solver_ms = start.elapsed().as_secs_f64() * 1e3;
            return Ok(RepairResult { params, deltas, satisfied, claimed, objective, solver_ms, stats, refinements });
        }
        for i in broken {
            let paths = &mut problem.clauses[i].paths;
            let before = paths.len();
            paths.retain(|p| !p.iter().all(|a| a.holds(&delta, 1e-9)));
            if paths.len() == before {
                paths.clear();
            }
        }
        refinements += 1;
    }
}

/// Minimally adjusts the repairable parameters so that the corrected steps
/// move to their expected states.
pub fn srtr(
    f: &TransitionFn,
    params: &ParamMap,
    trace: &Trace,
    corrections: &[Correction],
    opts: &RepairOptions,
) -> Result<RepairResult, RepairError> {
    let rp = correct_all(f, params, trace, corrections, opts)?;
    solve_repair(f, trace, &rp, opts)
}

#[cfg(test)]
mod tests;
