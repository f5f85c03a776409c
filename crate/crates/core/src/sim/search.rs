//! Grid search baseline, automatic labeling of failing runs, and the
//! repair-then-evaluate experiment.

use std::time::Instant;

use super::{gen_scenarios, success_rate, Kind, Scenario, SimError};
use crate::dsl::{Correction, Ident, ParamMap, Trace, TraceElement, TransitionFn, Value};
use crate::interp::step_transition;
use crate::peval::{peval, IdentMap};
use crate::repair::{srtr, RepairError, RepairOptions, RepairResult};

pub const MAX_GRID_POINTS: u128 = 10_000_000;

/// Specializes `f` to the values in `fixed`, leaving the other parameters free.
pub fn slice_params(f: &TransitionFn, fixed: &ParamMap) -> TransitionFn {
    let binds: IdentMap = fixed.iter().map(|(n, v)| (Ident::Param(n.clone()), Value::Num(v))).collect();
    TransitionFn {
        params: f.params.iter().filter(|p| !fixed.contains(p)).cloned().collect(),
        body: peval(f, &binds),
        ..f.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub params: ParamMap,
    pub satisfied: usize,
    pub points: u128,
}

fn satisfied(f: &TransitionFn, params: &ParamMap, labeled: &[(TraceElement, String)]) -> usize {
    labeled
        .iter()
        .filter(|(tau, want)| step_transition(f, tau, params).is_ok_and(|s| &s == want))
        .count()
}

/// Tries every point of the grid (parameters not on the grid keep their
/// `base` values) and returns the first point, in lexicographic grid order,
/// that satisfies the most labeled steps.
pub fn exhaustive_search(
    f: &TransitionFn,
    base: &ParamMap,
    grid: &[(String, Vec<f64>)],
    labeled: &[(TraceElement, String)],
) -> Result<GridSearch, SimError> {
    let points = grid.iter().try_fold(1u128, |acc, (_, v)| acc.checked_mul(v.len() as u128)).unwrap_or(u128::MAX);
    if points > MAX_GRID_POINTS {
        return Err(SimError::GridTooLarge(points));
    }
    if points == 0 {
        return Ok(GridSearch { params: base.clone(), satisfied: satisfied(f, base, labeled), points });
    }
    let mut idx = vec![0usize; grid.len()];
    let mut params = base.clone();
    let mut best: Option<(usize, ParamMap)> = None;
    loop {
        for ((name, values), &i) in grid.iter().zip(&idx) {
            params.insert(name.clone(), values[i]);
        }
        let n = satisfied(f, &params, labeled);
        if best.as_ref().is_none_or(|(b, _)| n > *b) {
            let full = n == labeled.len();
            best = Some((n, params.clone()));
            if full {
                break;
            }
        }
        let mut k = grid.len();
        loop {
            if k == 0 {
                let (satisfied, params) = best.expect("nonempty grid");
                return Ok(GridSearch { params, satisfied, points });
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < grid[k].1.len() {
                break;
            }
            idx[k] = 0;
        }
    }
    let (satisfied, params) = best.expect("nonempty grid");
    Ok(GridSearch { params, satisfied, points })
}

/// The first step of `trace` where `reference` would have moved to a
/// different state than `params` did, as a correction.
pub fn first_disagreement(
    f: &TransitionFn,
    params: &ParamMap,
    reference: &ParamMap,
    trace: &Trace,
) -> Option<Correction> {
    trace.elements().iter().filter(|tau| tau.state != f.end).find_map(|tau| {
        let want = step_transition(f, tau, reference).ok()?;
        let got = step_transition(f, tau, params).ok()?;
        (want != got).then(|| Correction::new(tau.t, want))
    })
}

/// Labels up to `max` failing runs with their first disagreement against
/// `reference`. Returns the labeled steps renumbered into one trace.
pub fn label_failures(
    f: &TransitionFn,
    params: &ParamMap,
    reference: &ParamMap,
    traces: impl IntoIterator<Item = Trace>,
    max: usize,
) -> (Trace, Vec<Correction>) {
    let mut elements = vec![];
    let mut corrections = vec![];
    for trace in traces {
        if corrections.len() == max {
            break;
        }
        if let Some(c) = first_disagreement(f, params, reference, &trace) {
            let mut tau = trace.get(c.t).expect("labeled step exists").clone();
            tau.t = elements.len() as u64;
            corrections.push(Correction::new(tau.t, c.expected));
            elements.push(tau);
        }
    }
    (Trace::new(elements).expect("renumbered steps are increasing"), corrections)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Improvement {
    pub kind: Kind,
    pub baseline_rate: f64,
    pub repaired_rate: f64,
    pub trace: Trace,
    pub corrections: Vec<Correction>,
    pub repair: RepairResult,
    pub repair_ms: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Repair(#[from] RepairError),
}

/// Runs the detuned baseline on a training suite, labels up to
/// `max_corrections` failing runs, repairs, and compares success rates on a
/// separate test suite.
pub fn improvement_experiment(
    kind: Kind,
    train: &[Scenario],
    test: &[Scenario],
    max_corrections: usize,
    opts: &RepairOptions,
) -> Result<Improvement, ExperimentError> {
    let f = kind.rsm();
    let base = kind.baseline();
    let steps = kind.default_max_steps();
    let (_, train_out) = success_rate(&f, &base, train, steps)?;
    let failing = train_out.into_iter().filter(|o| !o.success).map(|o| o.trace);
    let (trace, corrections) = label_failures(&f, &base, &kind.reference(), failing, max_corrections);
    let start = Instant::now();
    let repair = srtr(&f, &base, &trace, &corrections, opts)?;
    let repair_ms = start.elapsed().as_secs_f64() * 1e3;
    let (baseline_rate, _) = success_rate(&f, &base, test, steps)?;
    let (repaired_rate, _) = success_rate(&f, &repair.params, test, steps)?;
    Ok(Improvement { kind, baseline_rate, repaired_rate, trace, corrections, repair, repair_ms })
}

/// Training and test suites for the improvement experiment.
pub fn experiment_suites(kind: Kind, seed: u64, n_train: usize, n_test: usize) -> (Vec<Scenario>, Vec<Scenario>) {
    (gen_scenarios(seed, n_train, kind), gen_scenarios(seed.wrapping_add(1), n_test, kind))
}
