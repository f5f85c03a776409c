use super::*;
use crate::dsl::{parse_corrections, parse_params, parse_rsm, parse_trace};
use crate::solver::Choice;

const ATTACKER: &str = include_str!("../../fixtures/worked_example/attacker.rsm");
const PARAMS: &str = include_str!("../../fixtures/worked_example/params.json");
const TRACE: &str = include_str!("../../fixtures/worked_example/trace.jsonl");
const CORRECTIONS: &str = include_str!("../../fixtures/worked_example/corrections.json");

fn fixture() -> (TransitionFn, ParamMap, Trace, Vec<Correction>) {
    let f = parse_rsm(ATTACKER).unwrap();
    let p = parse_params(PARAMS, &f).unwrap();
    let t = parse_trace(TRACE, &f).unwrap();
    let c = parse_corrections(CORRECTIONS, &f).unwrap();
    (f, p, t, c)
}

/// `B` when `p` exceeds the input, with one step at `y = 1` and one at `y = -1`.
fn threshold(guard: &str) -> (TransitionFn, ParamMap, Trace) {
    let f = parse_rsm(&format!(
        "states {{A, B}} start A end B; inputs {{y: num}}; vars {{}}; params {{p}}; transition {{ if ({guard}) return \"B\"; else return \"A\"; }}"
    ))
    .unwrap();
    let p = parse_params(r#"{"p": 0}"#, &f).unwrap();
    let t = parse_trace(
        "{\"t\": 0, \"state\": \"A\", \"in\": {\"y\": 1}, \"var\": {}}\n{\"t\": 1, \"state\": \"A\", \"in\": {\"y\": -1}, \"var\": {}}\n",
        &f,
    )
    .unwrap();
    (f, p, t)
}

#[test]
fn worked_example_repair() {
    let (f, p, t, c) = fixture();
    let r = srtr(&f, &p, &t, &c, &RepairOptions::default()).unwrap();
    assert_eq!(r.deltas.iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>(), ["aimMargin", "maxDist", "kickTimeout"]);
    assert_eq!(r.deltas["aimMargin"], 0.0);
    assert_eq!(r.deltas["kickTimeout"], 0.0);
    let d = r.deltas["maxDist"];
    assert!(d > 0.0 && d <= 1.0, "{d}");
    assert_eq!(r.satisfied, [true]);
    assert_eq!(r.claimed, [true]);
    assert_eq!(r.params["viewAng"], p["viewAng"]);
    assert_eq!(step_transition(&f, t.get(5).unwrap(), &r.params).unwrap(), "KICK");
    assert!((r.objective - d).abs() < 1e-12);
    let report = r.report_json();
    assert_eq!(report.as_object().unwrap().keys().collect::<Vec<_>>(), ["deltas", "satisfied", "objective", "solver_ms"]);
}

#[test]
fn formula_is_unsatisfied_without_adjustment() {
    let (f, p, t, c) = fixture();
    let phi = correct_one(&f, &t, &p, &c[0]).unwrap();
    assert_eq!(phi.paths.len(), 1);
    let zero = [0.0, 0.0, 0.0];
    let open: Vec<bool> = phi.paths[0].iter().map(|a| a.holds(&zero, 0.0)).collect();
    assert_eq!(open, [true, true, false, true]);
    assert!(phi.holds(&[0.0, 0.0, 0.0], 0.0).is_none());
    assert!(phi.holds(&[0.0, 0.001, 0.0], 0.0).is_some());
    let recorded = Correction::new(5, "GOTO");
    let psi = correct_one(&f, &t, &p, &recorded).unwrap();
    assert!(psi.holds(&[0.0, 0.0, 0.0], 0.0).is_some());
}

#[test]
fn penalty_trades_against_adjustment() {
    let (f, p, t) = threshold("param:p > in:y");
    let cs = [Correction::new(0, "B"), Correction::new(1, "A")];
    let high = srtr(&f, &p, &t, &cs, &RepairOptions { penalty: 10.0, ..Default::default() }).unwrap();
    assert_eq!(high.claimed.iter().filter(|s| **s).count(), 1);
    assert_eq!(high.satisfied, high.claimed);
    assert!((high.deltas["p"].abs() - 1.0).abs() <= 1e-3, "{:?}", high.deltas);
    assert!((high.objective - 10.0 - high.deltas["p"].abs()).abs() < 1e-9);
    let low = srtr(&f, &p, &t, &cs, &RepairOptions { penalty: 0.4, ..Default::default() }).unwrap();
    assert_eq!(low.claimed, [false, false]);
    assert_eq!(low.deltas["p"], 0.0);
    assert!((low.objective - 0.8).abs() < 1e-12);
}

#[test]
fn not_equal_becomes_a_disjunction() {
    let (f, p, t) = threshold("param:p != 1");
    let phi = correct_one(&f, &t, &p, &Correction::new(0, "B")).unwrap();
    assert_eq!(phi.paths.len(), 2);
    let opts = RepairOptions { penalty: 10.0, ..Default::default() };
    let r = srtr(&f, &p, &t, &[Correction::new(0, "A")], &opts).unwrap();
    assert_eq!(r.deltas["p"], 1.0);
    assert_eq!(r.satisfied, [true]);
}

#[test]
fn bounds_limit_adjustments() {
    let (f, p, t) = threshold("param:p > in:y");
    let opts = RepairOptions { penalty: 10.0, bounds: [("p".to_string(), (-0.5, 0.5))].into_iter().collect(), ..Default::default() };
    let r = srtr(&f, &p, &t, &[Correction::new(0, "B")], &opts).unwrap();
    assert_eq!(r.satisfied, [false]);
    assert_eq!(r.deltas["p"], 0.0);
    let bad = RepairOptions { bounds: [("q".to_string(), (-1.0, 1.0))].into_iter().collect(), ..Default::default() };
    assert_eq!(srtr(&f, &p, &t, &[], &bad).unwrap_err().kind(), "KeyError");
    let bad = RepairOptions { bounds: [("p".to_string(), (0.5, 1.0))].into_iter().collect(), ..Default::default() };
    assert_eq!(srtr(&f, &p, &t, &[], &bad).unwrap_err().kind(), "InvalidConfig");
}

#[test]
fn input_errors() {
    let (f, p, t, _) = fixture();
    let o = RepairOptions::default();
    assert_eq!(srtr(&f, &p, &t, &[Correction::new(99, "KICK")], &o).unwrap_err(), RepairError::IndexError(99));
    assert_eq!(
        srtr(&f, &p, &t, &[Correction::new(5, "FLY")], &o).unwrap_err(),
        RepairError::UnknownState("FLY".into())
    );
    let o = RepairOptions { penalty: 0.0, ..Default::default() };
    assert_eq!(srtr(&f, &p, &t, &[], &o).unwrap_err().kind(), "InvalidConfig");
}

#[test]
fn no_corrections_means_no_change() {
    let (f, p, t, _) = fixture();
    let r = srtr(&f, &p, &t, &[], &RepairOptions::default()).unwrap();
    assert!(r.deltas.iter().all(|(_, d)| d == 0.0));
    assert_eq!(r.params, p);
    assert_eq!(r.objective, 0.0);
}

#[test]
fn apply_deltas_rejects_unrepairable_keys() {
    let (f, p, _, _) = fixture();
    let cls = classify_params(&f);
    let ok = apply_deltas(&cls, &p, &DeltaMap::from_iter([("maxDist", 0.5)])).unwrap();
    assert_eq!(ok["maxDist"], 80.5);
    assert_eq!(
        apply_deltas(&cls, &p, &DeltaMap::from_iter([("viewAng", 0.1)])).unwrap_err(),
        RepairError::KeyError("viewAng".into())
    );
    assert_eq!(apply_deltas(&cls, &p, &DeltaMap::from_iter([("nope", 0.1)])).unwrap_err().kind(), "KeyError");
}

#[test]
fn solver_choices_match_claims() {
    let (f, p, t) = threshold("param:p > in:y");
    let rp = correct_all(&f, &p, &t, &[Correction::new(0, "B"), Correction::new(1, "B")], &RepairOptions::default())
        .unwrap();
    let cheap = MaxSmtProblem { penalty: 10.0, ..rp.problem.clone() };
    let sol = crate::solver::solve_maxsmt(&cheap, &SolverConfig::default()).unwrap();
    assert!(sol.choices.iter().all(|c| matches!(c, Choice::Path(_))));
    assert!(sol.delta[0] > 1.0 && sol.delta[0] < 1.001);
}

#[test]
fn rounding_broken_claims_are_re_solved() {
    // The affine form says p = 0.506..., where the product rounds differently.
    let (f, _, t) = threshold("(0 - 1.21) * ((0 - 1.05) * param:p) == 0.6432040000000001");
    let p = parse_params(r#"{"p": 0.02}"#, &f).unwrap();
    let r = srtr(&f, &p, &t, &[Correction::new(0, "B")], &RepairOptions::default()).unwrap();
    assert_eq!(r.claimed, r.satisfied);
    assert_eq!(r.refinements, 1);
}

fn z3() -> Option<Vec<String>> {
    let found = std::process::Command::new("z3").arg("-version").output().ok()?;
    found.status.success().then(|| vec!["z3".into()])
}

#[test]
fn external_solver_agrees_with_internal() {
    let Some(cmd) = z3() else {
        eprintln!("z3 not on PATH; skipping");
        return;
    };
    let (f, p, t, c) = fixture();
    let internal = srtr(&f, &p, &t, &c, &RepairOptions::default()).unwrap();
    let ext = RepairOptions { backend: Backend::External { cmd, encoding: Encoding::Xor }, ..Default::default() };
    let external = srtr(&f, &p, &t, &c, &ext).unwrap();
    assert_eq!(external.satisfied, internal.satisfied);
    assert!((external.objective - internal.objective).abs() < 1e-6);
    for (k, d) in internal.deltas.iter() {
        assert!((external.deltas[k.as_str()] - d).abs() < 1e-6, "{k}");
    }
}
