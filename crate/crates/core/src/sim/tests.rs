use super::world::norm;
use super::*;
use crate::dsl::{parse_params, parse_trace, Correction, Value};
use crate::repair::{srtr, RepairOptions};

fn attacker_at(ball: [f64; 2], vel: [f64; 2]) -> Scenario {
    let mut sc = gen_scenarios(0, 1, Kind::Attacker).remove(0);
    sc.ball = ball;
    sc.ball_vel = vel;
    sc.robot = [0.0, 0.0];
    sc.robot_ang = 0.0;
    sc
}

#[test]
fn generation_is_deterministic() {
    for kind in Kind::ALL {
        assert_eq!(gen_scenarios(7, 3, kind), gen_scenarios(7, 3, kind));
        assert_ne!(gen_scenarios(7, 3, kind), gen_scenarios(8, 3, kind));
        assert!(gen_scenarios(7, 0, kind).is_empty());
        assert!(gen_scenarios(7, 50, kind).iter().all(|s| s.validate().is_ok()));
    }
}

#[test]
fn heatmap_has_twelve_angles_per_cell() {
    let s = heatmap_scenarios();
    assert_eq!(s.len(), 1200);
    let angles: std::collections::BTreeSet<i64> =
        s.iter().map(|sc| (sc.ball_vel[1].atan2(sc.ball_vel[0]) * 1e6).round() as i64).collect();
    assert_eq!(angles.len(), HEATMAP_ANGLES);
    assert!(s.iter().all(|sc| sc.validate().is_ok()));
}

#[test]
fn immobile_robot_times_out() {
    for kind in Kind::ALL {
        let mut sc = gen_scenarios(3, 1, kind).remove(0);
        sc.physics.max_speed = 0.0;
        sc.physics.max_ang_rate = 0.0;
        let o = simulate(&kind.rsm(), &kind.reference(), &sc, 300).unwrap();
        assert!(!o.success, "{kind:?}");
        assert!(matches!(o.reason, Termination::Timeout | Termination::OutOfBounds), "{kind:?} {:?}", o.reason);
    }
}

#[test]
fn docker_already_docked() {
    let mut sc = gen_scenarios(5, 1, Kind::Docker).remove(0);
    sc.robot = [sc.target[0] + 0.01, sc.target[1]];
    sc.robot_ang = sc.target_ang;
    let o = simulate(&Kind::Docker.rsm(), &Kind::Docker.baseline(), &sc, 100).unwrap();
    assert_eq!(o.reason, Termination::Docked);
    assert!(o.trace.len() <= 2);
    assert_eq!(o.trace.elements().last().unwrap().state, "END");
}

#[test]
fn repaired_attacker_scores_on_intercept() {
    let f = Kind::Attacker.rsm();
    // ball rolling away from the robot, toward the goal side
    let sc = attacker_at([1.0, 0.5], [0.5, 0.0]);
    let base = simulate(&f, &Kind::Attacker.baseline(), &sc, 1200).unwrap();
    assert!(!base.success);
    assert!(base.trace.elements().iter().any(|e| e.state == "INTERCEPT"));
    let c = first_disagreement(&f, &Kind::Attacker.baseline(), &Kind::Attacker.reference(), &base.trace).unwrap();
    assert_eq!(c.expected, "KICK");
    let r = srtr(&f, &Kind::Attacker.baseline(), &base.trace, &[c], &RepairOptions::default()).unwrap();
    assert_eq!(r.satisfied, [true]);
    let after = simulate(&f, &r.params, &sc, 1200).unwrap();
    assert_eq!(after.reason, Termination::GoalScored);
}

#[test]
fn simulation_is_deterministic() {
    for kind in Kind::ALL {
        let sc = gen_scenarios(9, 1, kind).remove(0);
        let f = kind.rsm();
        assert_eq!(simulate(&f, &kind.baseline(), &sc, 600), simulate(&f, &kind.baseline(), &sc, 600));
    }
}

#[test]
fn success_rate_basics() {
    let f = Kind::Docker.rsm();
    let p = Kind::Docker.reference();
    let s = gen_scenarios(2, 6, Kind::Docker);
    let (rate, outs) = success_rate(&f, &p, &s, 1200).unwrap();
    assert_eq!(rate, 1.0);
    assert_eq!(outs.len(), 6);
    let doubled: Vec<Scenario> = s.iter().chain(&s).cloned().collect();
    assert_eq!(success_rate(&f, &p, &doubled, 1200).unwrap().0, rate);
    assert_eq!(success_rate(&f, &p, &[], 1200).unwrap_err(), SimError::EmptyScenarioSet);
    let csv = heatmap_csv(&s, &outs);
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("x,y,angle,success\n"));
}

#[test]
fn scenario_checks() {
    let mut sc = gen_scenarios(1, 1, Kind::Attacker).remove(0);
    sc.physics.dt = 0.0;
    assert_eq!(simulate(&Kind::Attacker.rsm(), &Kind::Attacker.baseline(), &sc, 10).unwrap_err().kind(), "InvalidScenario");
    let sc = gen_scenarios(1, 1, Kind::Attacker).remove(0);
    let err = simulate(&Kind::Docker.rsm(), &Kind::Docker.baseline(), &sc, 10).unwrap_err();
    assert_eq!(err.kind(), "SignatureMismatch");
    let json = serde_json::to_string(&sc).unwrap();
    assert!(json.contains("\"ballVel\""));
    assert_eq!(serde_json::from_str::<Scenario>(&json).unwrap(), sc);
}

#[test]
fn physics_sanity() {
    for kind in Kind::ALL {
        for sc in gen_scenarios(21, 8, kind) {
            let o = simulate(&kind.rsm(), &kind.baseline(), &sc, 600).unwrap();
            let els = o.trace.elements();
            let vec = |e: &crate::dsl::TraceElement, k: &str| match e.ins.get(k) {
                Some(Value::Vec2(x, y)) => [*x, *y],
                _ => [0.0, 0.0],
            };
            for w in els.windows(2) {
                let step = norm(super::world::sub(vec(&w[1], "robotLoc"), vec(&w[0], "robotLoc")));
                assert!(step <= sc.physics.max_speed * sc.physics.dt + 1e-12, "{kind:?}: {step}");
                if kind != Kind::Docker && w[1].ins["kicked"] == w[0].ins["kicked"] {
                    let (a, b) = (norm(vec(&w[0], "ballVel")), norm(vec(&w[1], "ballVel")));
                    assert!(b <= a + 1e-12, "{kind:?}: ball sped up {a} -> {b}");
                }
            }
        }
    }
}

const ATTACKER: &str = include_str!("../../fixtures/worked_example/attacker.rsm");
const PARAMS: &str = include_str!("../../fixtures/worked_example/params.json");
const TRACE: &str = include_str!("../../fixtures/worked_example/trace.jsonl");

#[test]
fn grid_search_on_worked_example() {
    let f = crate::dsl::parse_rsm(ATTACKER).unwrap();
    let p = parse_params(PARAMS, &f).unwrap();
    let t = parse_trace(TRACE, &f).unwrap();
    let labeled = vec![(t.get(5).unwrap().clone(), "KICK".to_string())];
    let grid = vec![("maxDist".to_string(), vec![79.0, 80.0, 81.0])];
    let g = exhaustive_search(&f, &p, &grid, &labeled).unwrap();
    assert_eq!(g.params["maxDist"], 81.0);
    assert_eq!((g.satisfied, g.points), (1, 3));
    let g = exhaustive_search(&f, &p, &grid, &[]).unwrap();
    assert_eq!(g.params["maxDist"], 79.0);
    let huge = vec![("maxDist".to_string(), vec![0.0; 10_000]), ("aimMargin".to_string(), vec![0.0; 10_000])];
    assert_eq!(exhaustive_search(&f, &p, &huge, &labeled).unwrap_err(), SimError::GridTooLarge(100_000_000));
}

#[test]
fn slicing_fixes_parameters() {
    let f = crate::dsl::parse_rsm(ATTACKER).unwrap();
    let p = parse_params(PARAMS, &f).unwrap();
    let t = parse_trace(TRACE, &f).unwrap();
    let fixed: ParamMap = p.iter().filter(|(n, _)| *n != "maxDist" && *n != "aimMargin").map(|(n, v)| (n.clone(), v)).collect();
    let s = slice_params(&f, &fixed);
    assert_eq!(s.params, ["aimMargin", "maxDist"]);
    let free: ParamMap = [("aimMargin", p["aimMargin"]), ("maxDist", p["maxDist"])].into_iter().collect();
    for tau in t.elements() {
        assert_eq!(crate::interp::step_transition(&s, tau, &free), crate::interp::step_transition(&f, tau, &p));
    }
    let r = srtr(&s, &free, &t, &[Correction::new(5, "KICK")], &RepairOptions::default()).unwrap();
    assert_eq!(r.satisfied, [true]);
}

#[test]
fn labeling_renumbers_steps() {
    let kind = Kind::Docker;
    let f = kind.rsm();
    let outs: Vec<_> =
        gen_scenarios(4, 5, kind).iter().map(|sc| simulate(&f, &kind.baseline(), sc, 1200).unwrap().trace).collect();
    let (trace, cs) = label_failures(&f, &kind.baseline(), &kind.reference(), outs, 3);
    assert_eq!(cs.len(), 3);
    assert_eq!(trace.len(), 3);
    for (i, c) in cs.iter().enumerate() {
        assert_eq!(c.t, i as u64);
        assert!(c.expected.starts_with("S2_"));
    }
}
