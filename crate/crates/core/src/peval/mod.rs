//! Repairability analysis and partial evaluation of transition functions
//! against single trace elements.

mod classify;
mod partial;
mod residual;

pub use classify::{classify_params, Classification};
pub use partial::{peval, IdentMap, Sym};
pub use residual::{
    make_residual, make_residual_with, residual, residual_bindings, stray_identifiers, RStmt, ResidualFn,
};

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::dsl::{expr_to_string, parse_expr, parse_params, parse_rsm, parse_stmt, parse_trace, Expr, Ident, ParamMap, Stmt, Trace, TransitionFn, Value};
    use crate::interp::step_transition;

    const ATTACKER: &str = include_str!("../../fixtures/worked_example/attacker.rsm");
    const PARAMS: &str = include_str!("../../fixtures/worked_example/params.json");
    const TRACE: &str = include_str!("../../fixtures/worked_example/trace.jsonl");

    fn fixture() -> (TransitionFn, ParamMap, Trace) {
        let f = parse_rsm(ATTACKER).unwrap();
        let p = parse_params(PARAMS, &f).unwrap();
        let t = parse_trace(TRACE, &f).unwrap();
        (f, p, t)
    }

    fn with_body(params: &str, body: &str) -> TransitionFn {
        parse_rsm(&format!(
            "states {{A, B}} start A end B; inputs {{y: num, v: vec2}}; vars {{x: num, k: num = 1}}; params {{{params}}}; transition {body}"
        ))
        .unwrap()
    }

    #[test]
    fn attacker_classification() {
        let (f, _, _) = fixture();
        let c = classify_params(&f);
        assert_eq!(c.rep, ["aimMargin", "maxDist", "kickTimeout"]);
        assert_eq!(c.unrep, ["viewAng"]);
    }

    #[test]
    fn nothing_nonlinear_means_all_repairable() {
        let f = with_body("a, b", "{ return state; }");
        let c = classify_params(&f);
        assert_eq!(c.rep, ["a", "b"]);
        assert!(c.unrep.is_empty());
    }

    #[test]
    fn product_tie_marks_right_operand() {
        let f = with_body("a, b", "{ if (param:a * param:b > 1) return \"A\"; else return \"B\"; }");
        let c = classify_params(&f);
        assert_eq!((c.rep, c.unrep), (vec!["a".to_string()], vec!["b".to_string()]));
    }

    #[test]
    fn product_marks_smaller_side_and_divisor() {
        let f = with_body("a, b, c", "{ if ((param:a + param:b) * param:c > 1) return \"A\"; else return \"B\"; }");
        assert_eq!(classify_params(&f).unrep, ["c"]);
        let f = with_body("a, b, c", "{ if (param:c * (param:a + param:b) > 1) return \"A\"; else return \"B\"; }");
        assert_eq!(classify_params(&f).unrep, ["c"]);
        let f = with_body("a, b", "{ if ((param:a + param:b) / (param:a - 2) > 1) return \"A\"; else return \"B\"; }");
        assert_eq!(classify_params(&f).unrep, ["a"]);
    }

    #[test]
    fn dependence_through_variables() {
        let f = with_body(
            "a, b",
            "{ var:x := param:a + in:y; if (var:x * param:b > 1) return \"A\"; else return \"B\"; }",
        );
        assert_eq!(classify_params(&f).unrep, ["b"]);
        let f = with_body("a", "{ var:x := param:a; if (cos(var:x) > 0) return \"A\"; else return \"B\"; }");
        assert_eq!(classify_params(&f).unrep, ["a"]);
    }

    #[test]
    fn unary_pass_runs_before_products() {
        // sin(a) frees the product a * b, so b stays repairable.
        let f = with_body("a, b", "{ if (param:a * param:b > sin(param:a)) return \"A\"; else return \"B\"; }");
        assert_eq!(classify_params(&f).unrep, ["a"]);
    }

    #[test]
    fn worked_example_residual() {
        let (f, p, t) = fixture();
        let r = make_residual(&f, t.get(5).unwrap(), &p).unwrap();
        let guard = parse_expr(
            "0.05235987755982988 < param:aimMargin && 50 < param:maxDist && 40 < param:maxDist * 0.49999999999999994 && 5 > 2 + param:kickTimeout",
        )
        .unwrap();
        assert_eq!(
            r.body,
            RStmt::If(guard, Box::new(RStmt::Return("KICK".into())), Box::new(RStmt::Return("GOTO".into())))
        );
        assert_eq!((PI / 60.0).to_string(), "0.05235987755982988");
        assert_eq!((PI / 6.0).sin(), 0.49999999999999994);
        assert!(stray_identifiers(&r).is_empty());
        assert_eq!(r.eval(&p).unwrap(), "GOTO");
        let printed = r.to_string();
        assert!(printed.starts_with("if (0.05235987755982988 < param:aimMargin && 50 < param:maxDist"), "{printed}");
        assert!(printed.contains("return \"KICK\";") && printed.contains("else return \"GOTO\";"), "{printed}");
    }

    #[test]
    fn concrete_guards_specialize_to_a_return() {
        let (f, p, t) = fixture();
        let r = make_residual(&f, t.get(0).unwrap(), &p).unwrap();
        assert_eq!(r.body, RStmt::Return("GOTO".into()));
    }

    #[test]
    fn assignment_flows_into_guard() {
        let f = with_body("p", "{ var:x := param:p + 1; if (var:x > in:y) return \"A\"; else return \"B\"; }");
        let tau = crate::dsl::TraceElement {
            t: 0,
            state: "A".into(),
            ins: [("y".to_string(), Value::Num(3.0)), ("v".to_string(), Value::Vec2(0.0, 0.0))].into_iter().collect(),
            vars: [("k".to_string(), Value::Num(1.0))].into_iter().collect(),
        };
        let p = ParamMap::from_iter([("p", 1.0)]);
        let r = make_residual(&f, &tau, &p).unwrap();
        match &r.body {
            RStmt::If(g, _, _) => assert_eq!(expr_to_string(g), "param:p + 1 > 3"),
            other => panic!("{other:?}"),
        }
        for v in [1.0, 2.0, 2.5, 3.0] {
            let q = ParamMap::from_iter([("p", v)]);
            assert_eq!(r.eval(&q), step_transition(&f, &tau, &q));
        }
    }

    #[test]
    fn assignments_under_retained_conditionals_split_paths() {
        let f = with_body(
            "p, q",
            "{ if (param:p > 0) var:x := param:q; else var:x := 2 * param:q; if (var:x > 1) return \"A\"; else return \"B\"; }",
        );
        let tau = crate::dsl::TraceElement {
            t: 0,
            state: "A".into(),
            ins: [("y".to_string(), Value::Num(0.0)), ("v".to_string(), Value::Vec2(0.0, 0.0))].into_iter().collect(),
            vars: [("k".to_string(), Value::Num(1.0))].into_iter().collect(),
        };
        let p = ParamMap::from_iter([("p", 1.0), ("q", 0.7)]);
        let r = make_residual(&f, &tau, &p).unwrap();
        assert_eq!(r.rep, ["p", "q"]);
        assert!(stray_identifiers(&r).is_empty());
        for (a, b) in [(1.0, 0.7), (-1.0, 0.7), (1.0, 1.2), (-1.0, 0.4), (0.0, 0.5)] {
            let q = ParamMap::from_iter([("p", a), ("q", b)]);
            assert_eq!(r.eval(&q), step_transition(&f, &tau, &q));
        }
    }

    #[test]
    fn binding_everything_is_interpretation() {
        let (f, p, t) = fixture();
        for tau in t.elements() {
            let mut b = residual_bindings(&classify_params(&f), tau, &p);
            for (n, v) in p.iter() {
                b.insert(Ident::Param(n.clone()), Value::Num(v));
            }
            let expected = step_transition(&f, tau, &p).unwrap();
            let mut body = peval(&f, &b);
            while let Stmt::Block(mut v) = body {
                assert_eq!(v.len(), 1);
                body = v.pop().unwrap();
            }
            assert_eq!(body, Stmt::Return(Expr::state_lit(expected)));
        }
    }

    #[test]
    fn binding_nothing_is_identity() {
        let (f, _, _) = fixture();
        assert_eq!(peval(&f, &IdentMap::new()), f.body);
    }

    fn substitute(s: &Stmt, id: &Ident, v: &Value) -> Stmt {
        fn e(x: &Expr, id: &Ident, v: &Value) -> Expr {
            match x {
                Expr::Ident(i) if i == id => Expr::Const(v.clone()),
                Expr::Const(_) | Expr::Ident(_) => x.clone(),
                Expr::Unary(op, a) => Expr::unary(*op, e(a, id, v)),
                Expr::Binary(op, l, r) => Expr::binary(*op, e(l, id, v), e(r, id, v)),
                Expr::Vec2(a, b) => Expr::Vec2(Box::new(e(a, id, v)), Box::new(e(b, id, v))),
            }
        }
        match s {
            Stmt::Return(x) => Stmt::Return(e(x, id, v)),
            Stmt::Assign(n, x) => Stmt::Assign(n.clone(), e(x, id, v)),
            Stmt::If(g, t, f) => Stmt::if_else(e(g, id, v), substitute(t, id, v), substitute(f, id, v)),
            Stmt::Block(b) => Stmt::Block(b.iter().map(|s| substitute(s, id, v)).collect()),
        }
    }

    #[test]
    fn binding_only_time() {
        let (f, _, _) = fixture();
        let b = IdentMap::from([(Ident::Input("time".into()), Value::Num(5.0))]);
        let expected = substitute(&f.body, &Ident::Input("time".into()), &Value::Num(5.0));
        assert_eq!(peval(&f, &b), expected);
    }

    #[test]
    fn merge_materializes_known_values() {
        let f = with_body(
            "p",
            "{ var:x := 1; if (param:p > 0) var:x := 2; if (var:x > 1) return \"A\"; else return \"B\"; }",
        );
        let b = IdentMap::new();
        let out = peval(&f, &b);
        let expected = parse_stmt(
            "{ if (param:p > 0) var:x := 2; else var:x := 1; if (var:x > 1) return \"A\"; else return \"B\"; }",
        )
        .unwrap();
        assert_eq!(out, expected);
    }
}
