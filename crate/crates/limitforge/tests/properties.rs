//! Generative invariants. Each property states something that must hold for
//! whole families of inputs: grammar round-trips, quadrature additivity,
//! cache determinism, schedule shape, trajectory monotonicity, and the
//! self-consistency of ratio reports.

use limitforge::asymptote::{CumulativeIntegral, GrowthLaw, LawForm};
use limitforge::engine::{iterate, Driver, RecurrenceSpec};
use limitforge::funcdsl::{parse, Expr, Node, UnaryFn};
use limitforge::quad::{integrate, DEFAULT_PANEL_BUDGET};
use limitforge::schedule::Schedule;
use limitforge::series::DefectSequence;
use limitforge::verify::{abelian_average, ratio_report_values, Trend};
use proptest::prelude::*;

fn node_strategy() -> impl Strategy<Value = Node> {
    let leaf = prop_oneof![
        (0.01f64..100.0).prop_map(Node::Const),
        Just(Node::Var),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        let exponent = prop_oneof![
            Just(-2.0f64),
            Just(-1.5),
            Just(-0.5),
            Just(0.5),
            Just(2.0),
            Just(3.0),
            -3.0f64..3.0,
        ];
        let unary = prop_oneof![
            Just(UnaryFn::Ln),
            Just(UnaryFn::Exp),
            Just(UnaryFn::Sin),
            Just(UnaryFn::Sqrt),
        ];
        prop_oneof![
            inner.clone().prop_map(|x| Node::Neg(Box::new(x))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Node::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Node::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Node::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Node::Div(Box::new(a), Box::new(b))),
            (inner.clone(), exponent).prop_map(|(a, e)| Node::Pow(Box::new(a), e)),
            (unary, inner).prop_map(|(f, a)| Node::Call(f, Box::new(a))),
        ]
    })
}

fn spec_strategy() -> impl Strategy<Value = RecurrenceSpec> {
    prop_oneof![
        (0.25f64..4.0).prop_map(|a1| RecurrenceSpec::FirstOrderInverse {
            f: parse("t").unwrap(),
            g: None,
            a1,
        }),
        (0.5f64..3.0).prop_map(|a1| RecurrenceSpec::CumulativeSecondOrder { a1 }),
        (1u32..4, 1u32..4).prop_map(|(p, q)| RecurrenceSpec::TauberianGenerator { p, q }),
        (0.5f64..3.0, 0.5f64..3.0).prop_map(|(a1, b1)| RecurrenceSpec::Coupled { a1, b1 }),
        (0.05f64..0.95).prop_map(|x1| RecurrenceSpec::QuadraticMap { x1 }),
        (0.5f64..3.0, prop::bool::ANY).prop_map(|(a1, sin)| RecurrenceSpec::DrivenSqrt {
            driver: if sin { Driver::SinSquared } else { Driver::One },
            a1,
        }),
    ]
}

/// Increasing families grow, the quadratic map and generator decay.
fn is_decreasing(spec: &RecurrenceSpec) -> bool {
    matches!(
        spec,
        RecurrenceSpec::QuadraticMap { .. } | RecurrenceSpec::TauberianGenerator { .. }
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rendering_round_trips(tree in node_strategy()) {
        let expr = Expr::from_root(tree);
        let text = expr.render();
        let reparsed = parse(&text)
            .unwrap_or_else(|e| panic!("rendering `{text}` does not re-parse: {e}"));
        prop_assert_eq!(reparsed.root(), expr.root(), "{}", text);
        prop_assert_eq!(reparsed.render(), text.clone());
        for t in [0.9, 1.7, 3.1] {
            match (expr.eval(t), reparsed.eval(t)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits(), "{} at {}", text, t),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{} at {}: {:?} vs {:?}", text, t, a, b),
            }
        }
    }

    #[test]
    fn quadrature_is_additive(
        points in proptest::collection::vec(0.5f64..20.0, 3),
        c in 0.1f64..5.0,
        p in -1.5f64..2.5,
    ) {
        let mut pts = points;
        pts.sort_by(f64::total_cmp);
        let (lo, mid, hi) = (pts[0], pts[1], pts[2]);
        let f = Expr::from_root(Node::Mul(
            Box::new(Node::Const(c)),
            Box::new(Node::Pow(Box::new(Node::Var), p)),
        ));
        let g = |t: f64| f.eval(t);
        let tol = 1e-9;
        let mut budget = DEFAULT_PANEL_BUDGET;
        let whole = integrate(&g, lo, hi, tol, &mut budget).unwrap();
        let mut budget = DEFAULT_PANEL_BUDGET;
        let left = integrate(&g, lo, mid, tol, &mut budget).unwrap();
        let mut budget = DEFAULT_PANEL_BUDGET;
        let right = integrate(&g, mid, hi, tol, &mut budget).unwrap();
        let slack = 40.0 * tol * whole.abs().max(1.0);
        prop_assert!(
            (whole - (left + right)).abs() <= slack,
            "{} vs {} + {}",
            whole, left, right
        );
    }

    #[test]
    fn cumulative_cache_is_order_independent(
        queries in proptest::collection::vec(0.0f64..5000.0, 1..40),
        which in 0usize..4,
    ) {
        let srcs = ["t", "t+1", "2", "t^2"];
        let build = || {
            CumulativeIntegral::build(
                parse(srcs[which]).unwrap(), 0.0, 1.0, 1e-9, DEFAULT_PANEL_BUDGET,
            )
            .unwrap()
        };
        let fwd = build();
        let bwd = build();
        let forward: Vec<f64> = queries.iter().map(|&x| fwd.value(x).unwrap()).collect();
        let mut backward: Vec<f64> =
            queries.iter().rev().map(|&x| bwd.value(x).unwrap()).collect();
        backward.reverse();
        for (i, (a, b)) in forward.iter().zip(&backward).enumerate() {
            prop_assert_eq!(a.to_bits(), b.to_bits(), "query {} of {}", i, srcs[which]);
        }

        // Positive integrand: sorting the queries must sort the values.
        let mut sorted = queries.clone();
        sorted.sort_by(f64::total_cmp);
        let values: Vec<f64> = sorted.iter().map(|&x| fwd.value(x).unwrap()).collect();
        for w in values.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn geometric_schedule_shape(n_max in 1u64..1_000_000_000) {
        let cps = Schedule::Geometric125 { n_max }.checkpoints().unwrap();
        prop_assert_eq!(cps[0], 1);
        prop_assert_eq!(*cps.last().unwrap(), n_max);
        for w in cps.windows(2) {
            prop_assert!(w[0] < w[1]);
        }
        for &c in cps.iter().take(cps.len() - 1) {
            let mut m = c;
            while m % 10 == 0 {
                m /= 10;
            }
            prop_assert!(matches!(m, 1 | 2 | 5), "{c} is not a 1-2-5 point");
        }
    }

    #[test]
    fn trajectories_move_one_way(spec in spec_strategy(), n_max in 2u64..3000) {
        let traj = iterate(&spec, &Schedule::Geometric125 { n_max }).unwrap();
        let cps = Schedule::Geometric125 { n_max }.checkpoints().unwrap();
        prop_assert_eq!(&traj.checkpoints, &cps);
        prop_assert_eq!(traj.values.len(), cps.len());

        let dir_ok = |vs: &[f64]| {
            vs.windows(2).all(|w| if is_decreasing(&spec) { w[1] <= w[0] } else { w[1] >= w[0] })
        };
        prop_assert!(dir_ok(&traj.values));
        if let Some(b) = &traj.values_b {
            prop_assert_eq!(b.len(), cps.len());
            prop_assert!(dir_ok(b));
        }
        if let Some(aux) = &traj.aux_sums {
            // Partial sums of positive terms are increasing regardless of
            // the sequence's own direction.
            prop_assert_eq!(aux.len(), cps.len());
            prop_assert!(aux.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn abelian_average_stays_in_hull(xs in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
        let avg = abelian_average(&xs);
        prop_assert_eq!(avg.len(), xs.len());
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (k, &a) in avg.iter().enumerate() {
            lo = lo.min(xs[k]);
            hi = hi.max(xs[k]);
            let eps = 1e-9 * hi.abs().max(lo.abs()).max(1.0);
            prop_assert!(a >= lo - eps && a <= hi + eps, "entry {k}: {a} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn closed_form_laws_are_their_own_fixed_point(
        c in 0.05f64..20.0,
        p in 0.05f64..2.5,
        log_power in prop_oneof![Just(0.0f64), Just(1.0)],
        len in 4usize..9,
        start in 3u64..50,
    ) {
        let law = GrowthLaw {
            form: LawForm::ClosedForm { constant: c, power: p, log_power },
            description: "synthetic".to_string(),
        };
        let checkpoints: Vec<u64> = (0..len as u32).map(|i| start * 3u64.pow(i)).collect();
        let values: Vec<f64> = checkpoints
            .iter()
            .map(|&n| law.evaluate(n as f64).unwrap())
            .collect();
        let rep = ratio_report_values(&checkpoints, &values, &law, 1e-12).unwrap();
        for r in &rep.ratios {
            prop_assert_eq!(r.to_bits(), 1.0f64.to_bits());
        }
        prop_assert_eq!(rep.trend, Trend::Converging);
    }

    #[test]
    fn defect_grows_monotonically_and_stays_bounded(
        beta in 0.05f64..2.0,
        ns in proptest::collection::btree_set(1u64..2000, 2..12),
    ) {
        // For a positive non-increasing term function every defect
        // increment f(k) - integral over [k-1, k] lies in [f(k)-f(k-1), 0],
        // so the defect decreases from f(1) and stays at or above f(n).
        let f = Expr::from_root(Node::Pow(Box::new(Node::Var), -beta));
        let checkpoints: Vec<u64> = ns.into_iter().collect();
        let seq = DefectSequence::collect(&f, &checkpoints).unwrap();
        let first_term = f.eval(1.0).unwrap();
        let mut prev = f64::INFINITY;
        for &(n, a) in &seq.samples {
            prop_assert!(a <= prev + 1e-12, "defect rose at n = {n}");
            prop_assert!(a <= first_term + 1e-12, "defect exceeds f(1) at n = {n}");
            prop_assert!(
                a >= f.eval(n as f64).unwrap() - 1e-12,
                "defect fell below f(n) at n = {n}"
            );
            prev = a;
        }
    }
}
