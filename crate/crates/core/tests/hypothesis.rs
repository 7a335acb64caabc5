mod common;

use common::{random_predicate_text, rng};
use proptest::prelude::*;
use regboot::bootstrap::{run, ResamplePlan};
use regboot::hypothesis::{
    confidence_level, evaluate, parse, ArithOp, Builtin, CmpOp, CoefRef, ErrorKind, Expr,
    Hypothesis, HypothesisError, ModelContext,
};
use regboot::synth::{synth_generate, SynthParams};
use regboot::ModelSpec;

fn num_leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..1000).prop_map(|v| Expr::Num(v as f64)),
        (0.0..1e4f64).prop_map(Expr::Num),
        Just(Expr::Num(f64::INFINITY)),
        Just(Expr::SampleSize),
        Just(Expr::Curv),
        Just(Expr::Vertex),
        (0usize..6).prop_map(|i| Expr::Coef(CoefRef::Index(i))),
        prop::sample::select(vec!["x", "x^2", "intercept", "c1", "and"])
            .prop_map(|s| Expr::Coef(CoefRef::Name(s.to_string()))),
    ]
}

fn num_expr() -> impl Strategy<Value = Expr> {
    num_leaf().prop_recursive(4, 24, 2, |inner| {
        let op = prop::sample::select(vec![ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div]);
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Pred(Box::new(e))),
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner).prop_map(|(op, a, b)| Expr::Arith(op, Box::new(a), Box::new(b))),
        ]
    })
}

fn bool_expr() -> impl Strategy<Value = Expr> {
    let cmp = prop::sample::select(vec![CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq]);
    let leaf = prop_oneof![
        (cmp, num_expr(), num_expr()).prop_map(|(op, a, b)| Expr::Compare(op, Box::new(a), Box::new(b))),
        (num_expr(), num_expr(), num_expr()).prop_map(|(v, lo, hi)| Expr::Within {
            value: Box::new(v),
            lo: Box::new(lo),
            hi: Box::new(hi),
        }),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Not(Box::new(e))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::Or(Box::new(a), Box::new(b))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn printed_tree_parses_back(e in bool_expr()) {
        let text = e.to_string();
        prop_assert_eq!(parse(&text).unwrap(), e, "{}", text);
    }

    #[test]
    fn printing_is_a_fixed_point(seed in any::<u64>()) {
        let text = random_predicate_text(&mut rng(seed), 4);
        let first = parse(&text).unwrap_or_else(|e| panic!("{text}: {}", e.render(&text)));
        let canon = first.to_string();
        let second = parse(&canon).unwrap();
        prop_assert_eq!(&second, &first);
        prop_assert_eq!(second.to_string(), canon);
    }

    #[test]
    fn inverted_u_and_negative_exclusive(b1 in -5.0..5.0f64, b2 in -1.0..1.0f64, c in -3.0..3.0f64, adj in -5.0..5.0f64) {
        let spec = ModelSpec::new("y", "x", 2, &["c"]);
        let coefs = [10.0, b1, b2, c];
        let adj = [adj];
        let ctx = ModelContext::new(&coefs, &spec, 50, &adj).unwrap();
        let u = evaluate(&Hypothesis::from_builtin(None, Builtin::InvertedU).expr, &ctx).unwrap();
        let neg = evaluate(&Hypothesis::from_builtin(None, Builtin::Negative { at: 25.0 }).expr, &ctx).unwrap();
        prop_assert!(!(u.value && neg.value));
    }

    #[test]
    fn shape_predicates_invariant_to_response_scale(b1 in -5.0..5.0f64, b2 in -1.0..1.0f64, s in 0.001..1000.0f64) {
        let spec = ModelSpec::new("y", "x", 2, &[]);
        let a = [3.0, b1, b2];
        let scaled = [3.0 * s, b1 * s, b2 * s];
        for b in Builtin::defaults() {
            let expr = Hypothesis::from_builtin(None, b).expr;
            let x = evaluate(&expr, &ModelContext::new(&a, &spec, 10, &[]).unwrap()).unwrap();
            let y = evaluate(&expr, &ModelContext::new(&scaled, &spec, 10, &[]).unwrap()).unwrap();
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn complement_sums_to_one(outcomes in prop::collection::vec(any::<bool>(), 1..300)) {
        let flipped: Vec<bool> = outcomes.iter().map(|o| !o).collect();
        let total = confidence_level(&outcomes).unwrap() + confidence_level(&flipped).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn error_classes_are_positioned() {
    // (text, kind, 0-based column)
    let corpus = [
        ("curv() < 0 & vertex() > 0", ErrorKind::Lexical, 11),
        ("curv() < 0 @", ErrorKind::Lexical, 11),
        ("coef(\"x^2) < 0", ErrorKind::Lexical, 5),
        ("1.2.3 < 4", ErrorKind::Lexical, 0),
        ("pred(25) <", ErrorKind::Syntax, 10),
        ("curv() < 0 &&", ErrorKind::Syntax, 13),
        ("(curv() < 0", ErrorKind::Syntax, 11),
        ("curv() < 0 < 1", ErrorKind::Syntax, 11),
        ("slope() > 0", ErrorKind::Syntax, 0),
        ("vertex() in [1, 2", ErrorKind::Syntax, 17),
        ("curv(1) < 0", ErrorKind::Syntax, 5),
        ("curv()", ErrorKind::Type, 0),
        ("curv() + 1", ErrorKind::Type, 0),
        ("!curv() < 0", ErrorKind::Type, 1),
        ("curv() < 0 && 5", ErrorKind::Type, 14),
        ("pred(curv() < 0) > 1", ErrorKind::Type, 5),
        ("(curv() < 0) + 1 > 0", ErrorKind::Type, 0),
    ];
    for (text, kind, pos) in corpus {
        let e = parse(text).expect_err(text);
        assert_eq!((e.kind, e.position), (kind, pos), "{text}: {}", e.message);
        let rendered = e.render(text);
        assert!(rendered.contains(&format!("column {}", pos + 1)), "{rendered}");
    }
}

#[test]
fn builtin_texts_parse_and_print_canonically() {
    for b in Builtin::defaults() {
        let h = Hypothesis::from_builtin(None, b);
        assert_eq!(h.expr.to_string(), parse(&h.text).unwrap().to_string());
    }
    assert_eq!(
        Builtin::OptimumIn { lo: 20.0, hi: f64::INFINITY }.text(),
        "curv() < 0 && vertex() > 0 && vertex() in [20,inf]"
    );
}

#[test]
fn references_resolve() {
    assert_eq!(Hypothesis::from_arg("inverted_u").unwrap().name, "inverted_u");
    let h = Hypothesis::from_arg("late=negative(40)").unwrap();
    assert_eq!((h.name.as_str(), h.builtin), ("late", Some(Builtin::Negative { at: 40.0 })));
    let h = Hypothesis::from_arg("steep=coef(x) > 1").unwrap();
    assert!(h.builtin.is_none());
    assert!(matches!(Hypothesis::from_arg("optimum_in(5,1)"), Err(HypothesisError::UnknownBuiltin(_))));
}

#[test]
fn zero_curvature_vertex_is_undefined_and_false() {
    let spec = ModelSpec::new("y", "x", 2, &[]);
    let coefs = [1.0, 2.0, 0.0];
    let ctx = ModelContext::new(&coefs, &spec, 5, &[]).unwrap();
    // Without short-circuit the vertex is still evaluated and poisons the result.
    let o = evaluate(&parse("1 < 2 || vertex() > 0").unwrap(), &ctx).unwrap();
    assert!(o.undefined && !o.value);
    let o = evaluate(&parse("!(vertex() > 0)").unwrap(), &ctx).unwrap();
    assert!(o.undefined && !o.value);
    let o = evaluate(&parse("curv() <= 0").unwrap(), &ctx).unwrap();
    assert!(!o.undefined && o.value);
}

#[test]
fn features_missing_from_the_model_are_rejected() {
    let linear = ModelSpec::new("y", "x", 1, &[]);
    assert!(parse("curv() < 0").unwrap().check(&linear).is_err());
    assert!(parse("vertex() > 0").unwrap().check(&linear).is_err());
    assert!(parse("coef(c9) > 0").unwrap().check(&linear).is_err());
    assert!(parse("coef(2) > 0").unwrap().check(&linear).is_err());
    assert!(parse("coef(x) > 0 && pred(3) < n").unwrap().check(&linear).is_ok());
}

#[test]
fn optimum_bands_partition_inverted_u_replicates() {
    let params = SynthParams { noise_sd: 15.0, ..SynthParams::default() };
    let ds = synth_generate(&params, 9).unwrap();
    let spec = params.model_spec();
    let adj = ds.column_means(&spec.controls).unwrap();
    let hyps: Vec<Hypothesis> = [
        "curv() < 0 && vertex() > 0",
        "curv() < 0 && vertex() > 0 && vertex() < 10",
        "curv() < 0 && vertex() >= 10 && vertex() < 20",
        "curv() < 0 && vertex() >= 20",
    ]
    .iter()
    .enumerate()
    .map(|(i, t)| Hypothesis::custom(&format!("h{i}"), t).unwrap())
    .collect();
    let r = run(&ds, &spec, &ResamplePlan::new(1000, 4), &hyps, &adj).unwrap();
    let bins = r.true_count(1) + r.true_count(2) + r.true_count(3);
    assert_eq!(bins, r.true_count(0));
    assert_eq!(bins + (1000 - r.true_count(0)), 1000);
    for row in &r.outcomes {
        assert!(row[1..].iter().filter(|&&b| b).count() <= 1);
    }
}
