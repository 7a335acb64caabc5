mod common;

use common::{percentile_oracle, rng};
use rand::Rng;
use regboot::bootstrap::{
    derive_stream, draw_indices, percentile, percentile_ci, run, run_with_workers, BootstrapError,
    ResamplePlan,
};
use regboot::hypothesis::{Builtin, Hypothesis};
use regboot::synth::{synth_generate, SynthParams};
use regboot::{fit_view, Dataset, ModelSpec};

fn defaults() -> Vec<Hypothesis> {
    Builtin::defaults().into_iter().map(|b| Hypothesis::from_builtin(None, b)).collect()
}

fn sample(seed: u64) -> (Dataset, ModelSpec, Vec<f64>) {
    let params = SynthParams::default();
    let ds = synth_generate(&params, seed).unwrap();
    let spec = params.model_spec();
    let adj = ds.column_means(&spec.controls).unwrap();
    (ds, spec, adj)
}

#[test]
fn worker_count_does_not_change_results() {
    let (ds, spec, adj) = sample(3);
    let plan = ResamplePlan::new(300, 11);
    let hyps = defaults();
    let one = run_with_workers(&ds, &spec, &plan, &hyps, &adj, 1).unwrap();
    let eight = run_with_workers(&ds, &spec, &plan, &hyps, &adj, 8).unwrap();
    assert_eq!(one, eight);
    assert_eq!(one, run(&ds, &spec, &plan, &hyps, &adj).unwrap());
}

#[test]
fn different_seeds_differ() {
    let (ds, spec, adj) = sample(3);
    let a = run(&ds, &spec, &ResamplePlan::new(50, 1), &[], &adj).unwrap();
    let b = run(&ds, &spec, &ResamplePlan::new(50, 2), &[], &adj).unwrap();
    assert_ne!(a.coefficients, b.coefficients);
}

#[test]
fn each_row_recomputes_standalone() {
    let (ds, spec, adj) = sample(8);
    let plan = ResamplePlan::new(40, 99);
    let result = run(&ds, &spec, &plan, &[], &adj).unwrap();
    assert_eq!(result.degenerate_redraws, 0);
    for i in [0usize, 1, 17, 39] {
        let indices = draw_indices(&mut derive_stream(99, i as u64), ds.n_rows());
        let fit = fit_view(&ds.view(indices).unwrap(), &spec).unwrap();
        assert_eq!(fit.coefficients, result.coefficients[i], "replicate {i}");
    }
}

#[test]
fn distinct_index_fraction_matches_closed_form() {
    let n = 110;
    let expected = 1.0 - (1.0 - 1.0 / n as f64).powi(n as i32);
    let mut total = 0.0;
    for i in 0..2000u64 {
        let mut seen = vec![false; n];
        for k in draw_indices(&mut derive_stream(5, i), n) {
            seen[k] = true;
        }
        total += seen.iter().filter(|&&s| s).count() as f64 / n as f64;
    }
    let mean = total / 2000.0;
    assert!((mean - expected).abs() < 0.01, "{mean} vs {expected}");
    assert!((expected - 0.634).abs() < 0.001);
}

#[test]
fn percentile_matches_oracle() {
    let mut r = rng(97);
    let v: Vec<f64> = (0..97).map(|_| r.random_range(-50.0..50.0)).collect();
    for k in 0..=200 {
        let q = k as f64 / 200.0;
        let got = percentile(&v, q).unwrap();
        let want = percentile_oracle(&v, q);
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "q {q}");
    }
}

#[test]
fn percentile_on_one_to_thousand() {
    let v: Vec<f64> = (1..=1000).map(f64::from).collect();
    assert_eq!(percentile(&v, 0.025).unwrap(), 25.975);
    assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
    assert_eq!(percentile(&v, 1.0).unwrap(), 1000.0);
    assert_eq!(percentile_ci(&v, 0.95).unwrap(), (25.975, 975.025));
}

#[test]
fn percentile_monotone_and_affine() {
    let mut r = rng(4);
    for _ in 0..100 {
        let m = r.random_range(2..300);
        let v: Vec<f64> = (0..m).map(|_| r.random_range(-1e3..1e3)).collect();
        let mut last = f64::NEG_INFINITY;
        for k in 0..=50 {
            let p = percentile(&v, k as f64 / 50.0).unwrap();
            assert!(p >= last);
            last = p;
        }
        let (a, b) = (r.random_range(0.1..10.0), r.random_range(-100.0..100.0));
        let w: Vec<f64> = v.iter().map(|x| a * x + b).collect();
        for q in [0.025, 0.3, 0.5, 0.975] {
            let lhs = percentile(&w, q).unwrap();
            let rhs = a * percentile(&v, q).unwrap() + b;
            assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
        }
        let (lo, hi) = percentile_ci(&v, 0.95).unwrap();
        let med = percentile(&v, 0.5).unwrap();
        assert!(lo <= med && med <= hi);
    }
}

#[test]
fn percentile_rejects_bad_input() {
    assert_eq!(percentile(&[], 0.5), Err(BootstrapError::Empty));
    assert!(matches!(percentile(&[1.0], 1.5), Err(BootstrapError::BadQuantile(_))));
    assert!(matches!(percentile_ci(&[1.0, 2.0], 1.0), Err(BootstrapError::BadLevel(_))));
    assert_eq!(percentile_ci(&[3.0], 0.9).unwrap(), (3.0, 3.0));
}

#[test]
fn strong_inverted_u_is_near_certain() {
    let params = SynthParams {
        noise_sd: 1.0,
        ..SynthParams::default()
    };
    let ds = synth_generate(&params, 21).unwrap();
    let spec = params.model_spec();
    let full = fit_view(&ds.full_view(), &spec).unwrap();
    assert!(full.t_stat(2).unwrap() < -5.0);
    let adj = ds.column_means(&spec.controls).unwrap();
    let hyps = vec![Hypothesis::from_builtin(None, Builtin::InvertedU)];
    for seed in [1, 2] {
        let r = run(&ds, &spec, &ResamplePlan::new(1000, seed), &hyps, &adj).unwrap();
        assert!(r.true_count(0) as f64 / 1000.0 > 0.99);
    }
}

#[test]
fn collinear_sample_aborts() {
    let x: Vec<f64> = (0..20).map(f64::from).collect();
    let ds = Dataset::from_columns([
        ("x", x.clone()),
        ("c", x.iter().map(|v| 2.0 * v).collect()),
        ("y", x.iter().map(|v| v * v).collect()),
    ])
    .unwrap();
    let spec = ModelSpec::new("y", "x", 2, &["c"]);
    let plan = ResamplePlan {
        max_redraws_per_replicate: 5,
        ..ResamplePlan::new(10, 1)
    };
    let err = run(&ds, &spec, &plan, &[], &[0.0]).unwrap_err();
    assert!(matches!(err, BootstrapError::TooDegenerate { attempts: 6, .. }), "{err}");
}

#[test]
fn occasional_degenerate_resamples_are_redrawn() {
    // A binary control with a single 1 drops out of roughly a third of resamples.
    let n = 30;
    let x: Vec<f64> = (0..n).map(|i| i as f64 / 3.0).collect();
    let mut d = vec![0.0; n];
    d[4] = 1.0;
    let y: Vec<f64> = x.iter().zip(&d).map(|(x, d)| 1.0 + x - 0.05 * x * x + 3.0 * d + (x * 7.0).sin()).collect();
    let ds = Dataset::from_columns([("x", x), ("d", d), ("y", y)]).unwrap();
    let spec = ModelSpec::new("y", "x", 2, &["d"]);
    let plan = ResamplePlan::new(200, 3);
    let a = run(&ds, &spec, &plan, &[], &[0.0]).unwrap();
    assert!(a.degenerate_redraws > 20);
    assert_eq!(a.coefficients.len(), 200);
    assert_eq!(a, run_with_workers(&ds, &spec, &plan, &[], &[0.0], 3).unwrap());
}
