use regboot::coverage_study;
use regboot::synth::SynthParams;

#[test]
fn noiseless_population_is_always_covered() {
    let params = SynthParams { noise_sd: 0.0, ..SynthParams::default() };
    let t = coverage_study(&params, 20, 0.95, 50, 1).unwrap();
    assert_eq!((t.classical_coverage, t.percentile_coverage), (1.0, 1.0));
    assert!(t.mean_classical_width < 1e-9);
}

#[test]
fn coverage_is_stable_under_more_reps() {
    let params = SynthParams::default();
    let a = coverage_study(&params, 100, 0.95, 200, 1).unwrap();
    let b = coverage_study(&params, 200, 0.95, 200, 50_001).unwrap();
    // Standard error of the difference of two independent binomial proportions at the nominal level.
    let se = (0.95_f64 * 0.05 * (1.0 / 100.0 + 1.0 / 200.0)).sqrt();
    for (x, y) in [
        (a.classical_coverage, b.classical_coverage),
        (a.percentile_coverage, b.percentile_coverage),
    ] {
        assert!((x - y).abs() < 3.0 * se, "{x} vs {y}");
    }
}

#[test]
fn study_is_reproducible() {
    let params = SynthParams::default();
    assert_eq!(
        coverage_study(&params, 15, 0.9, 60, 77).unwrap(),
        coverage_study(&params, 15, 0.9, 60, 77).unwrap()
    );
}

#[test]
fn rejects_bad_arguments() {
    let params = SynthParams::default();
    assert!(coverage_study(&params, 0, 0.95, 10, 1).is_err());
    assert!(coverage_study(&params, 5, 1.0, 10, 1).is_err());
}
