//! End-to-end analyses: the JSON report, curve tables for plotting, and the
//! synthetic coverage study.

use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::bootstrap::{
    percentile_ci, replicate, run, run_with_workers, width_ratio, BootstrapResult, ResamplePlan,
};
use crate::dataset::Dataset;
use crate::hypothesis::{Builtin, Hypothesis, ModelContext};
use crate::ols::{fit_view, p_to_confidence, FitResult, ModelSpec, Sign};
use crate::synth::{synth_generate, SynthParams};
use crate::Error;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_LEVEL: f64 = 0.95;
pub const DEFAULT_SPAGHETTI: usize = 3;

/// A coefficient interval request.
#[derive(Debug, Clone, PartialEq)]
pub struct CiTarget {
    pub coefficient: String,
    pub level: f64,
}

impl FromStr for CiTarget {
    type Err = Error;

    /// `name` or `name,level`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let (name, level) = match s.rsplit_once(',') {
            Some((name, level)) => {
                let level: f64 = level
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad level in `--ci {s}`")))?;
                (name.trim(), level)
            }
            None => (s.trim(), DEFAULT_LEVEL),
        };
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Config(format!("level {level} is not in (0, 1)")));
        }
        Ok(Self {
            coefficient: name.to_string(),
            level,
        })
    }
}

/// Request for a p-value based directional confidence on one coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Directional {
    pub coefficient: String,
    pub sign: Sign,
}

impl FromStr for Directional {
    type Err = Error;

    /// `name:negative` or `name:positive` (also `-` / `+`).
    fn from_str(s: &str) -> Result<Self, Error> {
        let (name, dir) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::Config(format!("expected coef:negative|positive, got `{s}`")))?;
        let sign = match dir.trim() {
            "negative" | "neg" | "-" => Sign::Negative,
            "positive" | "pos" | "+" => Sign::Positive,
            other => return Err(Error::Config(format!("unknown direction `{other}`"))),
        };
        Ok(Self {
            coefficient: name.trim().to_string(),
            sign,
        })
    }
}

/// Evaluation grid for the focal variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self, Error> {
        if !(step > 0.0) || !(min < max) || !min.is_finite() || !max.is_finite() {
            return Err(Error::Config(format!(
                "curve grid needs min < max and step > 0 (got {min}:{max}:{step})"
            )));
        }
        Ok(Self { min, max, step })
    }

    pub fn points(&self) -> Vec<f64> {
        let count = ((self.max - self.min) / self.step * (1.0 + 1e-12)).floor() as usize;
        (0..=count).map(|i| self.min + i as f64 * self.step).collect()
    }
}

impl FromStr for Grid {
    type Err = Error;

    /// `min:max:step`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("expected min:max:step, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        Self::new(v[0], v[1], v[2])
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub data: PathBuf,
    pub spec: ModelSpec,
    pub plan: ResamplePlan,
    pub hypotheses: Vec<Hypothesis>,
    /// Empty means every coefficient at [`DEFAULT_LEVEL`].
    pub ci: Vec<CiTarget>,
    pub directional: Vec<Directional>,
    /// Control values for `pred()`; `None` uses the sample means.
    pub adjustment: Option<Vec<f64>>,
    pub workers: Option<usize>,
}

impl AnalysisConfig {
    pub fn new(data: impl Into<PathBuf>, spec: ModelSpec, plan: ResamplePlan) -> Self {
        Self {
            data: data.into(),
            spec,
            plan,
            hypotheses: default_hypotheses(),
            ci: Vec::new(),
            directional: Vec::new(),
            adjustment: None,
            workers: None,
        }
    }
}

pub fn default_hypotheses() -> Vec<Hypothesis> {
    Builtin::defaults()
        .into_iter()
        .map(|b| Hypothesis::from_builtin(None, b))
        .collect()
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub response: String,
    pub focal: String,
    pub degree: usize,
    pub controls: Vec<String>,
    pub coefficient_names: Vec<String>,
    pub n: usize,
    pub df: usize,
    pub residual_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjustmentEntry {
    pub control: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientReport {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub t: f64,
    pub p: f64,
    pub p_degenerate: bool,
    pub level: f64,
    pub classical_ci: (f64, f64),
    pub bootstrap_percentile_ci: (f64, f64),
    /// Bootstrap width over classical width; `None` when the classical
    /// interval has zero width.
    pub width_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfOpenBin {
    pub lo: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub hi: f64,
    pub true_count: usize,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub name: String,
    pub text: String,
    pub confidence: f64,
    pub true_count: usize,
    pub undefined_count: usize,
    pub b: usize,
    /// For optimum-band built-ins: the same band counted half-open `[lo, hi)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_open_bin: Option<HalfOpenBin>,
}

/// Replicates split into the requested half-open optimum bands plus the
/// replicates that are not inverted U shapes at all.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimumPartition {
    pub bins: Vec<HalfOpenBin>,
    pub not_inverted_u_count: usize,
    pub not_inverted_u_confidence: f64,
    /// `sum(bins) + not_inverted_u`; equals `b` when the bands tile `(0, inf)`.
    pub total_count: usize,
    pub note: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionalReport {
    pub coefficient: String,
    pub hypothesis_sign: Sign,
    pub estimate_sign: Sign,
    pub p: f64,
    /// Confidence from the two-sided p-value.
    pub p_confidence: f64,
    /// Fraction of replicates whose coefficient has the hypothesized sign.
    pub bootstrap_confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub model: ModelSummary,
    pub b: usize,
    pub seed: u64,
    pub max_redraws_per_replicate: usize,
    pub degenerate_redraws: usize,
    pub adjustment_source: &'static str,
    pub adjustment: Vec<AdjustmentEntry>,
    pub coefficients: Vec<CoefficientReport>,
    pub hypotheses: Vec<HypothesisReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimum_partition: Option<OptimumPartition>,
    pub directional: Vec<DirectionalReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Coefficient table as CSV.
    pub fn coefficients_csv(&self) -> String {
        let mut out = String::from(
            "name,estimate,se,t,p,level,classical_lo,classical_hi,bootstrap_lo,bootstrap_hi,width_ratio\n",
        );
        for c in &self.coefficients {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                c.name,
                c.estimate,
                c.se,
                c.t,
                c.p,
                c.level,
                c.classical_ci.0,
                c.classical_ci.1,
                c.bootstrap_percentile_ci.0,
                c.bootstrap_percentile_ci.1,
                c.width_ratio.map_or(String::new(), |r| r.to_string()),
            ));
        }
        out
    }

    pub fn hypothesis(&self, name: &str) -> Option<&HypothesisReport> {
        self.hypotheses.iter().find(|h| h.name == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<&CoefficientReport> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

/// Loads the data named in `config` and runs [`analyze`].
pub fn run_analysis(config: &AnalysisConfig) -> Result<Report, Error> {
    let ds = Dataset::load_csv(&config.data)?;
    analyze(&ds, config)
}

/// Resolves the adjustment vector: user values if given, else control means.
pub fn resolve_adjustment(
    ds: &Dataset,
    spec: &ModelSpec,
    user: Option<&[f64]>,
) -> Result<(Vec<f64>, &'static str), Error> {
    match user {
        Some(v) if v.len() != spec.controls.len() => Err(Error::Config(format!(
            "{} adjustment values given for {} controls",
            v.len(),
            spec.controls.len()
        ))),
        Some(v) => Ok((v.to_vec(), "user")),
        None => Ok((ds.column_means(&spec.controls)?, "means")),
    }
}

fn bootstrap(
    ds: &Dataset,
    config: &AnalysisConfig,
    adjustment: &[f64],
) -> Result<BootstrapResult, Error> {
    let result = match config.workers {
        Some(w) => run_with_workers(ds, &config.spec, &config.plan, &config.hypotheses, adjustment, w),
        None => run(ds, &config.spec, &config.plan, &config.hypotheses, adjustment),
    }?;
    Ok(result)
}

/// Full-sample fit, bootstrap, and report assembly on an in-memory dataset.
pub fn analyze(ds: &Dataset, config: &AnalysisConfig) -> Result<Report, Error> {
    let spec = &config.spec;
    spec.validate()?;
    let (adjustment, adjustment_source) =
        resolve_adjustment(ds, spec, config.adjustment.as_deref())?;
    let fit = fit_view(&ds.full_view(), spec)?;
    let boot = bootstrap(ds, config, &adjustment)?;
    let names = spec.coefficient_names();

    let targets: Vec<CiTarget> = if config.ci.is_empty() {
        names
            .iter()
            .map(|n| CiTarget {
                coefficient: n.clone(),
                level: DEFAULT_LEVEL,
            })
            .collect()
    } else {
        config.ci.clone()
    };
    let coefficients = targets
        .iter()
        .map(|t| coefficient_report(&fit, &boot, spec, t))
        .collect::<Result<Vec<_>, _>>()?;

    let b = boot.plan.b;
    let vertices = replicate_shapes(&boot);
    let hypotheses = config
        .hypotheses
        .iter()
        .enumerate()
        .map(|(h, hyp)| {
            let true_count = boot.true_count(h);
            HypothesisReport {
                name: hyp.name.clone(),
                text: hyp.text.clone(),
                confidence: true_count as f64 / b as f64,
                true_count,
                undefined_count: boot.undefined_count(h),
                b,
                half_open_bin: match hyp.builtin {
                    Some(Builtin::OptimumIn { lo, hi }) => Some(half_open(&vertices, lo, hi)),
                    _ => None,
                },
            }
        })
        .collect::<Vec<_>>();

    let bins: Vec<HalfOpenBin> = hypotheses
        .iter()
        .filter_map(|h| h.half_open_bin.clone())
        .collect();
    let optimum_partition = (!bins.is_empty()).then(|| {
        let not_inverted_u_count = vertices.iter().filter(|v| v.is_none()).count();
        OptimumPartition {
            total_count: bins.iter().map(|b| b.true_count).sum::<usize>() + not_inverted_u_count,
            bins,
            not_inverted_u_count,
            not_inverted_u_confidence: not_inverted_u_count as f64 / b as f64,
            note: "bands count only inverted-U replicates (curv() < 0 && vertex() > 0) and are half-open [lo, hi)",
        }
    });

    let directional = config
        .directional
        .iter()
        .map(|d| {
            let j = coefficient_index(spec, &d.coefficient)?;
            let p = fit.coef_p_value(j)?.p;
            let estimate_sign = Sign::of(fit.coefficients[j]);
            let agree = boot
                .coefficients
                .iter()
                .filter(|row| Sign::of(row[j]) == d.sign)
                .count();
            Ok(DirectionalReport {
                coefficient: d.coefficient.clone(),
                hypothesis_sign: d.sign,
                estimate_sign,
                p,
                p_confidence: p_to_confidence(p, estimate_sign, d.sign),
                bootstrap_confidence: agree as f64 / b as f64,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;

    Ok(Report {
        schema_version: REPORT_SCHEMA_VERSION,
        model: ModelSummary {
            response: spec.response.clone(),
            focal: spec.focal.clone(),
            degree: spec.degree,
            controls: spec.controls.clone(),
            coefficient_names: names,
            n: fit.n,
            df: fit.df,
            residual_variance: fit.residual_variance,
        },
        b,
        seed: config.plan.seed,
        max_redraws_per_replicate: config.plan.max_redraws_per_replicate,
        degenerate_redraws: boot.degenerate_redraws,
        adjustment_source,
        adjustment: spec
            .controls
            .iter()
            .zip(&adjustment)
            .map(|(c, v)| AdjustmentEntry {
                control: c.clone(),
                value: *v,
            })
            .collect(),
        coefficients,
        hypotheses,
        optimum_partition,
        directional,
    })
}

fn coefficient_index(spec: &ModelSpec, name: &str) -> Result<usize, Error> {
    spec.coefficient_index(name).ok_or_else(|| {
        Error::Config(format!(
            "unknown coefficient `{name}` (available: {})",
            spec.coefficient_names().join(", ")
        ))
    })
}

fn coefficient_report(
    fit: &FitResult,
    boot: &BootstrapResult,
    spec: &ModelSpec,
    target: &CiTarget,
) -> Result<CoefficientReport, Error> {
    let j = coefficient_index(spec, &target.coefficient)?;
    let classical = fit.classical_ci(j, target.level)?;
    let percentile = percentile_ci(&boot.coefficient(j), target.level)?;
    let pv = fit.coef_p_value(j)?;
    Ok(CoefficientReport {
        name: target.coefficient.clone(),
        estimate: fit.coefficients[j],
        se: fit.se(j)?,
        t: fit.t_stat(j)?,
        p: pv.p,
        p_degenerate: pv.degenerate,
        level: target.level,
        classical_ci: classical,
        bootstrap_percentile_ci: percentile,
        width_ratio: width_ratio(percentile, classical).ok(),
    })
}

/// Per replicate: `Some(vertex)` for an inverted U with positive vertex,
/// `None` otherwise (including linear models).
fn replicate_shapes(boot: &BootstrapResult) -> Vec<Option<f64>> {
    if boot.spec.degree != 2 {
        return vec![None; boot.coefficients.len()];
    }
    boot.coefficients
        .iter()
        .map(|row| {
            let (b1, b2) = (row[1], row[2]);
            if b2 < 0.0 {
                let v = -b1 / (2.0 * b2);
                (v > 0.0).then_some(v)
            } else {
                None
            }
        })
        .collect()
}

fn half_open(vertices: &[Option<f64>], lo: f64, hi: f64) -> HalfOpenBin {
    let true_count = vertices
        .iter()
        .filter(|v| matches!(v, Some(v) if lo <= *v && *v < hi))
        .count();
    HalfOpenBin {
        lo,
        hi,
        true_count,
        confidence: true_count as f64 / vertices.len().max(1) as f64,
    }
}

/// Prediction curves over a grid: the full-sample fit plus the first `k`
/// bootstrap replicates, all at the same control adjustment.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub columns: Vec<String>,
    /// `values[c][i]`: column `c` at grid point `i`.
    pub values: Vec<Vec<f64>>,
}

impl CurveTable {
    pub fn to_dataset(&self) -> Result<Dataset, Error> {
        Ok(Dataset::from_columns(
            self.columns.iter().cloned().zip(self.values.iter().cloned()),
        )?)
    }

    pub fn to_csv(&self) -> Result<String, Error> {
        Ok(self.to_dataset()?.to_csv())
    }

    pub fn to_json(&self) -> String {
        let obj: serde_json::Map<String, serde_json::Value> = self
            .columns
            .iter()
            .zip(&self.values)
            .map(|(c, v)| (c.clone(), serde_json::json!(v)))
            .collect();
        let mut s = serde_json::to_string_pretty(&obj).expect("curve table serializes");
        s.push('\n');
        s
    }
}

pub fn emit_curves(
    ds: &Dataset,
    spec: &ModelSpec,
    plan: &ResamplePlan,
    grid: &Grid,
    k: usize,
    adjustment: &[f64],
) -> Result<CurveTable, Error> {
    if k > plan.b {
        return Err(Error::Config(format!(
            "{k} spaghetti curves requested but only {} resamples",
            plan.b
        )));
    }
    let fit = fit_view(&ds.full_view(), spec)?;
    let xs = grid.points();
    let ctx = ModelContext::from_fit(&fit, adjustment)?;
    let mut columns = vec![spec.focal.clone(), "fitted".to_string()];
    let mut values = vec![xs.clone(), xs.iter().map(|&x| ctx.pred(x)).collect()];
    for i in 0..k {
        let rep = replicate(ds, spec, plan, i)?;
        let ctx = ModelContext::from_fit(&rep.fit, adjustment)?;
        columns.push(format!("resample_{i}"));
        values.push(xs.iter().map(|&x| ctx.pred(x)).collect());
    }
    Ok(CurveTable { columns, values })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageTable {
    pub reps: usize,
    pub b: usize,
    pub level: f64,
    pub first_seed: u64,
    pub true_curvature: f64,
    pub classical_covered: usize,
    pub percentile_covered: usize,
    pub classical_coverage: f64,
    pub percentile_coverage: f64,
    pub mean_classical_width: f64,
    pub mean_percentile_width: f64,
    /// `sqrt(level (1 - level) / reps)`.
    pub binomial_se: f64,
}

/// Relative slack for interval containment, so zero-width intervals from
/// noiseless samples count as covering the truth despite rounding.
pub const COVERAGE_SLACK: f64 = 1e-9;

fn covers(ci: (f64, f64), truth: f64) -> bool {
    let slack = COVERAGE_SLACK * truth.abs().max(1.0);
    ci.0 - slack <= truth && truth <= ci.1 + slack
}

/// Seed of the bootstrap run paired with synthetic dataset `seed`.
fn paired_bootstrap_seed(seed: u64) -> u64 {
    seed.rotate_left(32) ^ 0xA076_1D64_78BD_642F
}

/// For dataset seeds `first_seed..first_seed + reps`: draw a sample, fit,
/// and record whether the classical and percentile intervals for the
/// curvature coefficient contain the true `β2`.
pub fn coverage_study(
    params: &SynthParams,
    reps: usize,
    level: f64,
    b: usize,
    first_seed: u64,
) -> Result<CoverageTable, Error> {
    if reps == 0 {
        return Err(Error::Config("coverage study needs at least one rep".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level {level} is not in (0, 1)")));
    }
    let spec = params.model_spec();
    let truth = params.beta2;
    let rows: Vec<(bool, bool, f64, f64)> = (0..reps as u64)
        .into_par_iter()
        .map(|r| -> Result<_, Error> {
            let seed = first_seed.wrapping_add(r);
            let ds = synth_generate(params, seed)?;
            let fit = fit_view(&ds.full_view(), &spec)?;
            let classical = fit.classical_ci(2, level)?;
            let plan = ResamplePlan::new(b, paired_bootstrap_seed(seed));
            let boot = run(&ds, &spec, &plan, &[], &ds.column_means(&spec.controls)?)?;
            let pct = percentile_ci(&boot.coefficient(2), level)?;
            Ok((
                covers(classical, truth),
                covers(pct, truth),
                classical.1 - classical.0,
                pct.1 - pct.0,
            ))
        })
        .collect::<Result<_, _>>()?;
    let classical_covered = rows.iter().filter(|r| r.0).count();
    let percentile_covered = rows.iter().filter(|r| r.1).count();
    let n = reps as f64;
    Ok(CoverageTable {
        reps,
        b,
        level,
        first_seed,
        true_curvature: truth,
        classical_covered,
        percentile_covered,
        classical_coverage: classical_covered as f64 / n,
        percentile_coverage: percentile_covered as f64 / n,
        mean_classical_width: rows.iter().map(|r| r.2).sum::<f64>() / n,
        mean_percentile_width: rows.iter().map(|r| r.3).sum::<f64>() / n,
        binomial_se: (level * (1.0 - level) / n).sqrt(),
    })
}
