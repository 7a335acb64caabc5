//! Case-resampling bootstrap of a regression fit.
//!
//! Every replicate owns a random stream derived from `(seed, replicate)`, so
//! results do not depend on how replicates are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::hypothesis::{evaluate, Hypothesis, HypothesisError, ModelContext};
use crate::ols::{fit_view, FitResult, ModelSpec, OlsError};

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_MAX_REDRAWS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BootstrapError {
    #[error(transparent)]
    Ols(#[from] OlsError),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
    #[error("number of resamples must be at least 1")]
    NoResamples,
    #[error(
        "replicate {replicate}: {attempts} consecutive rank-deficient resamples; \
         the sample is too degenerate to bootstrap"
    )]
    TooDegenerate { replicate: usize, attempts: usize },
    #[error("percentile of an empty vector")]
    Empty,
    #[error("quantile {0} is not in [0, 1]")]
    BadQuantile(f64),
    #[error("confidence level {0} is not in (0, 1)")]
    BadLevel(f64),
    #[error("reference interval has zero width")]
    ZeroWidth,
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub b: usize,
    pub seed: u64,
    pub max_redraws_per_replicate: usize,
}

impl ResamplePlan {
    pub fn new(b: usize, seed: u64) -> Self {
        Self {
            b,
            seed,
            max_redraws_per_replicate: DEFAULT_MAX_REDRAWS,
        }
    }
}

/// Generator type behind every replicate stream.
pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeds the stream for one replicate.
///
/// The key is `splitmix64(seed ^ splitmix64(replicate))`, expanded into a
/// ChaCha8 seed with `seed_from_u64`.
pub fn derive_stream(seed: u64, replicate: u64) -> StreamRng {
    StreamRng::seed_from_u64(splitmix64(seed ^ splitmix64(replicate)))
}

/// `n` independent uniform draws from `0..n`.
pub fn draw_indices<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    assert!(n >= 1, "cannot resample an empty sample");
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// One accepted replicate.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub indices: Vec<usize>,
    pub fit: FitResult,
    /// Rank-deficient draws discarded before this one.
    pub redraws: usize,
}

/// Draws and fits replicate `index`, redrawing from the same stream while the
/// design is rank deficient.
pub fn replicate(
    ds: &Dataset,
    spec: &ModelSpec,
    plan: &ResamplePlan,
    index: usize,
) -> Result<Replicate, BootstrapError> {
    let mut rng = derive_stream(plan.seed, index as u64);
    let mut redraws = 0;
    loop {
        let indices = draw_indices(&mut rng, ds.n_rows());
        let view = ds.view(indices).expect("drawn indices are in range");
        match fit_view(&view, spec) {
            Ok(fit) => {
                return Ok(Replicate {
                    indices: view.indices().to_vec(),
                    fit,
                    redraws,
                })
            }
            Err(OlsError::DegenerateDesign { .. }) => {
                redraws += 1;
                if redraws > plan.max_redraws_per_replicate {
                    return Err(BootstrapError::TooDegenerate {
                        replicate: index,
                        attempts: redraws,
                    });
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    /// Row `i` holds replicate `i`'s coefficients.
    pub coefficients: Vec<Vec<f64>>,
    /// `outcomes[i][h]`: hypothesis `h` held on replicate `i`.
    pub outcomes: Vec<Vec<bool>>,
    /// `undefined[i][h]`: hypothesis `h` hit an undefined vertex on replicate `i`.
    pub undefined: Vec<Vec<bool>>,
    pub degenerate_redraws: usize,
    pub plan: ResamplePlan,
    pub spec: ModelSpec,
}

impl BootstrapResult {
    /// Replicate values of coefficient `j`, in replicate order.
    pub fn coefficient(&self, j: usize) -> Vec<f64> {
        self.coefficients.iter().map(|row| row[j]).collect()
    }

    pub fn outcomes_for(&self, h: usize) -> Vec<bool> {
        self.outcomes.iter().map(|row| row[h]).collect()
    }

    pub fn true_count(&self, h: usize) -> usize {
        self.outcomes.iter().filter(|row| row[h]).count()
    }

    pub fn undefined_count(&self, h: usize) -> usize {
        self.undefined.iter().filter(|row| row[h]).count()
    }
}

/// Runs the bootstrap on the global rayon pool.
pub fn run(
    ds: &Dataset,
    spec: &ModelSpec,
    plan: &ResamplePlan,
    hypotheses: &[Hypothesis],
    adjustment: &[f64],
) -> Result<BootstrapResult, BootstrapError> {
    if plan.b == 0 {
        return Err(BootstrapError::NoResamples);
    }
    spec.validate()?;
    for h in hypotheses {
        h.expr.check(spec)?;
    }
    if adjustment.len() != spec.controls.len() {
        return Err(HypothesisError::AdjustmentLength {
            expected: spec.controls.len(),
            found: adjustment.len(),
        }
        .into());
    }

    type Row = (Vec<f64>, Vec<bool>, Vec<bool>, usize);
    let rows: Vec<Row> = (0..plan.b)
        .into_par_iter()
        .map(|i| -> Result<Row, BootstrapError> {
            let rep = replicate(ds, spec, plan, i)?;
            let ctx = ModelContext::from_fit(&rep.fit, adjustment)?;
            let mut outcomes = Vec::with_capacity(hypotheses.len());
            let mut undefined = Vec::with_capacity(hypotheses.len());
            for h in hypotheses {
                let o = evaluate(&h.expr, &ctx)?;
                outcomes.push(o.value);
                undefined.push(o.undefined);
            }
            Ok((rep.fit.coefficients, outcomes, undefined, rep.redraws))
        })
        .collect::<Result<_, _>>()?;

    let mut result = BootstrapResult {
        coefficients: Vec::with_capacity(plan.b),
        outcomes: Vec::with_capacity(plan.b),
        undefined: Vec::with_capacity(plan.b),
        degenerate_redraws: 0,
        plan: *plan,
        spec: spec.clone(),
    };
    for (coefs, outcomes, undefined, redraws) in rows {
        result.coefficients.push(coefs);
        result.outcomes.push(outcomes);
        result.undefined.push(undefined);
        result.degenerate_redraws += redraws;
    }
    Ok(result)
}

/// [`run`] on a dedicated pool of `workers` threads.
pub fn run_with_workers(
    ds: &Dataset,
    spec: &ModelSpec,
    plan: &ResamplePlan,
    hypotheses: &[Hypothesis],
    adjustment: &[f64],
    workers: usize,
) -> Result<BootstrapResult, BootstrapError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BootstrapError::Pool(e.to_string()))?;
    pool.install(|| run(ds, spec, plan, hypotheses, adjustment))
}

/// Linear interpolation between order statistics: with the values sorted
/// ascending and `h = q (m - 1)` (0-based), returns
/// `x[⌊h⌋] + (h - ⌊h⌋)(x[⌊h⌋ + 1] - x[⌊h⌋])`.
pub fn percentile(values: &[f64], q: f64) -> Result<f64, BootstrapError> {
    if values.is_empty() {
        return Err(BootstrapError::Empty);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(BootstrapError::BadQuantile(q));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, q))
}

fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    let h = q * (m - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= m {
        return sorted[m - 1];
    }
    let frac = h - lo as f64;
    if frac == 0.0 {
        return sorted[lo];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Percentile interval `(P((1-level)/2), P((1+level)/2))`. A single value
/// gives a zero-width interval.
///
/// The tail probabilities are rounded to 12 significant digits, so a level
/// of `0.95` uses exactly `0.025` and `0.975` rather than `1 - 0.95`
/// carrying binary representation error.
pub fn percentile_ci(values: &[f64], level: f64) -> Result<(f64, f64), BootstrapError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(BootstrapError::BadLevel(level));
    }
    if values.is_empty() {
        return Err(BootstrapError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((
        percentile_sorted(&sorted, round_sig((1.0 - level) / 2.0)),
        percentile_sorted(&sorted, round_sig((1.0 + level) / 2.0)),
    ))
}

fn round_sig(q: f64) -> f64 {
    format!("{q:.11e}").parse().expect("formatted float parses")
}

/// Width of `a` relative to the width of `b`.
pub fn width_ratio(a: (f64, f64), b: (f64, f64)) -> Result<f64, BootstrapError> {
    let wb = b.1 - b.0;
    if wb == 0.0 {
        return Err(BootstrapError::ZeroWidth);
    }
    Ok((a.1 - a.0) / wb)
}
