//! Bootstrap confidence levels for hypotheses about the shape of a
//! regression model.
//!
//! A quadratic (or linear) model in a focal variable, with optional control
//! covariates, is fitted by least squares. The sample is then resampled with
//! replacement, the model is refitted on every resample, and each named
//! hypothesis ("inverted U", "optimum between 10 and 20", ...) is evaluated
//! on each refit. The confidence level for a hypothesis is the fraction of
//! refits on which it holds.
//!
//! ```
//! use regboot::{bootstrap, hypothesis::Hypothesis, ols::ModelSpec, synth};
//!
//! let params = synth::SynthParams::default();
//! let ds = synth::synth_generate(&params, 1).unwrap();
//! let spec = params.model_spec();
//! let adjustment = ds.column_means(&spec.controls).unwrap();
//! let hyps = vec![Hypothesis::custom("inverted_u", "curv() < 0 && vertex() > 0").unwrap()];
//! let plan = bootstrap::ResamplePlan::new(200, 7);
//! let result = bootstrap::run(&ds, &spec, &plan, &hyps, &adjustment).unwrap();
//! assert_eq!(result.coefficients.len(), 200);
//! ```

pub mod analysis;
pub mod bootstrap;
pub mod dataset;
pub mod hypothesis;
pub mod ols;
pub mod synth;
pub mod tdist;

use thiserror::Error;

pub use analysis::{analyze, coverage_study, emit_curves, run_analysis, AnalysisConfig, Report};
pub use bootstrap::{percentile, percentile_ci, width_ratio, BootstrapResult, ResamplePlan};
pub use dataset::{Dataset, IndexView};
pub use hypothesis::{parse, Expr, Hypothesis, ModelContext};
pub use ols::{build_design, fit, fit_view, p_to_confidence, FitResult, ModelSpec, Sign};
pub use tdist::t_cdf;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(#[from] dataset::DataError),
    #[error("model: {0}")]
    Ols(#[from] ols::OlsError),
    #[error("hypothesis: {0}")]
    Hypothesis(#[from] hypothesis::HypothesisError),
    #[error("bootstrap: {0}")]
    Bootstrap(#[from] bootstrap::BootstrapError),
    #[error("synthetic data: {0}")]
    Synth(#[from] synth::SynthError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Process exit codes used by the command line tool.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const DEGENERATE: i32 = 4;
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        use bootstrap::BootstrapError as B;
        use ols::OlsError as O;
        match self {
            Error::Config(_) | Error::Hypothesis(_) | Error::Synth(_) => exit::CONFIG,
            Error::Data(_) | Error::Ols(O::Data(_)) | Error::Bootstrap(B::Ols(O::Data(_))) => {
                exit::DATA
            }
            Error::Ols(O::DegenerateDesign { .. } | O::NoResidualDf { .. })
            | Error::Bootstrap(B::TooDegenerate { .. } | B::Ols(O::DegenerateDesign { .. })) => {
                exit::DEGENERATE
            }
            Error::Ols(O::InvalidSpec(_)) | Error::Bootstrap(B::Hypothesis(_)) => exit::CONFIG,
            _ => exit::FAILURE,
        }
    }
}
