//! Synthetic quadratic populations with known coefficients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::ols::ModelSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic parameters: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ControlDist {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthControl {
    pub name: String,
    pub coefficient: f64,
    pub dist: ControlDist,
}

/// `y = β0 + β1 x + β2 x² + Σ γ_k c_k + ε`, `x ~ U(x_min, x_max)`,
/// `ε ~ N(0, noise_sd²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n: usize,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default)]
    pub controls: Vec<SynthControl>,
    pub noise_sd: f64,
    #[serde(default = "default_response")]
    pub response: String,
    #[serde(default = "default_focal")]
    pub focal: String,
}

fn default_response() -> String {
    "y".into()
}

fn default_focal() -> String {
    "x".into()
}

impl Default for SynthParams {
    /// An inverted U over `x ∈ [0, 30]` peaking at `x = 10`, with three
    /// controls and moderate noise.
    fn default() -> Self {
        Self {
            n: 110,
            beta0: 50.0,
            beta1: 2.0,
            beta2: -0.1,
            x_min: 0.0,
            x_max: 30.0,
            controls: vec![
                SynthControl {
                    name: "c1".into(),
                    coefficient: 1.5,
                    dist: ControlDist::Normal { mean: 10.0, sd: 2.0 },
                },
                SynthControl {
                    name: "c2".into(),
                    coefficient: -0.8,
                    dist: ControlDist::Uniform { lo: 0.0, hi: 5.0 },
                },
                SynthControl {
                    name: "c3".into(),
                    coefficient: 0.3,
                    dist: ControlDist::Normal { mean: 0.0, sd: 1.0 },
                },
            ],
            noise_sd: 5.0,
            response: default_response(),
            focal: default_focal(),
        }
    }
}

impl SynthParams {
    /// The quadratic model matching this population.
    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            response: self.response.clone(),
            focal: self.focal.clone(),
            degree: 2,
            controls: self.controls.iter().map(|c| c.name.clone()).collect(),
            center_focal: false,
        }
    }

    /// True coefficients in design order.
    pub fn true_coefficients(&self) -> Vec<f64> {
        let mut b = vec![self.beta0, self.beta1, self.beta2];
        b.extend(self.controls.iter().map(|c| c.coefficient));
        b
    }

    /// `-β1 / (2 β2)`, if the population has curvature.
    pub fn vertex(&self) -> Option<f64> {
        (self.beta2 != 0.0).then(|| -self.beta1 / (2.0 * self.beta2))
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Invalid(m.to_string()));
        let p = 3 + self.controls.len();
        if self.n <= p {
            return bad("n must exceed the number of coefficients");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be finite and non-negative");
        }
        if !(self.x_min < self.x_max) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return bad("x range must satisfy x_min < x_max");
        }
        let mut names = vec![self.response.as_str(), self.focal.as_str()];
        for c in &self.controls {
            if names.contains(&c.name.as_str()) || c.name.is_empty() {
                return bad("column names must be unique and non-empty");
            }
            names.push(&c.name);
            match c.dist {
                ControlDist::Normal { sd, .. } if !(sd >= 0.0) => return bad("control sd < 0"),
                ControlDist::Uniform { lo, hi } if !(lo < hi) => {
                    return bad("control range must satisfy lo < hi")
                }
                _ => {}
            }
        }
        if self.response == self.focal {
            return bad("response and focal names must differ");
        }
        Ok(())
    }
}

/// Draws one dataset. Columns are `focal`, controls in order, then `response`.
pub fn synth_generate(params: &SynthParams, seed: u64) -> Result<Dataset, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.n;
    let x_dist = Uniform::new(params.x_min, params.x_max)
        .map_err(|e| SynthError::Invalid(e.to_string()))?;
    let x: Vec<f64> = (0..n).map(|_| x_dist.sample(&mut rng)).collect();

    let mut controls = Vec::with_capacity(params.controls.len());
    for c in &params.controls {
        let values: Vec<f64> = match c.dist {
            ControlDist::Normal { mean, sd } => {
                let d = Normal::new(mean, sd).map_err(|e| SynthError::Invalid(e.to_string()))?;
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
            ControlDist::Uniform { lo, hi } => {
                let d = Uniform::new(lo, hi).map_err(|e| SynthError::Invalid(e.to_string()))?;
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
        };
        controls.push(values);
    }

    let noise = Normal::new(0.0, params.noise_sd).map_err(|e| SynthError::Invalid(e.to_string()))?;
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let xi = x[i];
            let mut v = params.beta0 + params.beta1 * xi + params.beta2 * xi * xi;
            for (c, vals) in params.controls.iter().zip(&controls) {
                v += c.coefficient * vals[i];
            }
            v + noise.sample(&mut rng)
        })
        .collect();

    let mut columns = vec![(params.focal.clone(), x)];
    columns.extend(params.controls.iter().map(|c| c.name.clone()).zip(controls));
    columns.push((params.response.clone(), y));
    Dataset::from_columns(columns).map_err(|e| SynthError::Invalid(e.to_string()))
}
