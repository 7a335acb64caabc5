//! Polynomial-in-focal OLS with control covariates.
//!
//! Designs are factored with Householder QR; `XᵀX` is never formed. Column
//! order is fixed: intercept, `focal^1 … focal^degree`, then the controls in
//! the order given by the [`ModelSpec`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DataError, IndexView};
use crate::tdist::{t_quantile, t_two_sided};

/// Relative threshold on `|R_kk|` below which the design is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OlsError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid model: {0}")]
    InvalidSpec(String),
    #[error("degenerate design: numerical rank {rank} < {p} columns")]
    DegenerateDesign { rank: usize, p: usize },
    #[error("need more rows than coefficients (n = {n}, p = {p})")]
    NoResidualDf { n: usize, p: usize },
    #[error("coefficient index {index} out of range (p = {p})")]
    BadIndex { index: usize, p: usize },
    #[error("confidence level {0} is not in (0, 1)")]
    BadLevel(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub response: String,
    pub focal: String,
    pub degree: usize,
    #[serde(default)]
    pub controls: Vec<String>,
    /// Factor on `focal - mean(focal)` for conditioning. Coefficients are
    /// always reported for the raw (uncentered) powers.
    #[serde(default)]
    pub center_focal: bool,
}

impl ModelSpec {
    pub fn new(response: &str, focal: &str, degree: usize, controls: &[&str]) -> Self {
        Self {
            response: response.to_string(),
            focal: focal.to_string(),
            degree,
            controls: controls.iter().map(|s| s.to_string()).collect(),
            center_focal: false,
        }
    }

    pub fn validate(&self) -> Result<(), OlsError> {
        if self.degree == 0 {
            return Err(OlsError::InvalidSpec("degree must be at least 1".into()));
        }
        if self.focal == self.response || self.controls.contains(&self.response) {
            return Err(OlsError::InvalidSpec(format!(
                "response `{}` also used as a predictor",
                self.response
            )));
        }
        if self.controls.contains(&self.focal) {
            return Err(OlsError::InvalidSpec(format!(
                "focal `{}` also listed as a control",
                self.focal
            )));
        }
        for (i, c) in self.controls.iter().enumerate() {
            if self.controls[..i].contains(c) {
                return Err(OlsError::InvalidSpec(format!("control `{c}` listed twice")));
            }
        }
        if self.degree > 2 {
            log::warn!(
                "degree {} polynomial: raw powers of `{}` are poorly conditioned",
                self.degree,
                self.focal
            );
        }
        Ok(())
    }

    /// Number of coefficients.
    pub fn p(&self) -> usize {
        1 + self.degree + self.controls.len()
    }

    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.p());
        names.push("intercept".to_string());
        names.push(self.focal.clone());
        for d in 2..=self.degree {
            names.push(format!("{}^{d}", self.focal));
        }
        names.extend(self.controls.iter().cloned());
        names
    }

    /// Index of a coefficient by name: `intercept`, the focal name,
    /// `focal^d`, or a control name.
    pub fn coefficient_index(&self, name: &str) -> Option<usize> {
        self.coefficient_names().iter().position(|n| n == name)
    }

    /// Index of the first control coefficient.
    pub fn controls_offset(&self) -> usize {
        1 + self.degree
    }
}

/// A design matrix, its response, and its QR factorization.
#[derive(Debug, Clone)]
pub struct Design {
    n: usize,
    p: usize,
    /// Column-major `n × p`.
    x: Vec<f64>,
    y: Vec<f64>,
    center: Option<f64>,
    qr: Qr,
}

impl Design {
    /// Builds from raw parts (column-major). Used directly by tests and by
    /// [`build_design`].
    pub fn from_columns(columns: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self, OlsError> {
        let n = y.len();
        let p = columns.len();
        if n <= p {
            return Err(OlsError::NoResidualDf { n, p });
        }
        let mut x = Vec::with_capacity(n * p);
        for col in &columns {
            assert_eq!(col.len(), n, "design column length mismatch");
            x.extend_from_slice(col);
        }
        let qr = Qr::factor(&x, n, p);
        let rank = qr.rank();
        if rank < p {
            return Err(OlsError::DegenerateDesign { rank, p });
        }
        Ok(Self {
            n,
            p,
            x,
            y,
            center: None,
            qr,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn rank(&self) -> usize {
        self.qr.rank()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    /// Row `i` as a vector of `p` values.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.p).map(|j| self.x[j * self.n + i]).collect()
    }
}

/// Assembles `[1, x, …, x^degree, controls…]` and the response for the rows
/// of `view`. Fails with [`OlsError::DegenerateDesign`] on rank deficiency.
pub fn build_design(view: &IndexView<'_>, spec: &ModelSpec) -> Result<Design, OlsError> {
    spec.validate()?;
    let n = view.len();
    let p = spec.p();
    if n <= p {
        return Err(OlsError::NoResidualDf { n, p });
    }
    let focal: Vec<f64> = view.column_iter(&spec.focal)?.collect();
    let center = spec
        .center_focal
        .then(|| focal.iter().sum::<f64>() / n as f64);
    let shifted: Vec<f64> = match center {
        Some(c) => focal.iter().map(|v| v - c).collect(),
        None => focal,
    };

    let mut columns = Vec::with_capacity(p);
    columns.push(vec![1.0; n]);
    let mut power = shifted.clone();
    columns.push(shifted.clone());
    for _ in 2..=spec.degree {
        power = power.iter().zip(&shifted).map(|(a, b)| a * b).collect();
        columns.push(power.clone());
    }
    for c in &spec.controls {
        columns.push(view.column_iter(c)?.collect());
    }
    let y = view.column_iter(&spec.response)?.collect();
    let mut design = Design::from_columns(columns, y)?;
    design.center = center;
    Ok(design)
}

#[derive(Debug, Clone)]
struct Qr {
    n: usize,
    p: usize,
    /// Householder vectors below the diagonal, `R` on and above it.
    a: Vec<f64>,
    /// Scalars `beta_k` with `H_k = I - beta_k v vᵀ`, `v_k = 1`.
    betas: Vec<f64>,
}

impl Qr {
    fn factor(x: &[f64], n: usize, p: usize) -> Self {
        let mut a = x.to_vec();
        let mut betas = vec![0.0; p];
        for k in 0..p {
            let col = k * n;
            let norm = a[col + k..col + n].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let alpha = if a[col + k] > 0.0 { -norm } else { norm };
            let v0 = a[col + k] - alpha;
            // Normalize so v_k = 1.
            for i in k + 1..n {
                a[col + i] /= v0;
            }
            let beta = -v0 / alpha;
            betas[k] = beta;
            a[col + k] = alpha;
            for j in k + 1..p {
                let cj = j * n;
                let mut dot = a[cj + k];
                for i in k + 1..n {
                    dot += a[col + i] * a[cj + i];
                }
                dot *= beta;
                a[cj + k] -= dot;
                for i in k + 1..n {
                    a[cj + i] -= dot * a[col + i];
                }
            }
        }
        Self { n, p, a, betas }
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        self.a[j * self.n + i]
    }

    fn rank(&self) -> usize {
        let diag: Vec<f64> = (0..self.p).map(|k| self.r(k, k).abs()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            return 0;
        }
        diag.iter().filter(|&&d| d >= RANK_TOLERANCE * max).count()
    }

    /// Applies `Qᵀ` to `y`.
    fn qt_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        for k in 0..self.p {
            let beta = self.betas[k];
            if beta == 0.0 {
                continue;
            }
            let col = k * self.n;
            let mut dot = out[k];
            for i in k + 1..self.n {
                dot += self.a[col + i] * out[i];
            }
            dot *= beta;
            out[k] -= dot;
            for i in k + 1..self.n {
                out[i] -= dot * self.a[col + i];
            }
        }
        out
    }

    /// Solves `R b = rhs` for the leading `p` entries.
    fn back_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.p];
        for i in (0..self.p).rev() {
            let mut s = rhs[i];
            for j in i + 1..self.p {
                s -= self.r(i, j) * b[j];
            }
            b[i] = s / self.r(i, i);
        }
        b
    }

    /// `R⁻¹` (upper triangular), row-major `p × p`.
    fn r_inverse(&self) -> Vec<f64> {
        let p = self.p;
        let mut inv = vec![0.0; p * p];
        for col in 0..p {
            let mut e = vec![0.0; p];
            e[col] = 1.0;
            let x = self.back_solve(&e);
            for row in 0..p {
                inv[row * p + col] = x[row];
            }
        }
        inv
    }
}

/// One fitted model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    /// `σ̂² (XᵀX)⁻¹`, row-major `p × p`.
    pub covariance: Vec<Vec<f64>>,
    pub residual_variance: f64,
    pub df: usize,
    pub n: usize,
    pub residuals: Vec<f64>,
    pub spec: ModelSpec,
}

/// Two-sided p-value of a coefficient. `degenerate` marks the zero-SE case
/// where the value is defined by convention rather than by the t law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PValue {
    pub p: f64,
    pub degenerate: bool,
}

/// Fits by least squares using the design's QR factor.
pub fn fit(design: &Design, spec: &ModelSpec) -> Result<FitResult, OlsError> {
    let (n, p) = (design.n, design.p);
    if n <= p {
        return Err(OlsError::NoResidualDf { n, p });
    }
    if spec.p() != p {
        return Err(OlsError::InvalidSpec(format!(
            "model has {} coefficients but design has {p} columns",
            spec.p()
        )));
    }
    let qty = design.qr.qt_mul(&design.y);
    let beta = design.qr.back_solve(&qty);

    let mut residuals = design.y.clone();
    for (j, b) in beta.iter().enumerate() {
        for (r, x) in residuals.iter_mut().zip(design.column(j)) {
            *r -= b * x;
        }
    }
    let df = n - p;
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let sigma2 = rss / df as f64;

    let rinv = design.qr.r_inverse();
    let mut cov = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in i..p {
            // (R⁻¹ R⁻ᵀ)_ij, R⁻¹ upper triangular.
            let s: f64 = (j..p).map(|k| rinv[i * p + k] * rinv[j * p + k]).sum();
            cov[i][j] = sigma2 * s;
            cov[j][i] = sigma2 * s;
        }
    }

    let (coefficients, covariance) = match design.center {
        Some(c) => uncenter(&beta, &cov, spec.degree, c),
        None => (beta, cov),
    };
    Ok(FitResult {
        coefficients,
        covariance,
        residual_variance: sigma2,
        df,
        n,
        residuals,
        spec: spec.clone(),
    })
}

/// Maps coefficients on powers of `(x - c)` to coefficients on powers of `x`.
fn uncenter(
    beta: &[f64],
    cov: &[Vec<f64>],
    degree: usize,
    c: f64,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = beta.len();
    let mut t = vec![vec![0.0; p]; p];
    for (i, row) in t.iter_mut().enumerate().skip(degree + 1) {
        row[i] = 1.0;
    }
    // x-power j picks up a_k * C(k, j) * (-c)^(k - j) from every k >= j.
    for j in 0..=degree {
        for k in j..=degree {
            t[j][k] = binomial(k, j) * (-c).powi((k - j) as i32);
        }
    }
    let b: Vec<f64> = t
        .iter()
        .map(|row| row.iter().zip(beta).map(|(a, b)| a * b).sum())
        .collect();
    let mut out = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            let mut s = 0.0;
            for k in 0..p {
                if t[i][k] == 0.0 {
                    continue;
                }
                for l in 0..p {
                    s += t[i][k] * cov[k][l] * t[j][l];
                }
            }
            out[i][j] = s;
        }
    }
    (b, out)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Fits `spec` on the rows of `view`.
pub fn fit_view(view: &IndexView<'_>, spec: &ModelSpec) -> Result<FitResult, OlsError> {
    let design = build_design(view, spec)?;
    fit(&design, spec)
}

impl FitResult {
    pub fn p(&self) -> usize {
        self.coefficients.len()
    }

    fn check_index(&self, j: usize) -> Result<(), OlsError> {
        if j >= self.p() {
            Err(OlsError::BadIndex {
                index: j,
                p: self.p(),
            })
        } else {
            Ok(())
        }
    }

    pub fn se(&self, j: usize) -> Result<f64, OlsError> {
        self.check_index(j)?;
        Ok(self.covariance[j][j].max(0.0).sqrt())
    }

    /// `estimate / se`; infinite when se is zero and the estimate is not,
    /// zero when both are.
    pub fn t_stat(&self, j: usize) -> Result<f64, OlsError> {
        let se = self.se(j)?;
        let b = self.coefficients[j];
        Ok(if se > 0.0 {
            b / se
        } else if b == 0.0 {
            0.0
        } else {
            b.signum() * f64::INFINITY
        })
    }

    /// `estimate ± t((1+level)/2, df) · se`.
    pub fn classical_ci(&self, j: usize, level: f64) -> Result<(f64, f64), OlsError> {
        if !(level > 0.0 && level < 1.0) {
            return Err(OlsError::BadLevel(level));
        }
        let se = self.se(j)?;
        let b = self.coefficients[j];
        if se == 0.0 {
            return Ok((b, b));
        }
        let half = t_quantile(0.5 * (1.0 + level), self.df as f64) * se;
        Ok((b - half, b + half))
    }

    pub fn coef_p_value(&self, j: usize) -> Result<PValue, OlsError> {
        let se = self.se(j)?;
        let b = self.coefficients[j];
        if se == 0.0 {
            return Ok(PValue {
                p: if b == 0.0 { 1.0 } else { 0.0 },
                degenerate: true,
            });
        }
        Ok(PValue {
            p: t_two_sided(b / se, self.df as f64),
            degenerate: false,
        })
    }

    /// Coefficient of `focal^2`, if the model has one.
    pub fn curvature(&self) -> Option<f64> {
        (self.spec.degree >= 2).then(|| self.coefficients[2])
    }

    /// Prediction at focal value `x` with controls held at `adjustment`.
    pub fn predict(&self, x: f64, adjustment: &[f64]) -> f64 {
        predict_with(&self.coefficients, self.spec.degree, x, adjustment)
    }
}

/// `b0 + Σ b_d x^d + Σ γ_k adj_k` for a coefficient vector in design order.
pub fn predict_with(coefficients: &[f64], degree: usize, x: f64, adjustment: &[f64]) -> f64 {
    // Horner over the polynomial part.
    let poly = coefficients[..=degree]
        .iter()
        .rev()
        .fold(0.0, |acc, b| acc * x + b);
    let controls = &coefficients[degree + 1..];
    debug_assert_eq!(controls.len(), adjustment.len());
    poly + controls
        .iter()
        .zip(adjustment)
        .map(|(g, a)| g * a)
        .sum::<f64>()
}

/// Sign of an estimate or of a hypothesized effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(v: f64) -> Self {
        if v > 0.0 {
            Sign::Positive
        } else if v < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

/// Converts a two-sided p-value into the confidence that the true effect
/// has `hypothesis` sign: `1 - p/2` when the estimate agrees, `p/2` when it
/// disagrees, `0.5` for a zero estimate.
pub fn p_to_confidence(p: f64, estimate: Sign, hypothesis: Sign) -> f64 {
    assert!((0.0..=1.0).contains(&p), "p-value must be in [0, 1]");
    assert!(hypothesis != Sign::Zero, "hypothesis must be directional");
    if estimate == Sign::Zero {
        0.5
    } else if estimate == hypothesis {
        1.0 - p / 2.0
    } else {
        p / 2.0
    }
}
