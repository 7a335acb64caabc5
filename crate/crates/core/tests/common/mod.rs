//! Independent oracles shared by the integration and acceptance tests.
//! Nothing here calls into the code paths it is used to check.
#![allow(dead_code)]

use num::{BigRational, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rat(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Exact solution of the normal equations `XᵀX b = Xᵀy` by rational
/// Gauss-Jordan elimination. `x` is row-major `n × p`.
pub fn normal_equations_exact(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let xr: Vec<Vec<BigRational>> = x.iter().map(|r| r.iter().map(|&v| rat(v)).collect()).collect();
    let yr: Vec<BigRational> = y.iter().map(|&v| rat(v)).collect();
    let mut a = vec![vec![BigRational::zero(); p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = xr.iter().map(|r| &r[i] * &r[j]).fold(BigRational::zero(), |s, v| s + v);
        }
        a[i][p] = xr
            .iter()
            .zip(&yr)
            .map(|(r, yv)| &r[i] * yv)
            .fold(BigRational::zero(), |s, v| s + v);
    }
    for col in 0..p {
        let piv = (col..p).find(|&r| !a[r][col].is_zero()).expect("full rank");
        a.swap(col, piv);
        let d = a[col][col].clone();
        for v in a[col].iter_mut() {
            *v = &*v / &d;
        }
        for r in 0..p {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in 0..=p {
                    let sub = &f * &a[col][c];
                    a[r][c] = &a[r][c] - sub;
                }
            }
        }
    }
    a.iter().map(|row| row[p].to_f64().unwrap()).collect()
}

/// Exact rank by rational Gaussian elimination. `x` is row-major.
pub fn rank_exact(x: &[Vec<f64>]) -> usize {
    let mut a: Vec<Vec<BigRational>> =
        x.iter().map(|r| r.iter().map(|&v| rat(v)).collect()).collect();
    let (n, p) = (a.len(), a[0].len());
    let mut rank = 0;
    for col in 0..p {
        let Some(piv) = (rank..n).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, piv);
        for r in rank + 1..n {
            if !a[r][col].is_zero() {
                let f = &a[r][col] / &a[rank][col];
                for c in col..p {
                    let sub = &f * &a[rank][c];
                    a[r][c] = &a[r][c] - sub;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 50)
}

/// Student-t density for integer `df`, with the normalizing constant built
/// from exact half-integer gamma products.
pub fn t_density(df: u32) -> impl Fn(f64) -> f64 {
    // Γ(k/2) for integer k via Γ(1/2) = √π, Γ(1) = 1, Γ(z+1) = zΓ(z).
    fn gamma_half(k: u32) -> f64 {
        let mut g = if k % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
        let mut z = if k % 2 == 0 { 1.0 } else { 0.5 };
        while 2.0 * z < k as f64 {
            g *= z;
            z += 1.0;
        }
        g
    }
    let v = df as f64;
    let c = gamma_half(df + 1) / ((v * std::f64::consts::PI).sqrt() * gamma_half(df));
    move |t: f64| c * (1.0 + t * t / v).powf(-(v + 1.0) / 2.0)
}

/// `P(T <= t)` by quadrature of the density from 0.
pub fn t_cdf_quadrature(t: f64, df: u32) -> f64 {
    let f = t_density(df);
    let half = adaptive_simpson(&f, 0.0, t.abs(), 1e-14);
    if t >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Rank-interpolation percentile written directly from the 1-indexed rule
/// `h = q (m - 1) + 1`, `x_⌊h⌋ + (h - ⌊h⌋)(x_⌊h⌋+1 - x_⌊h⌋)`.
pub fn percentile_oracle(values: &[f64], q: f64) -> f64 {
    let mut x = values.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = x.len();
    let h = q * (m as f64 - 1.0) + 1.0;
    let fl = h.floor();
    let k = fl as usize; // 1-indexed
    if k >= m {
        return x[m - 1];
    }
    let lower = x[k - 1];
    let upper = x[k];
    if h == fl {
        lower
    } else {
        lower + (h - fl) * (upper - lower)
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize, intercept: bool) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..p)
                .map(|j| if intercept && j == 0 { 1.0 } else { rng.random_range(-3.0..3.0) })
                .collect()
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Random well-typed predicate text. Spacing, redundant parentheses and
/// operator spellings vary; literals are non-negative.
pub fn random_predicate_text(rng: &mut ChaCha8Rng, depth: u32) -> String {
    fn sp(rng: &mut ChaCha8Rng) -> &'static str {
        ["", " ", "  "][rng.random_range(0..3)]
    }
    fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
        xs[rng.random_range(0..xs.len())]
    }
    fn num(rng: &mut ChaCha8Rng, depth: u32) -> String {
        let leaf = depth == 0 || rng.random_bool(0.35);
        if leaf {
            return match rng.random_range(0..8) {
                0 => format!("{}", rng.random_range(0..100)),
                1 => format!("{:.3}", rng.random_range(0.0..50.0)),
                2 => "2.5e1".to_string(),
                3 => "n".to_string(),
                4 => "curv()".to_string(),
                5 => "vertex()".to_string(),
                6 => format!("coef({})", rng.random_range(0..6)),
                _ => pick(rng, &["coef(x)", "coef(\"x^2\")", "coef(intercept)", "coef(c1)"]).to_string(),
            };
        }
        let d = depth - 1;
        match rng.random_range(0..5) {
            0 => format!("pred({})", num(rng, d)),
            1 => format!("-{}", num_atom(rng, d)),
            2 => format!("({}{}{})", sp(rng), num(rng, d), sp(rng)),
            _ => {
                let op = pick(rng, &["+", "-", "*", "/"]);
                let (s1, s2) = (sp(rng), sp(rng));
                format!("{}{s1}{op}{s2}{}", num_atom(rng, d), num_atom(rng, d))
            }
        }
    }
    fn num_atom(rng: &mut ChaCha8Rng, depth: u32) -> String {
        let inner = num(rng, depth);
        format!("({inner})")
    }
    fn boolean(rng: &mut ChaCha8Rng, depth: u32) -> String {
        let leaf = depth == 0 || rng.random_bool(0.3);
        let d = depth.saturating_sub(1);
        if leaf {
            if rng.random_bool(0.2) {
                let (a, lo, hi) = (num(rng, d), num(rng, d), num(rng, d));
                let hi = if rng.random_bool(0.2) { "inf".to_string() } else { hi };
                return format!("({a}) in [{lo},{}{hi}]", sp(rng));
            }
            let op = pick(rng, &["<", "<=", ">", ">=", "==", "=", "≤", "≥"]);
            let (s1, s2) = (sp(rng), sp(rng));
            return format!("({}){s1}{op}{s2}({})", num(rng, d), num(rng, d));
        }
        match rng.random_range(0..4) {
            0 => format!("{}({})", pick(rng, &["!", "not ", "! "]), boolean(rng, d)),
            1 => format!("({})", boolean(rng, d)),
            _ => {
                let op = pick(rng, &["&&", "and", "||", "or"]);
                format!("({}) {op} ({})", boolean(rng, d), boolean(rng, d))
            }
        }
    }
    boolean(rng, depth)
}
