//! Riemann-sum approximations `Y~_n = sum_j g(delta (j + h)) dL_{n-j}` of a CARMA process
//! and their ARMA(p, p-1) representation `Phi(B) Y~_n = Theta~(B) dL_n`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CarmaError, Result};
use crate::levy::{IncrementSeries, PathGrid};
use crate::linalg::expm;
use crate::model::CarmaModel;
use crate::poly;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiemannArma {
    pub delta: f64,
    pub h: f64,
    /// `theta~_0..theta~_{p-1}`, with `Theta~(z) = sum_k (-1)^k theta~_k z^k`.
    pub theta_tilde: Vec<f64>,
    pub derived_roots: Vec<Complex64>,
    pub invertible: bool,
}

impl RiemannArma {
    /// Coefficients of `Theta~` in ascending powers.
    pub fn ma_polynomial(&self) -> Vec<f64> {
        signed(&self.theta_tilde)
    }

    /// Autocovariances of `Theta~(B) dL` at lags `0..p` for increments of variance `delta`.
    pub fn implied_autocovariance(&self) -> Vec<f64> {
        let c = self.ma_polynomial();
        (0..c.len())
            .map(|k| self.delta * c.iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

fn signed(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .map(|(k, &v)| if k % 2 == 0 { v } else { -v })
        .collect()
}

fn check_rule(h: f64) -> Result<()> {
    if (0.0..=1.0).contains(&h) {
        Ok(())
    } else {
        Err(CarmaError::InvalidParameter(format!("rule h must lie in [0, 1], got {h}")))
    }
}

fn check_open_rule(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(CarmaError::InvalidParameter(format!("rule h must lie in (0, 1), got {h}")))
    }
}

/// `ceil(delta^{-1.1})`.
pub fn default_truncation(delta: f64) -> usize {
    delta.powf(-1.1).ceil() as usize
}

/// `g(delta (j + h))` for `j = 0..=n`, using the right limit at zero.
pub fn riemann_weights(model: &CarmaModel, delta: f64, h: f64, n: usize) -> Vec<f64> {
    let a = model.companion();
    let p = model.p();
    let step = expm(&(a * delta));
    let mut v = expm(&(a * (h * delta))).column(p - 1).into_owned();
    let b = model.b_vector();
    let s = model.sigma();
    let mut out = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        out.push(s * b.dot(&v));
        v = &step * v;
    }
    out
}

/// `Y~_n` for `n = N..len`, built from the coarse increments of `increments`.
pub fn simulate_riemann(
    model: &CarmaModel,
    increments: IncrementSeries,
    h: f64,
    truncation: Option<usize>,
) -> Result<PathGrid> {
    check_rule(h)?;
    let delta = increments.delta;
    let n_trunc = truncation.unwrap_or_else(|| default_truncation(delta));
    if n_trunc == 0 {
        return Err(CarmaError::InvalidParameter("truncation must be at least 1".into()));
    }
    let dl = increments.coarse_values();
    if n_trunc >= dl.len() {
        return Err(CarmaError::InsufficientData(format!(
            "truncation {n_trunc} needs more than {} increments",
            dl.len()
        )));
    }
    let w = riemann_weights(model, delta, h, n_trunc);
    let y_values = (n_trunc..dl.len())
        .map(|n| w.iter().enumerate().map(|(j, wj)| wj * dl[n - j]).sum())
        .collect();
    Ok(PathGrid {
        delta,
        y_values,
        x_states: None,
        increments,
        burn_in: n_trunc,
    })
}

/// `theta~_k = sigma sum_l b(lambda_l)/a'(lambda_l) e^{h delta lambda_l}
/// e_k({e^{delta lambda_j}}_{j != l})`.
pub fn riemann_arma_coefficients(model: &CarmaModel, delta: f64, h: f64) -> Result<RiemannArma> {
    check_rule(h)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(CarmaError::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let residues = model.residues()?;
    let lam = model.ar_roots();
    let p = model.p();
    let x: Vec<Complex64> = lam.iter().map(|l| (l * delta).exp()).collect();
    let mut acc = vec![Complex64::new(0.0, 0.0); p];
    for l in 0..p {
        let mut e = vec![Complex64::new(1.0, 0.0)];
        for (j, &xj) in x.iter().enumerate() {
            if j != l {
                e = poly::mul_complex(&e, &[Complex64::new(1.0, 0.0), xj]);
            }
        }
        let w = residues[l] * (lam[l] * (h * delta)).exp();
        for (k, ek) in e.iter().enumerate() {
            acc[k] += w * ek;
        }
    }
    let theta_tilde: Vec<f64> = poly::real_coefficients(&acc, 1e-9)?
        .into_iter()
        .map(|v| v * model.sigma())
        .collect();

    let mut c = signed(&theta_tilde);
    let scale = c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for v in c.iter_mut() {
        if v.abs() <= 1e-12 * scale {
            *v = 0.0;
        }
    }
    let derived_roots = poly::roots(&c)?;
    let invertible = derived_roots.iter().all(|r| r.norm() > 1.0);
    Ok(RiemannArma {
        delta,
        h,
        theta_tilde,
        derived_roots,
        invertible,
    })
}

/// Leading-order spurious MA parameters `chi`: `Theta~(z)` behaves like
/// `prod_j (1 - chi_j z)` as `delta -> 0`.
pub fn chi_roots(p_minus_q: usize, h: f64) -> Result<Vec<f64>> {
    check_open_rule(h)?;
    match p_minus_q {
        2 => Ok(vec![(h - 1.0) / h]),
        3 => {
            let s = (1.0 - 4.0 * (h - 1.0) * h).sqrt();
            let num = 2.0 * (h - 1.0).powi(2);
            let base = 2.0 * (h - 1.0) * h - 1.0;
            // j = 1: (-1)^j = -1, j = 2: +1
            Ok(vec![num / (base + s), num / (base - s)])
        }
        _ => Err(CarmaError::Unsupported(format!(
            "chi roots are available for p - q in {{2, 3}}, got {p_minus_q}"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum RuleSet {
    /// Every `h` in `(0, 1)`.
    All,
    Finite(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalRules {
    pub p_minus_q: usize,
    pub matching_h: RuleSet,
    pub invertible_matching_h: RuleSet,
}

/// Rules `h` for which the Riemann sum has the same leading-order autocovariance
/// structure as the sampled process, and the subset yielding an invertible `Theta~`.
pub fn optimal_rules(p_minus_q: usize) -> Result<OptimalRules> {
    let (matching_h, invertible_matching_h) = match p_minus_q {
        1 => (RuleSet::All, RuleSet::All),
        2 => {
            let r = 3f64.sqrt();
            (
                RuleSet::Finite(vec![(3.0 - r) / 6.0, (3.0 + r) / 6.0]),
                RuleSet::Finite(vec![(3.0 + r) / 6.0]),
            )
        }
        3 => {
            let r = (225.0 - 30.0 * 30f64.sqrt()).sqrt();
            (
                RuleSet::Finite(vec![(15.0 - r) / 30.0, (15.0 + r) / 30.0]),
                RuleSet::Finite(vec![]),
            )
        }
        0 => return Err(CarmaError::InvalidOrders { p: 0, q: 0 }),
        _ => {
            return Err(CarmaError::Unsupported(format!(
                "no closed-form rules for p - q = {p_minus_q}"
            )))
        }
    };
    Ok(OptimalRules {
        p_minus_q,
        matching_h,
        invertible_matching_h,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Leading-order `Theta~` for `p - q = d`, scaled by `(d-1)! / (sigma delta^{d-1})`:
/// `c_m(h) = sum_{i <= m} (-1)^i C(d, i) (m - i + h)^{d-1}`.
pub fn leading_riemann_ma(d: usize, h: f64) -> Vec<f64> {
    (0..d)
        .map(|m| {
            (0..=m)
                .map(|i| {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binomial(d, i) * (m as f64 - i as f64 + h).powi(d as i32 - 1)
                })
                .sum()
        })
        .collect()
}

fn covariances(c: &[f64]) -> Vec<f64> {
    (0..c.len())
        .map(|k| c.iter().zip(&c[k..]).map(|(a, b)| a * b).sum())
        .collect()
}

/// Leading-order covariances of the sampled process divided by `sigma^2 delta^{2d-1}`,
/// at lags `0..d`.
fn sampled_side(d: usize) -> Result<Vec<f64>> {
    let etas = crate::alpha::eta_values(d - 1)?;
    let factors: Vec<Complex64> = etas.iter().map(|&e| Complex64::new(-e, 0.0)).collect();
    let theta = poly::real_coefficients(&poly::one_minus_products(&factors), 1e-12)?;
    let prod_eta: f64 = etas.iter().product();
    let s2 = 1.0 / (factorial(2 * d - 1) * prod_eta);
    Ok(covariances(&theta).iter().map(|v| v * s2).collect())
}

/// Same for the Riemann sum with rule `h`.
fn riemann_side(d: usize, h: f64) -> Vec<f64> {
    let f = factorial(d - 1);
    covariances(&leading_riemann_ma(d, h))
        .iter()
        .map(|v| v / (f * f))
        .collect()
}

fn check_matching_order(p_minus_q: usize) -> Result<()> {
    if (2..=3).contains(&p_minus_q) {
        Ok(())
    } else {
        Err(CarmaError::Unsupported(format!(
            "matching system is implemented for p - q in {{2, 3}}, got {p_minus_q}"
        )))
    }
}

/// Riemann minus sampled leading-order covariances at lags `0..d`.
pub fn matching_residuals(p_minus_q: usize, h: f64) -> Result<Vec<f64>> {
    check_matching_order(p_minus_q)?;
    let s = sampled_side(p_minus_q)?;
    Ok(residuals(&s, p_minus_q, h))
}

fn residuals(sampled: &[f64], d: usize, h: f64) -> Vec<f64> {
    riemann_side(d, h).iter().zip(sampled).map(|(a, b)| a - b).collect()
}

/// Solves the leading-order matching system in `h` by bisection on its highest-lag
/// equation, then checks every lag.
pub fn match_h_numerically(p_minus_q: usize) -> Result<Vec<f64>> {
    check_matching_order(p_minus_q)?;
    let sampled = sampled_side(p_minus_q)?;
    let f = |h: f64| -> Result<f64> { Ok(residuals(&sampled, p_minus_q, h)[p_minus_q - 1]) };
    let grid = 1000;
    let mut roots = Vec::new();
    let mut prev_h = 1e-9;
    let mut prev = f(prev_h)?;
    for i in 1..=grid {
        let hi = if i == grid { 1.0 - 1e-9 } else { i as f64 / grid as f64 };
        let cur = f(hi)?;
        if prev == 0.0 {
            roots.push(prev_h);
        } else if prev * cur < 0.0 {
            let (mut a, mut b, fa) = (prev_h, hi, prev);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m == a || m == b {
                    break;
                }
                let fm = f(m)?;
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if (fm < 0.0) == (fa < 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev_h = hi;
        prev = cur;
    }
    for &h in &roots {
        let worst = residuals(&sampled, p_minus_q, h)
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        if worst > 1e-10 {
            return Err(CarmaError::Numeric(format!(
                "matching residual {worst:e} at h = {h}"
            )));
        }
    }
    Ok(roots)
}
