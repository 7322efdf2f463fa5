//! The ARMA(p, p-1) representation of a CARMA process sampled on a grid of step `delta`.
//!
//! `Phi(B) Y_n = Theta(B) Z_n` with `Phi(z) = prod (1 - e^{delta lambda_i} z)`, a
//! minimum-phase `Theta` normalized by `Theta(0) = 1` and white noise `Z` of variance
//! `sigma2_delta`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::alpha::{eta_values, factorial};
use crate::error::{CarmaError, Result};
use crate::linalg::gauss_legendre;
use crate::model::CarmaModel;
use crate::poly;

const UNIT_CIRCLE_TOL: f64 = 1e-8;
const SPECTRUM_GRID: usize = 4096;
const QUAD_ORDER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ExactFactorization,
    Asymptotic,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledArma {
    pub delta: f64,
    /// `Phi` in ascending powers, `phi[0] = 1`.
    pub phi: Vec<f64>,
    /// `Theta` in ascending powers, `theta[0] = 1`.
    pub theta: Vec<f64>,
    pub sigma2_delta: f64,
    pub provenance: Provenance,
}

impl SampledArma {
    /// AR part from the model, MA part by factorizing the exact filtered autocovariance.
    pub fn exact(model: &CarmaModel, delta: f64) -> Result<Self> {
        let phi = ar_polynomial(model, delta)?;
        let gamma = filtered_autocovariance(model, delta)?;
        let (theta, sigma2_delta) = spectral_factorize(&gamma)?;
        Ok(Self {
            delta,
            phi,
            theta,
            sigma2_delta,
            provenance: Provenance::ExactFactorization,
        })
    }

    /// Roots of `Theta`.
    pub fn ma_roots(&self) -> Result<Vec<Complex64>> {
        poly::roots(&self.theta)
    }

    /// Roots of `Phi`.
    pub fn ar_roots(&self) -> Result<Vec<Complex64>> {
        poly::roots(&self.phi)
    }

    pub fn min_ma_root_modulus(&self) -> Result<f64> {
        Ok(self
            .ma_roots()?
            .iter()
            .map(|z| z.norm())
            .fold(f64::INFINITY, f64::min))
    }

    pub fn is_min_phase(&self) -> Result<bool> {
        Ok(self.min_ma_root_modulus()? > 1.0)
    }

    /// Autocovariances of `Theta(B) Z` at lags `0..theta.len()`.
    pub fn ma_autocovariance(&self) -> Vec<f64> {
        ma_autocovariance(&self.theta, self.sigma2_delta)
    }

    pub fn wold(&self, n: usize) -> Vec<f64> {
        wold_coefficients(self, n)
    }
}

/// `Phi(z) = prod (1 - e^{delta lambda_i} z)` in ascending powers.
pub fn ar_polynomial(model: &CarmaModel, delta: f64) -> Result<Vec<f64>> {
    check_delta(delta)?;
    let cs: Vec<Complex64> = model.ar_roots().iter().map(|l| (l * delta).exp()).collect();
    poly::real_coefficients(&poly::one_minus_products(&cs), 1e-12)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(CarmaError::InvalidParameter(format!("delta must be positive, got {delta}")))
    }
}

/// `gamma_U(0..p-1)` for `U_n = Phi(B) Y_n`.
///
/// `U_n` is the stochastic integral of `K(n delta - s)` with
/// `K(s) = sum_j phi_j g(s - j delta)`, which is supported on `[0, p delta]`, so
/// `gamma_U(k) = int K(s) K(s + k delta) ds`. The integral is taken piecewise on the
/// `delta` grid, where `K` is smooth. Lags `p` and `p + 1` are computed as well and must
/// vanish.
pub fn filtered_autocovariance(model: &CarmaModel, delta: f64) -> Result<Vec<f64>> {
    let p = model.p();
    let mut gamma = filtered_autocovariance_extended(model, delta)?;
    let tail = gamma[p].abs().max(gamma[p + 1].abs());
    if !(tail <= 1e-9 * gamma[0]) {
        return Err(CarmaError::DependenceCheck {
            lags: p,
            residual: tail / gamma[0],
        });
    }
    gamma.truncate(p);
    Ok(gamma)
}

/// `gamma_U(0..p+2)` by the quadrature of [`filtered_autocovariance`], without the
/// dependence check.
pub fn filtered_autocovariance_extended(model: &CarmaModel, delta: f64) -> Result<Vec<f64>> {
    model.ensure_valid()?;
    let phi = ar_polynomial(model, delta)?;
    let p = model.p();
    let (nodes, weights) = gauss_legendre(QUAD_ORDER);
    let offsets: Vec<f64> = nodes.iter().map(|x| 0.5 * delta * (x + 1.0)).collect();
    let pieces = p + 2;
    let span = 2 * pieces + 1;
    // g at offset u + m delta, for m = 0..span
    let g: Vec<Vec<f64>> = offsets
        .iter()
        .map(|&u| (0..span).map(|m| model.kernel(u + m as f64 * delta)).collect())
        .collect();
    let k_at = |node: usize, piece: usize| -> f64 {
        phi.iter()
            .enumerate()
            .take(piece + 1)
            .map(|(j, f)| f * g[node][piece - j])
            .sum()
    };
    let lags = p + 2;
    let mut gamma = vec![0.0; lags];
    for (lag, out) in gamma.iter_mut().enumerate() {
        let mut acc = 0.0;
        for piece in 0..pieces {
            for (node, &w) in weights.iter().enumerate() {
                acc += w * k_at(node, piece) * k_at(node, piece + lag);
            }
        }
        *out = 0.5 * delta * acc;
    }
    Ok(gamma)
}

/// `gamma_U(0..p+1) = sum_{i,j} phi_i phi_j gamma_Y((k + i - j) delta)`.
///
/// Loses relative accuracy as `delta -> 0`, since `gamma_U` is of order
/// `delta^{2(p-q)-1}` while the summands are of order one.
pub fn filtered_autocovariance_direct(model: &CarmaModel, delta: f64) -> Result<Vec<f64>> {
    let phi = ar_polynomial(model, delta)?;
    Ok(filter_covariance(&phi, |lag| model.autocovariance(lag as f64 * delta), model.p() + 2))
}

/// Autocovariances of `Phi(B) X` at lags `0..lags` from those of `X`.
pub fn filter_covariance(phi: &[f64], gamma: impl Fn(i64) -> f64, lags: usize) -> Vec<f64> {
    (0..lags as i64)
        .map(|k| {
            let mut s = 0.0;
            for (i, a) in phi.iter().enumerate() {
                for (j, b) in phi.iter().enumerate() {
                    s += a * b * gamma(k + i as i64 - j as i64);
                }
            }
            s
        })
        .collect()
}

/// Factorizes `c(z) = sum_{|k| < m} gamma_{|k|} z^k` as `sigma2 Theta(z) Theta(1/z)` with
/// `Theta(0) = 1` and all roots of `Theta` outside the closed unit disc.
///
/// Returns `(theta, sigma2)`, with `theta` of the same length as `gamma_u`.
pub fn spectral_factorize(gamma_u: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = gamma_u.len();
    if m == 0 {
        return Err(CarmaError::InsufficientData("empty covariance sequence".into()));
    }
    let g0 = gamma_u[0];
    if !(g0 > 0.0 && g0.is_finite()) {
        return Err(CarmaError::InvalidCovariance { min_spectrum: g0 });
    }
    let min_spectrum = (0..SPECTRUM_GRID)
        .map(|i| {
            let w = std::f64::consts::PI * i as f64 / (SPECTRUM_GRID - 1) as f64;
            g0 + 2.0
                * gamma_u[1..]
                    .iter()
                    .enumerate()
                    .map(|(k, g)| g * ((k + 1) as f64 * w).cos())
                    .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    if min_spectrum < -1e-10 * g0 {
        return Err(CarmaError::InvalidCovariance { min_spectrum });
    }

    let mut d = m - 1;
    while d > 0 && gamma_u[d].abs() <= 1e-14 * g0 {
        d -= 1;
    }
    let mut theta = vec![0.0; m];
    theta[0] = 1.0;
    if d == 0 {
        return Ok((theta, g0));
    }

    // z^d c(z), ascending
    let mut sym = Vec::with_capacity(2 * d + 1);
    sym.extend(gamma_u[1..=d].iter().rev());
    sym.extend(&gamma_u[..=d]);
    let roots = poly::roots(&sym)?;
    if let Some(r) = roots.iter().find(|r| (r.norm() - 1.0).abs() <= UNIT_CIRCLE_TOL) {
        return Err(CarmaError::NonInvertibleLimit { modulus: r.norm() });
    }
    let outside: Vec<Complex64> = roots.into_iter().filter(|r| r.norm() > 1.0).collect();
    if outside.len() != d {
        return Err(CarmaError::RootCount {
            expected: d,
            found: outside.len(),
        });
    }
    let outside = poly::symmetrize_conjugates(&outside, 1e-9);
    let inv: Vec<Complex64> = outside.iter().map(|r| r.inv()).collect();
    let coeffs = poly::real_coefficients(&poly::one_minus_products(&inv), 1e-9)?;
    theta[..=d].copy_from_slice(&coeffs);
    let sigma2 = g0 / theta.iter().map(|t| t * t).sum::<f64>();

    let rebuilt = ma_autocovariance(&theta, sigma2);
    let err = rebuilt
        .iter()
        .zip(gamma_u)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if err > 1e-8 * g0 {
        return Err(CarmaError::Numeric(format!(
            "factorization reproduces the covariances only to {:e} relative",
            err / g0
        )));
    }
    Ok((theta, sigma2))
}

/// `sigma2 sum_j theta_j theta_{j+k}` for `k = 0..theta.len()`.
pub fn ma_autocovariance(theta: &[f64], sigma2: f64) -> Vec<f64> {
    (0..theta.len())
        .map(|k| sigma2 * theta.iter().zip(&theta[k..]).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

/// Leading-order sampled ARMA for small `delta`:
/// `Theta(z) = prod_i (1 + eta(xi_i) z) prod_k (1 - zeta_k z)` with
/// `zeta_k = 1 - sgn(Re mu_k) mu_k delta`, and
/// `sigma2_delta = sigma^2 delta^{2d-1} / ((2d-1)! prod eta(xi_i))`, `d = p - q`.
///
/// `Re mu_k < 0` is accepted: the sampled spectrum depends on `mu_k` only through
/// `|iw + mu_k|^2`, so the model is indistinguishable from its reflection.
pub fn asymptotic_arma(model: &CarmaModel, delta: f64) -> Result<SampledArma> {
    model.ensure_valid()?;
    check_delta(delta)?;
    let d = model.p() - model.q();
    let etas = eta_values(d - 1)?;
    let mut factors: Vec<Complex64> = etas.iter().map(|&e| Complex64::new(-e, 0.0)).collect();
    for mu in model.ma_mu() {
        if mu.re == 0.0 {
            return Err(CarmaError::NotInvertible);
        }
        factors.push(1.0 - mu.re.signum() * mu * delta);
    }
    let theta = poly::real_coefficients(&poly::one_minus_products(&factors), 1e-12)?;
    let fact = factorial(2 * d - 1);
    let fact = num_traits::ToPrimitive::to_f64(&fact).unwrap_or(f64::INFINITY);
    let prod_eta: f64 = etas.iter().product();
    let s = model.sigma();
    let sigma2_delta = s * s * delta.powi(2 * d as i32 - 1) / (fact * prod_eta);
    Ok(SampledArma {
        delta,
        phi: ar_polynomial(model, delta)?,
        theta,
        sigma2_delta,
        provenance: Provenance::Asymptotic,
    })
}

/// `psi_0..psi_{n-1}` of `Theta(z) / Phi(z)`.
pub fn wold_coefficients(arma: &SampledArma, n: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = arma.theta.get(j).copied().unwrap_or(0.0);
        for i in 1..arma.phi.len().min(j + 1) {
            v -= arma.phi[i] * psi[j - i];
        }
        psi.push(v);
    }
    psi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn car1_ar_polynomial_and_covariance() {
        let (l, s, d) = (-0.8, 1.3, 0.2);
        let m = CarmaModel::from_real(&[l], &[], s).unwrap();
        let phi = ar_polynomial(&m, d).unwrap();
        assert_eq!(phi.len(), 2);
        assert!((phi[1] + (l * d).exp()).abs() < 1e-15);
        let g = filtered_autocovariance(&m, d).unwrap();
        let want = s * s * (1.0 - (2.0 * l * d).exp()) / (-2.0 * l);
        assert_eq!(g.len(), 1);
        assert!((g[0] - want).abs() < 1e-14 * want);
    }

    #[test]
    fn car2_ar_polynomial() {
        let m = CarmaModel::from_real(&[-0.7, -1.2], &[], 1.0).unwrap();
        let phi = ar_polynomial(&m, 0.25).unwrap();
        let want = [1.0, -((-0.175f64).exp() + (-0.3f64).exp()), (-0.475f64).exp()];
        for (a, b) in phi.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn quadrature_and_direct_covariances_agree_at_moderate_delta() {
        let m = CarmaModel::new(
            vec![Complex64::new(-1.0, 2.0), Complex64::new(-1.0, -2.0), Complex64::new(-0.5, 0.0)],
            vec![Complex64::new(1.5, 0.0)],
            0.8,
        )
        .unwrap();
        let a = filtered_autocovariance(&m, 0.3).unwrap();
        let b = filtered_autocovariance_direct(&m, 0.3).unwrap();
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-10 * a[0], "lag {k}");
        }
        assert!(b[3].abs() < 1e-10 * a[0]);
    }

    #[test]
    fn factorize_ma1() {
        let (th, s) = (0.5, 2.0);
        let (theta, s2) = spectral_factorize(&[(1.0 + th * th) * s, -th * s]).unwrap();
        assert!((theta[1] + 0.5).abs() < 1e-12);
        assert!((s2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn factorize_white_noise() {
        let (theta, s2) = spectral_factorize(&[1.0, 0.0]).unwrap();
        assert_eq!(theta, vec![1.0, 0.0]);
        assert_eq!(s2, 1.0);
    }

    #[test]
    fn factorize_rejects_negative_spectrum_and_unit_roots() {
        assert!(matches!(
            spectral_factorize(&[1.0, 0.9]),
            Err(CarmaError::InvalidCovariance { .. })
        ));
        assert!(matches!(
            spectral_factorize(&[2.0, -1.0]),
            Err(CarmaError::NonInvertibleLimit { .. })
        ));
    }

    #[test]
    fn wold_of_ar1() {
        let arma = SampledArma {
            delta: 1.0,
            phi: vec![1.0, -0.6],
            theta: vec![1.0],
            sigma2_delta: 1.0,
            provenance: Provenance::Empirical,
        };
        let psi = wold_coefficients(&arma, 10);
        for (j, p) in psi.iter().enumerate() {
            assert!((p - 0.6f64.powi(j as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn car2_asymptotics() {
        let m = CarmaModel::from_real(&[-0.7, -1.2], &[], 1.0).unwrap();
        let a = asymptotic_arma(&m, 1e-3).unwrap();
        assert!((a.theta[1] - (2.0 - 3f64.sqrt())).abs() < 1e-12);
        let want = 1e-9 * (2.0 + 3f64.sqrt()) / 6.0;
        assert!((a.sigma2_delta - want).abs() < 1e-12 * want);
    }

    #[test]
    fn asymptotic_zeta_sign() {
        let d = 0.01;
        for mu in [1.0, -1.0] {
            let m = CarmaModel::from_real(&[-0.7, -1.2], &[mu], 1.0).unwrap();
            let a = asymptotic_arma(&m, d).unwrap();
            assert!((a.theta[1] + (1.0 - mu.abs() * d)).abs() < 1e-15);
        }
        let m = CarmaModel::new(
            vec![Complex64::new(-0.7, 0.0), Complex64::new(-1.2, 0.0), Complex64::new(-2.0, 0.0)],
            vec![Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)],
            1.0,
        )
        .unwrap();
        assert!(asymptotic_arma(&m, d).is_err());
    }

    #[test]
    fn json_shape() {
        let m = CarmaModel::from_real(&[-0.7, -1.2], &[], 1.0).unwrap();
        let a = SampledArma::exact(&m, 0.1).unwrap();
        let v = serde_json::to_value(&a).unwrap();
        assert_eq!(v["provenance"], "exact_factorization");
        assert_eq!(v["phi"].as_array().unwrap().len(), 3);
        assert_eq!(v["theta"].as_array().unwrap().len(), 2);
    }
}
