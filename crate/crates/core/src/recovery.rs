//! Recovery of the driving increments from a sampled path, recovery-error diagnostics and
//! the kernel estimator `g^(t) = (sigma_delta / sqrt(delta)) psi_{floor(t / delta)}`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CarmaError, Result};
use crate::levy::{generate_subgrid, simulate_path, Driver, InitialState, PathGrid};
use crate::model::CarmaModel;
use crate::spectral::{spectral_factorize, wold_coefficients, Provenance, SampledArma};

const TRANSIENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredIncrements {
    pub delta: f64,
    /// `L-bar_n = sqrt(delta) / sigma_delta * Z_n` after the burn-in.
    pub values: Vec<f64>,
    /// Leading inverted samples discarded.
    pub burn_in: usize,
    /// Index into the coarse increments of the path of the increment matching `values[0]`.
    pub first_increment: usize,
    pub source_arma: SampledArma,
}

/// `max(p, ceil(log(1e-12) / log(max |1 / root|)))` over the roots of `Theta`.
pub fn inversion_burn_in(arma: &SampledArma) -> Result<usize> {
    let p = arma.phi.len() - 1;
    let min_modulus = arma.min_ma_root_modulus()?;
    if !(min_modulus > 1.0) {
        return Err(CarmaError::NotMinPhase { min_modulus });
    }
    if min_modulus.is_infinite() {
        return Ok(p);
    }
    let rate = (1.0 / min_modulus).ln();
    Ok(((TRANSIENT_TOL.ln() / rate).ceil() as usize).max(p))
}

/// Innovations `Z` from `Theta(B) Z_n = Phi(B) Y_n` with zero initial values.
pub fn innovations(y: &[f64], phi: &[f64], theta: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(y.len());
    for n in 0..y.len() {
        let mut v: f64 = phi
            .iter()
            .take(n + 1)
            .enumerate()
            .map(|(i, f)| f * y[n - i])
            .sum();
        for k in 1..theta.len().min(n + 1) {
            v -= theta[k] * z[n - k];
        }
        z.push(v);
    }
    z
}

/// Inverts the sampled ARMA on the path `y`.
pub fn invert(y: &PathGrid, arma: &SampledArma) -> Result<RecoveredIncrements> {
    if (y.delta - arma.delta).abs() > 1e-12 * arma.delta {
        return Err(CarmaError::DimensionMismatch(format!(
            "path step {} differs from ARMA step {}",
            y.delta, arma.delta
        )));
    }
    let burn_in = inversion_burn_in(arma)?;
    if y.len() <= burn_in {
        return Err(CarmaError::InsufficientData(format!(
            "path of length {} does not exceed the inversion burn-in {burn_in}",
            y.len()
        )));
    }
    let z = innovations(&y.y_values, &arma.phi, &arma.theta);
    let scale = arma.delta.sqrt() / arma.sigma2_delta.sqrt();
    Ok(RecoveredIncrements {
        delta: arma.delta,
        values: z[burn_in..].iter().map(|v| v * scale).collect(),
        burn_in,
        first_increment: y.burn_in + burn_in,
        source_arma: arma.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean_sq_error: f64,
    pub mc_stderr: f64,
    pub n_paths: usize,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self {
            mean_sq_error: mean,
            mc_stderr: (var / n).sqrt(),
            n_paths: samples.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub seed: u64,
    /// Subgrid factor; the driver default when `None`.
    pub subgrid_factor: Option<usize>,
}

/// Monte Carlo estimate of `E[(sum_{i <= floor(t/delta)} L-bar_i - L_{floor(t/delta) delta})^2]`.
///
/// Each path starts from the stationary state law and is inverted with the exact sampled
/// ARMA; the inversion burn-in precedes the `[0, t]` window. Path `k` uses RNG stream `k`.
pub fn recovery_error_mc(
    model: &CarmaModel,
    delta: f64,
    t: f64,
    n_paths: usize,
    driver: Driver,
    options: McOptions,
) -> Result<McEstimate> {
    model.ensure_valid()?;
    if !(t > 0.0) || n_paths < 2 {
        return Err(CarmaError::InvalidParameter(
            "t must be positive and at least two paths are needed".into(),
        ));
    }
    let arma = SampledArma::exact(model, delta)?;
    let burn = inversion_burn_in(&arma)?;
    let n_t = (t / delta + 1e-9).floor() as usize;
    if n_t == 0 {
        return Err(CarmaError::InvalidParameter(format!("t = {t} is shorter than delta = {delta}")));
    }
    let m = options.subgrid_factor.unwrap_or_else(|| driver.default_subgrid());
    let samples: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let inc = generate_subgrid(driver, options.seed, k, delta, burn + n_t, m)?;
            let path = simulate_path(model, inc, InitialState::StationaryGaussian)?;
            let rec = invert(&path, &arma)?;
            let truth: f64 = path.increments.coarse_values()[rec.first_increment..].iter().sum();
            let recovered: f64 = rec.values.iter().sum();
            Ok((recovered - truth).powi(2))
        })
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_samples(&samples))
}

fn check_carma2(model: &CarmaModel) -> Result<()> {
    if model.p() != 2 {
        return Err(CarmaError::InvalidOrders {
            p: model.p(),
            q: model.q(),
        });
    }
    model.ensure_distinct_ar_roots()
}

/// Exact recovery-error variance of a CARMA(2, q) model at step `delta` over
/// `n = floor(t / delta)` steps, for an infinite-past inversion:
/// `2 n delta - 2 sqrt(delta) / sigma_delta (n I_0 + S I_1)` with
/// `I_0 = int_0^delta g`, `I_1 = int_delta^{2 delta} g - (e^{lambda_1 delta} + e^{lambda_2 delta} - theta) I_0`
/// and `S = (theta^n + n (1 - theta) - 1) / (1 - theta)^2`, where `Theta(z) = 1 - theta z`.
pub fn carma2_error_closed_form(model: &CarmaModel, delta: f64, t: f64) -> Result<f64> {
    check_carma2(model)?;
    model.ensure_valid()?;
    let arma = SampledArma::exact(model, delta)?;
    let theta = -arma.theta[1];
    let n = (t / delta + 1e-9).floor();
    let res = model.residues()?;
    let lam = model.ar_roots();
    let s = model.sigma();
    let int = |a: f64, b: f64| -> f64 {
        s * res
            .iter()
            .zip(lam)
            .map(|(r, l)| r * ((l * b).exp() - (l * a).exp()) / l)
            .sum::<num_complex::Complex64>()
            .re
    };
    let i0 = int(0.0, delta);
    let e_sum: f64 = lam.iter().map(|l| (l * delta).exp().re).sum();
    let i1 = int(delta, 2.0 * delta) - (e_sum - theta) * i0;
    let sum = (theta.powf(n) + n * (1.0 - theta) - 1.0) / (1.0 - theta).powi(2);
    let c = delta.sqrt() / arma.sigma2_delta.sqrt();
    Ok(2.0 * n * delta - 2.0 * c * (n * i0 + sum * i1))
}

/// `delta -> 0` limit of [`carma2_error_closed_form`]: zero for `q = 0`, otherwise
/// `2 (e^{-sgn(b) b t} + sgn(b) b t - 1)(sgn(b) - 1) / b` with `b = mu_1`.
pub fn carma2_error_limit(model: &CarmaModel, t: f64) -> Result<f64> {
    check_carma2(model)?;
    if model.q() == 0 {
        return Ok(0.0);
    }
    let b = model.ma_mu()[0].re;
    if b == 0.0 {
        return Err(CarmaError::NotInvertible);
    }
    let sg = b.signum();
    Ok(2.0 * ((-sg * b * t).exp() + sg * b * t - 1.0) * (sg - 1.0) / b)
}

/// Where the AR part comes from when estimating the kernel from data.
#[derive(Debug, Clone, PartialEq)]
pub enum ArSource {
    /// `Phi` coefficients in ascending powers with `phi[0] = 1`.
    Known(Vec<f64>),
    /// Modified Yule-Walker equations at lags `p..2p-1` for the given order `p`.
    YuleWalker(usize),
}

#[derive(Debug, Clone, Copy)]
pub enum KernelSource<'a> {
    Theoretical(&'a CarmaModel),
    Empirical(&'a PathGrid, &'a ArSource),
}

/// Sample autocovariances with divisor `n` at lags `0..lags`.
pub fn sample_autocovariance(x: &[f64], lags: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    (0..lags)
        .map(|k| {
            if k >= n {
                return 0.0;
            }
            x[..n - k]
                .iter()
                .zip(&x[k..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// `gamma(k) + sum_i phi_i gamma(k - i) = 0` for `k = p..2p-1`.
pub fn modified_yule_walker(gamma: &[f64], p: usize) -> Result<Vec<f64>> {
    if gamma.len() < 2 * p {
        return Err(CarmaError::InsufficientData(format!(
            "need {} autocovariances, got {}",
            2 * p,
            gamma.len()
        )));
    }
    let g = |k: i64| gamma[k.unsigned_abs() as usize];
    let a = DMatrix::from_fn(p, p, |r, c| g((p + r) as i64 - (c + 1) as i64));
    let rhs = DVector::from_fn(p, |r, _| -g((p + r) as i64));
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| CarmaError::Numeric("singular Yule-Walker system".into()))?;
    let mut phi = vec![1.0];
    phi.extend(sol.iter());
    Ok(phi)
}

/// The sampled ARMA behind the kernel estimate.
pub fn kernel_arma(source: KernelSource<'_>, delta: f64) -> Result<SampledArma> {
    match source {
        KernelSource::Theoretical(model) => SampledArma::exact(model, delta),
        KernelSource::Empirical(path, ar) => {
            if (path.delta - delta).abs() > 1e-12 * delta {
                return Err(CarmaError::DimensionMismatch("path step differs from delta".into()));
            }
            let phi = match ar {
                ArSource::Known(phi) => phi.clone(),
                ArSource::YuleWalker(p) => {
                    modified_yule_walker(&sample_autocovariance(&path.y_values, 2 * p), *p)?
                }
            };
            let p = phi.len() - 1;
            let y = &path.y_values;
            if y.len() <= 2 * p {
                return Err(CarmaError::InsufficientData("path too short".into()));
            }
            let u: Vec<f64> = (p..y.len())
                .map(|n| phi.iter().enumerate().map(|(i, f)| f * y[n - i]).sum())
                .collect();
            let (theta, sigma2_delta) = spectral_factorize(&sample_autocovariance(&u, p.max(1)))?;
            let mut theta = theta;
            theta.resize(p.max(1), 0.0);
            Ok(SampledArma {
                delta,
                phi,
                theta,
                sigma2_delta,
                provenance: Provenance::Empirical,
            })
        }
    }
}

/// `(sigma_delta / sqrt(delta)) psi_j` for `j = 0..n`.
pub fn kernel_on_lattice(arma: &SampledArma, n: usize) -> Vec<f64> {
    let c = (arma.sigma2_delta / arma.delta).sqrt();
    wold_coefficients(arma, n).into_iter().map(|p| c * p).collect()
}

/// `g^(t)` on `t_grid`.
pub fn estimate_kernel(source: KernelSource<'_>, delta: f64, t_grid: &[f64]) -> Result<Vec<f64>> {
    let arma = kernel_arma(source, delta)?;
    let idx: Vec<usize> = t_grid
        .iter()
        .map(|&t| {
            if t < 0.0 {
                Err(CarmaError::InvalidParameter(format!("negative time {t}")))
            } else {
                Ok((t / delta + 1e-9).floor() as usize)
            }
        })
        .collect::<Result<_>>()?;
    let n = idx.iter().max().map_or(0, |m| m + 1);
    let lattice = kernel_on_lattice(&arma, n);
    Ok(idx.iter().map(|&j| lattice[j]).collect())
}

/// Largest `|g^(j delta) - g(delta (j + h))| / |g(delta (j + h))|` over `j < n`, in
/// theoretical mode.
pub fn max_relative_kernel_error(model: &CarmaModel, delta: f64, h: f64, n: usize) -> Result<f64> {
    let arma = SampledArma::exact(model, delta)?;
    let ghat = kernel_on_lattice(&arma, n);
    Ok(ghat
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let g = model.kernel(delta * (j as f64 + h));
            (e - g).abs() / g.abs()
        })
        .fold(0.0, f64::max))
}
