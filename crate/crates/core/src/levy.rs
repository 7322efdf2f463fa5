//! Driving-noise increments and sampled CARMA paths.
//!
//! Every driver is normalized so that `L_1` has mean 0 and variance 1, hence an increment
//! over a step `d` has mean 0 and variance `d`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CarmaError, Result};
use crate::linalg::{expm, gauss_legendre, psd_sqrt};
use crate::model::CarmaModel;

/// Default subgrid factor for jump drivers.
pub const DEFAULT_JUMP_SUBGRID: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Driver {
    BrownianMotion,
    /// Jumps `N(0, 1/rate)` arriving at Poisson rate `rate`.
    CompoundPoissonNormal { rate: f64 },
    /// Centered and rescaled gamma process with unit-time shape and scale.
    GammaCentered { shape: f64, scale: f64 },
    /// Brownian motion time-changed by a gamma subordinator with variance rate `nu`.
    VarianceGamma { nu: f64 },
}

impl Driver {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: f64| {
            Err(CarmaError::InvalidParameter(format!(
                "{name} must be positive and finite, got {v}"
            )))
        };
        match *self {
            Driver::BrownianMotion => Ok(()),
            Driver::CompoundPoissonNormal { rate } if !(rate > 0.0 && rate.is_finite()) => {
                bad("rate", rate)
            }
            Driver::GammaCentered { shape, .. } if !(shape > 0.0 && shape.is_finite()) => {
                bad("shape", shape)
            }
            Driver::GammaCentered { scale, .. } if !(scale > 0.0 && scale.is_finite()) => {
                bad("scale", scale)
            }
            Driver::VarianceGamma { nu } if !(nu > 0.0 && nu.is_finite()) => bad("nu", nu),
            _ => Ok(()),
        }
    }

    pub fn is_brownian(&self) -> bool {
        matches!(self, Driver::BrownianMotion)
    }

    /// Subgrid factor used by default when simulating paths driven by `self`.
    pub fn default_subgrid(&self) -> usize {
        if self.is_brownian() {
            1
        } else {
            DEFAULT_JUMP_SUBGRID
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Driver::BrownianMotion => "brownian",
            Driver::CompoundPoissonNormal { .. } => "compound_poisson",
            Driver::GammaCentered { .. } => "gamma",
            Driver::VarianceGamma { .. } => "variance_gamma",
        }
    }
}

/// Increments of the driver on a grid of step `delta`.
///
/// `values` holds `n * subgrid_factor` increments over the finer step
/// `delta / subgrid_factor`; [`IncrementSeries::coarse_values`] aggregates them back to
/// the `delta` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementSeries {
    pub delta: f64,
    pub values: Vec<f64>,
    pub driver: Driver,
    pub seed: u64,
    pub stream: u64,
    pub subgrid_factor: usize,
}

impl IncrementSeries {
    /// Number of coarse steps.
    pub fn len(&self) -> usize {
        self.values.len() / self.subgrid_factor
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn fine_step(&self) -> f64 {
        self.delta / self.subgrid_factor as f64
    }

    pub fn coarse_values(&self) -> Vec<f64> {
        self.values
            .chunks_exact(self.subgrid_factor)
            .map(|c| c.iter().sum())
            .collect()
    }

    /// RNG for auxiliary draws tied to this series (initial states, Brownian state noise).
    pub fn auxiliary_rng(&self) -> ChaCha8Rng {
        rng_for(self.seed, 2 * self.stream + 1)
    }
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` increments at native resolution on the `delta` grid.
pub fn generate_increments(driver: Driver, seed: u64, delta: f64, n: usize) -> Result<IncrementSeries> {
    generate_subgrid(driver, seed, 0, delta, n, 1)
}

/// `n` coarse steps of size `delta`, each split into `m` subgrid increments.
///
/// `stream` selects an independent RNG stream under the same master seed, so that path
/// `k` of a Monte Carlo study is reproducible regardless of evaluation order.
pub fn generate_subgrid(
    driver: Driver,
    seed: u64,
    stream: u64,
    delta: f64,
    n: usize,
    m: usize,
) -> Result<IncrementSeries> {
    driver.validate()?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(CarmaError::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if n == 0 || m == 0 {
        return Err(CarmaError::InvalidParameter("n and subgrid factor must be at least 1".into()));
    }
    let step = delta / m as f64;
    let total = n * m;
    let mut rng = rng_for(seed, 2 * stream);
    let values = sample(driver, step, total, &mut rng)?;
    Ok(IncrementSeries {
        delta,
        values,
        driver,
        seed,
        stream,
        subgrid_factor: m,
    })
}

fn sample(driver: Driver, step: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let numeric = |e: &dyn std::fmt::Display| CarmaError::InvalidParameter(e.to_string());
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
    Ok(match driver {
        Driver::BrownianMotion => {
            let s = step.sqrt();
            (0..n).map(|_| s * normal(rng)).collect()
        }
        Driver::CompoundPoissonNormal { rate } => {
            let pois = Poisson::new(rate * step).map_err(|e| numeric(&e))?;
            let jump_sd = (1.0 / rate).sqrt();
            (0..n)
                .map(|_| {
                    let k: f64 = pois.sample(rng);
                    if k == 0.0 {
                        0.0
                    } else {
                        jump_sd * k.sqrt() * normal(rng)
                    }
                })
                .collect()
        }
        Driver::GammaCentered { shape, scale } => {
            let g = Gamma::new(shape * step, scale).map_err(|e| numeric(&e))?;
            let mean = shape * step * scale;
            let sd = scale * shape.sqrt();
            (0..n).map(|_| (g.sample(rng) - mean) / sd).collect()
        }
        Driver::VarianceGamma { nu } => {
            let g = Gamma::new(step / nu, nu).map_err(|e| numeric(&e))?;
            (0..n)
                .map(|_| {
                    let t: f64 = g.sample(rng);
                    t.sqrt() * normal(rng)
                })
                .collect()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "steps", rename_all = "snake_case")]
pub enum InitialState {
    Zero,
    /// Draw `X_0` from the stationary second-order law.
    StationaryGaussian,
    /// Start from zero and discard the first `k` outputs (default when `None`).
    BurnIn(Option<usize>),
}

/// `ceil(20 / (min_j |Re lambda_j| * delta))`.
pub fn default_burn_in(model: &CarmaModel, delta: f64) -> usize {
    let slowest = model
        .ar_roots()
        .iter()
        .map(|z| z.re.abs())
        .fold(f64::INFINITY, f64::min);
    (20.0 / (slowest * delta)).ceil() as usize
}

/// Sampled path on the `delta` grid.
///
/// `y_values[i]` is observed right after coarse increment `burn_in + i`, i.e. at time
/// `(burn_in + i + 1) * delta`. `x_states`, when kept, are states of
/// `dX = A X dt + sigma e_p dL`, so `y = b^T x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    pub delta: f64,
    pub y_values: Vec<f64>,
    pub x_states: Option<Vec<Vec<f64>>>,
    pub increments: IncrementSeries,
    pub burn_in: usize,
}

impl PathGrid {
    pub fn len(&self) -> usize {
        self.y_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_values.is_empty()
    }

    /// Coarse increments aligned with `y_values`.
    pub fn aligned_increments(&self) -> Vec<f64> {
        let c = self.increments.coarse_values();
        c[self.burn_in..self.burn_in + self.y_values.len()].to_vec()
    }

    /// CSV with columns `index, t, y, [x0 .. x{p-1}], increment`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let inc = self.aligned_increments();
        let p = self.x_states.as_ref().and_then(|x| x.first()).map_or(0, Vec::len);
        let mut header = String::from("index,t,y");
        for k in 0..p {
            header.push_str(&format!(",x{k}"));
        }
        header.push_str(",increment");
        writeln!(w, "{header}")?;
        for (i, y) in self.y_values.iter().enumerate() {
            let t = (self.burn_in + i + 1) as f64 * self.delta;
            write!(w, "{i},{t},{y}")?;
            if let Some(xs) = &self.x_states {
                for v in &xs[i] {
                    write!(w, ",{v}")?;
                }
            }
            writeln!(w, ",{}", inc[i])?;
        }
        Ok(())
    }
}

/// Discretization of the state equation over one subgrid step.
#[derive(Debug, Clone)]
struct Stepper {
    p: usize,
    /// `exp(A d)` row-major.
    transition: Vec<f64>,
    kind: StepKind,
}

#[derive(Debug, Clone)]
enum StepKind {
    /// Exact Gaussian step conditioned on the recorded increment:
    /// `xi = mean_dir * dW / d + chol * N(0, I)`.
    Brownian { mean_dir: Vec<f64>, chol: Vec<f64> },
    /// Midpoint Euler: `xi = exp(A d / 2) e_p dL`.
    Jump { weight: Vec<f64> },
}

impl Stepper {
    fn new(a: &DMatrix<f64>, step: f64, brownian: bool) -> Self {
        let p = a.nrows();
        let f = expm(&(a * step));
        let transition = row_major(&f);
        let kind = if brownian {
            let (mean_dir, cov) = conditional_noise(a, step);
            StepKind::Brownian {
                mean_dir: mean_dir.iter().copied().collect(),
                chol: row_major(&psd_sqrt(&cov)),
            }
        } else {
            let half = expm(&(a * (0.5 * step)));
            StepKind::Jump {
                weight: half.column(p - 1).iter().copied().collect(),
            }
        };
        Self { p, transition, kind }
    }

    #[inline]
    fn advance(&self, x: &mut [f64], tmp: &mut [f64], dl: f64, step: f64, rng: &mut ChaCha8Rng) {
        let p = self.p;
        for i in 0..p {
            let row = &self.transition[i * p..(i + 1) * p];
            tmp[i] = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        }
        match &self.kind {
            StepKind::Jump { weight } => {
                for i in 0..p {
                    x[i] = tmp[i] + weight[i] * dl;
                }
            }
            StepKind::Brownian { mean_dir, chol } => {
                let r = dl / step;
                for i in 0..p {
                    x[i] = tmp[i] + mean_dir[i] * r;
                }
                for j in 0..p {
                    let z: f64 = rng.sample(StandardNormal);
                    for i in 0..p {
                        x[i] += chol[i * p + j] * z;
                    }
                }
            }
        }
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    (0..r).flat_map(|i| (0..c).map(move |j| m[(i, j)])).collect()
}

/// For `xi = int_0^d exp(A u) e_p dW_u` and `dW = W_d - W_0`, returns
/// `c = Cov(xi, dW) = int_0^d exp(A u) e_p du` and the conditional covariance
/// `Cov(xi | dW) = int_0^d (v(u) - c/d)(v(u) - c/d)^T du`, `v(u) = exp(A u) e_p`.
pub fn conditional_noise(a: &DMatrix<f64>, step: f64) -> (DVector<f64>, DMatrix<f64>) {
    let p = a.nrows();
    let (nodes, weights) = gauss_legendre(24);
    let half = 0.5 * step;
    let vs: Vec<DVector<f64>> = nodes
        .iter()
        .map(|&x| expm(&(a * (half * (x + 1.0)))).column(p - 1).into_owned())
        .collect();
    let mut c = DVector::zeros(p);
    for (v, &w) in vs.iter().zip(&weights) {
        c += v * (w * half);
    }
    let mean = &c / step;
    let mut cov = DMatrix::zeros(p, p);
    for (v, &w) in vs.iter().zip(&weights) {
        let d = v - &mean;
        cov += &d * d.transpose() * (w * half);
    }
    (c, (&cov + cov.transpose()) * 0.5)
}

pub fn simulate_path(model: &CarmaModel, increments: IncrementSeries, init: InitialState) -> Result<PathGrid> {
    simulate(model, increments, init, false)
}

pub fn simulate_path_with_states(
    model: &CarmaModel,
    increments: IncrementSeries,
    init: InitialState,
) -> Result<PathGrid> {
    simulate(model, increments, init, true)
}

fn simulate(
    model: &CarmaModel,
    increments: IncrementSeries,
    init: InitialState,
    keep_states: bool,
) -> Result<PathGrid> {
    model.ensure_valid()?;
    if !increments.values.len().is_multiple_of(increments.subgrid_factor) {
        return Err(CarmaError::DimensionMismatch(
            "increment count is not a multiple of the subgrid factor".into(),
        ));
    }
    let n = increments.len();
    let burn_in = match init {
        InitialState::BurnIn(k) => k.unwrap_or_else(|| default_burn_in(model, increments.delta)),
        _ => 0,
    };
    if burn_in >= n {
        return Err(CarmaError::InsufficientData(format!(
            "burn-in of {burn_in} steps needs more than {n} increments"
        )));
    }
    let p = model.p();
    let sigma = model.sigma();
    let m = increments.subgrid_factor;
    let step = increments.fine_step();
    let stepper = Stepper::new(model.companion(), step, increments.driver.is_brownian());
    let b = model.b_coefficients().to_vec();
    let mut aux = increments.auxiliary_rng();

    // Unscaled state X; outputs are scaled by sigma.
    let mut x = vec![0.0; p];
    if init == InitialState::StationaryGaussian {
        let s = psd_sqrt(&model.stationary_state_covariance()?);
        let z: Vec<f64> = (0..p).map(|_| aux.sample(StandardNormal)).collect();
        for i in 0..p {
            x[i] = (0..p).map(|j| s[(i, j)] * z[j]).sum();
        }
    }
    let mut tmp = vec![0.0; p];
    let mut y_values = Vec::with_capacity(n - burn_in);
    let mut states = keep_states.then(|| Vec::with_capacity(n - burn_in));
    for k in 0..n {
        for &dl in &increments.values[k * m..(k + 1) * m] {
            stepper.advance(&mut x, &mut tmp, dl, step, &mut aux);
        }
        if k >= burn_in {
            let y: f64 = b.iter().zip(&x).map(|(bi, xi)| bi * xi).sum();
            y_values.push(sigma * y);
            if let Some(s) = states.as_mut() {
                s.push(x.iter().map(|v| sigma * v).collect());
            }
        }
    }
    Ok(PathGrid {
        delta: increments.delta,
        y_values,
        x_states: states,
        increments,
        burn_in,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drivers_reject_bad_parameters() {
        for d in [
            Driver::CompoundPoissonNormal { rate: 0.0 },
            Driver::GammaCentered { shape: -1.0, scale: 1.0 },
            Driver::GammaCentered { shape: 1.0, scale: 0.0 },
            Driver::VarianceGamma { nu: f64::NAN },
        ] {
            assert!(generate_increments(d, 1, 0.1, 10).is_err());
        }
        assert!(generate_increments(Driver::BrownianMotion, 1, 0.0, 10).is_err());
        assert!(generate_increments(Driver::BrownianMotion, 1, 0.1, 0).is_err());
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a = generate_subgrid(Driver::BrownianMotion, 7, 0, 0.1, 100, 1).unwrap();
        let b = generate_subgrid(Driver::BrownianMotion, 7, 1, 0.1, 100, 1).unwrap();
        let a2 = generate_subgrid(Driver::BrownianMotion, 7, 0, 0.1, 100, 1).unwrap();
        assert_eq!(a, a2);
        assert_ne!(a.values, b.values);
    }

    #[test]
    fn coarse_values_sum_subgrid() {
        let s = generate_subgrid(Driver::VarianceGamma { nu: 0.5 }, 3, 0, 0.5, 4, 8).unwrap();
        assert_eq!(s.values.len(), 32);
        let c = s.coarse_values();
        assert_eq!(c.len(), 4);
        assert!((c[1] - s.values[8..16].iter().sum::<f64>()).abs() < 1e-15);
    }

    #[test]
    fn conditional_noise_matches_van_loan_split() {
        use crate::linalg::van_loan_integral;
        let m = CarmaModel::from_real(&[-0.7, -1.2, -2.6], &[], 1.0).unwrap();
        let a = m.companion();
        let d = 0.3;
        let (c, cond) = conditional_noise(a, d);
        let e = m.e_p();
        let q = van_loan_integral(a, &(&e * e.transpose()), d);
        let want = &q - &c * c.transpose() / d;
        assert!((&cond - &want).amax() < 1e-12);
    }

    #[test]
    fn zero_increments_give_deterministic_decay() {
        let m = CarmaModel::from_real(&[-0.7, -1.2], &[3.0], 1.0).unwrap();
        let inc = IncrementSeries {
            delta: 0.1,
            values: vec![0.0; 50],
            driver: Driver::CompoundPoissonNormal { rate: 1.0 },
            seed: 0,
            stream: 0,
            subgrid_factor: 1,
        };
        let path = simulate_path(&m, inc, InitialState::Zero).unwrap();
        assert!(path.y_values.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn states_reproduce_output() {
        let m = CarmaModel::from_real(&[-0.7, -1.2], &[3.0], 2.0).unwrap();
        let inc = generate_subgrid(Driver::GammaCentered { shape: 2.0, scale: 1.0 }, 5, 0, 0.1, 200, 4).unwrap();
        let path = simulate_path_with_states(&m, inc, InitialState::BurnIn(Some(20))).unwrap();
        assert_eq!(path.len(), 180);
        let xs = path.x_states.as_ref().unwrap();
        for (y, x) in path.y_values.iter().zip(xs) {
            let want: f64 = m.b_coefficients().iter().zip(x).map(|(b, v)| b * v).sum();
            assert!((y - want).abs() < 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn burn_in_longer_than_path_is_rejected() {
        let m = CarmaModel::from_real(&[-1.0], &[], 1.0).unwrap();
        let inc = generate_increments(Driver::BrownianMotion, 1, 0.1, 10).unwrap();
        assert!(matches!(
            simulate_path(&m, inc, InitialState::BurnIn(None)),
            Err(CarmaError::InsufficientData(_))
        ));
        assert_eq!(default_burn_in(&m, 0.1), 200);
    }

    #[test]
    fn invalid_model_is_rejected() {
        let m = CarmaModel::from_real(&[0.5], &[], 1.0).unwrap();
        let inc = generate_increments(Driver::BrownianMotion, 1, 0.1, 10).unwrap();
        assert!(matches!(
            simulate_path(&m, inc, InitialState::Zero),
            Err(CarmaError::InvalidModel(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let m = CarmaModel::from_real(&[-1.0, -2.0], &[], 1.0).unwrap();
        let inc = generate_increments(Driver::BrownianMotion, 1, 0.5, 3).unwrap();
        let path = simulate_path_with_states(&m, inc, InitialState::Zero).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,t,y,x0,x1,increment");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,0.5,"));
    }
}
