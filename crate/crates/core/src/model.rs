//! Continuous-time CARMA(p, q) models parametrized by their roots.
//!
//! The autoregressive polynomial is `a(z) = prod (z - lambda_i)` and the moving-average
//! polynomial is `b(z) = prod (z + mu_j)`, so `b` has leading coefficient `b_q = 1`. The
//! state-space form uses the companion matrix `A` of `a`, the vector `b = (b_0, ..,
//! b_{p-1})` and the last unit vector `e_p`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CarmaError, Result};
use crate::linalg::{expm, solve_lyapunov};
use crate::poly;

const CONJUGATE_TOL: f64 = 1e-12;
const DISTINCT_TOL: f64 = 1e-8;
const COMMON_ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CarmaModel {
    ar_roots: Vec<Complex64>,
    ma_mu: Vec<Complex64>,
    sigma: f64,
    a_coeffs: Vec<f64>,
    b_coeffs: Vec<f64>,
    companion: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `Re(lambda) >= 0`.
    NonCausal { index: usize, root: Complex64 },
    /// `Re(mu) = 0`: the sampled MA part cannot be invertible.
    MaRootOnImaginaryAxis { index: usize, mu: Complex64 },
    /// `a` and `b` share the root `lambda_i = -mu_j`.
    CommonRoot { ar_index: usize, ma_index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonCausal { index, root } => {
                write!(f, "AR root {index} = {root} has non-negative real part")
            }
            Violation::MaRootOnImaginaryAxis { index, mu } => {
                write!(f, "MA parameter mu_{index} = {mu} has zero real part")
            }
            Violation::CommonRoot { ar_index, ma_index } => {
                write!(f, "AR root {ar_index} cancels MA root {ma_index}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_causality_violation(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::NonCausal { .. }))
    }

    pub fn has_unit_axis_ma_root(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::MaRootOnImaginaryAxis { .. }))
    }

    pub fn has_common_root(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::CommonRoot { .. }))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl CarmaModel {
    /// Builds a model from AR roots `lambda`, MA parameters `mu` (the MA roots are `-mu`)
    /// and scale `sigma`. Complex roots must come in conjugate pairs.
    pub fn new(ar_roots: Vec<Complex64>, ma_mu: Vec<Complex64>, sigma: f64) -> Result<Self> {
        let (p, q) = (ar_roots.len(), ma_mu.len());
        if p == 0 || q >= p {
            return Err(CarmaError::InvalidOrders { p, q });
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(CarmaError::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if ar_roots.iter().chain(&ma_mu).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CarmaError::InvalidParameter("non-finite root".into()));
        }
        let ar_roots = conjugate_closed(&ar_roots)?;
        let ma_mu = conjugate_closed(&ma_mu)?;

        let a_asc = poly::real_coefficients(&poly::monic_from_roots(&ar_roots), 1e-10)?;
        let neg_mu: Vec<Complex64> = ma_mu.iter().map(|m| -m).collect();
        let b_asc = poly::real_coefficients(&poly::monic_from_roots(&neg_mu), 1e-10)?;

        // a(z) = z^p + a_1 z^{p-1} + ... + a_p
        let a_coeffs: Vec<f64> = (1..=p).map(|k| a_asc[p - k]).collect();
        let mut b_coeffs = vec![0.0; p];
        b_coeffs[..=q].copy_from_slice(&b_asc);

        let mut companion = DMatrix::<f64>::zeros(p, p);
        for i in 0..p - 1 {
            companion[(i, i + 1)] = 1.0;
        }
        for j in 0..p {
            companion[(p - 1, j)] = -a_coeffs[p - 1 - j];
        }

        Ok(Self {
            ar_roots,
            ma_mu,
            sigma,
            a_coeffs,
            b_coeffs,
            companion,
        })
    }

    /// Convenience constructor for purely real roots.
    pub fn from_real(ar_roots: &[f64], ma_mu: &[f64], sigma: f64) -> Result<Self> {
        Self::new(
            ar_roots.iter().map(|&r| Complex64::new(r, 0.0)).collect(),
            ma_mu.iter().map(|&m| Complex64::new(m, 0.0)).collect(),
            sigma,
        )
    }

    /// Like [`CarmaModel::new`] but also refuses models whose validation report is not empty.
    pub fn validated(ar_roots: Vec<Complex64>, ma_mu: Vec<Complex64>, sigma: f64) -> Result<Self> {
        let m = Self::new(ar_roots, ma_mu, sigma)?;
        m.ensure_valid()?;
        Ok(m)
    }

    pub fn p(&self) -> usize {
        self.ar_roots.len()
    }

    pub fn q(&self) -> usize {
        self.ma_mu.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn ar_roots(&self) -> &[Complex64] {
        &self.ar_roots
    }

    pub fn ma_mu(&self) -> &[Complex64] {
        &self.ma_mu
    }

    /// `a_1, .., a_p`.
    pub fn a_coefficients(&self) -> &[f64] {
        &self.a_coeffs
    }

    /// `b_0, .., b_{p-1}`.
    pub fn b_coefficients(&self) -> &[f64] {
        &self.b_coeffs
    }

    pub fn companion(&self) -> &DMatrix<f64> {
        &self.companion
    }

    pub fn b_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.b_coeffs)
    }

    pub fn e_p(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.p());
        e[self.p() - 1] = 1.0;
        e
    }

    /// `a(z)` in ascending order (monic, degree p).
    pub fn a_polynomial(&self) -> Vec<f64> {
        let mut c: Vec<f64> = self.a_coeffs.iter().rev().copied().collect();
        c.push(1.0);
        c
    }

    /// `b(z)` in ascending order, trimmed to degree q.
    pub fn b_polynomial(&self) -> Vec<f64> {
        self.b_coeffs[..=self.q()].to_vec()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for (index, &root) in self.ar_roots.iter().enumerate() {
            if root.re >= 0.0 {
                violations.push(Violation::NonCausal { index, root });
            }
        }
        for (index, &mu) in self.ma_mu.iter().enumerate() {
            if mu.re == 0.0 {
                violations.push(Violation::MaRootOnImaginaryAxis { index, mu });
            }
        }
        for (ar_index, &lam) in self.ar_roots.iter().enumerate() {
            for (ma_index, &mu) in self.ma_mu.iter().enumerate() {
                let scale = lam.norm().max(mu.norm()).max(1.0);
                if (lam + mu).norm() <= COMMON_ROOT_TOL * scale {
                    violations.push(Violation::CommonRoot { ar_index, ma_index });
                }
            }
        }
        ValidationReport { violations }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_empty() {
            Ok(())
        } else {
            Err(CarmaError::InvalidModel(report))
        }
    }

    /// Continuous-time invertibility: every `Re(mu_j) > 0`.
    pub fn is_invertible(&self) -> bool {
        self.ma_mu.iter().all(|m| m.re > 0.0)
    }

    pub fn has_distinct_ar_roots(&self) -> bool {
        let r = &self.ar_roots;
        let scale = r.iter().map(|z| z.norm()).fold(1.0, f64::max);
        (0..r.len()).all(|i| (i + 1..r.len()).all(|j| (r[i] - r[j]).norm() > DISTINCT_TOL * scale))
    }

    pub fn ensure_distinct_ar_roots(&self) -> Result<()> {
        if self.has_distinct_ar_roots() {
            Ok(())
        } else {
            Err(CarmaError::DistinctRootsRequired)
        }
    }

    pub fn eval_a(&self, z: Complex64) -> Complex64 {
        self.ar_roots.iter().fold(Complex64::new(1.0, 0.0), |acc, &l| acc * (z - l))
    }

    pub fn eval_b(&self, z: Complex64) -> Complex64 {
        self.ma_mu.iter().fold(Complex64::new(1.0, 0.0), |acc, &m| acc * (z + m))
    }

    /// `a'(lambda_l)` for the l-th AR root.
    pub fn a_prime_at_root(&self, l: usize) -> Complex64 {
        let lam = self.ar_roots[l];
        self.ar_roots
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != l)
            .fold(Complex64::new(1.0, 0.0), |acc, (_, &r)| acc * (lam - r))
    }

    /// Residues `b(lambda_l) / a'(lambda_l)` of `b/a`.
    pub fn residues(&self) -> Result<Vec<Complex64>> {
        self.ensure_distinct_ar_roots()?;
        Ok((0..self.p())
            .map(|l| self.eval_b(self.ar_roots[l]) / self.a_prime_at_root(l))
            .collect())
    }

    /// Kernel `g(t) = sigma b^T exp(A t) e_p` for `t > 0`, zero otherwise.
    pub fn kernel(&self, t: f64) -> f64 {
        self.kernel_matrix(t)
    }

    /// Matrix-exponential evaluation of the kernel; valid for repeated roots.
    pub fn kernel_matrix(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let e = expm(&(&self.companion * t));
        let last = self.p() - 1;
        self.sigma
            * self
                .b_coeffs
                .iter()
                .enumerate()
                .map(|(i, &bi)| bi * e[(i, last)])
                .sum::<f64>()
    }

    /// Residue-sum evaluation of the kernel; needs distinct AR roots.
    pub fn kernel_residue(&self, t: f64) -> Result<f64> {
        let res = self.residues()?;
        if t <= 0.0 {
            return Ok(0.0);
        }
        let s: Complex64 = res
            .iter()
            .zip(&self.ar_roots)
            .map(|(r, &l)| r * (l * t).exp())
            .sum();
        Ok(self.sigma * s.re)
    }

    /// Fourier transform of the kernel, `sigma b(-i w) / a(-i w)`.
    pub fn transfer(&self, omega: f64) -> Complex64 {
        let z = Complex64::new(0.0, -omega);
        self.eval_b(z) / self.eval_a(z) * self.sigma
    }

    /// Spectral density of `Y` for a unit-variance driver.
    pub fn spectral_density(&self, omega: f64) -> f64 {
        self.transfer(omega).norm_sqr() / (2.0 * std::f64::consts::PI)
    }

    /// Stationary covariance of the state, solving `A S + S A^T = -e_p e_p^T`.
    pub fn stationary_state_covariance(&self) -> Result<DMatrix<f64>> {
        let e = self.e_p();
        solve_lyapunov(&self.companion, &(&e * e.transpose()))
    }

    /// `gamma_Y(t) = Cov(Y_s, Y_{s+t})`.
    ///
    /// Closed-form residue sum for distinct roots, otherwise
    /// `sigma^2 b^T exp(A|t|) S b` with the stationary state covariance `S`.
    pub fn autocovariance(&self, t: f64) -> f64 {
        let t = t.abs();
        if self.has_distinct_ar_roots() {
            let s2 = self.sigma * self.sigma;
            let s: Complex64 = (0..self.p())
                .map(|l| {
                    let lam = self.ar_roots[l];
                    self.eval_b(lam) * self.eval_b(-lam)
                        / (self.a_prime_at_root(l) * self.eval_a(-lam))
                        * (lam * t).exp()
                })
                .sum();
            return s2 * s.re;
        }
        self.autocovariance_lyapunov(t)
            .expect("Lyapunov operator is regular for causal models")
    }

    pub fn autocovariance_lyapunov(&self, t: f64) -> Result<f64> {
        let s = self.stationary_state_covariance()?;
        let b = self.b_vector();
        let e = expm(&(&self.companion * t.abs()));
        Ok(self.sigma * self.sigma * (b.transpose() * e * s * b)[(0, 0)])
    }

    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec {
            p: self.p(),
            q: self.q(),
            ar_roots: self.ar_roots.iter().map(|z| [z.re, z.im]).collect(),
            ma_mu: self.ma_mu.iter().map(|z| [z.re, z.im]).collect(),
            sigma: self.sigma,
        }
    }
}

/// JSON form of a model: `{p, q, ar_roots: [[re, im], ..], ma_mu: [[re, im], ..], sigma}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub p: usize,
    pub q: usize,
    pub ar_roots: Vec<[f64; 2]>,
    #[serde(default)]
    pub ma_mu: Vec<[f64; 2]>,
    pub sigma: f64,
}

impl TryFrom<ModelSpec> for CarmaModel {
    type Error = CarmaError;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        if spec.ar_roots.len() != spec.p || spec.ma_mu.len() != spec.q {
            return Err(CarmaError::DimensionMismatch(format!(
                "declared (p, q) = ({}, {}) but got {} AR roots and {} MA parameters",
                spec.p,
                spec.q,
                spec.ar_roots.len(),
                spec.ma_mu.len()
            )));
        }
        let c = |v: &[f64; 2]| Complex64::new(v[0], v[1]);
        CarmaModel::new(
            spec.ar_roots.iter().map(c).collect(),
            spec.ma_mu.iter().map(c).collect(),
            spec.sigma,
        )
    }
}

impl From<&CarmaModel> for ModelSpec {
    fn from(m: &CarmaModel) -> Self {
        m.to_spec()
    }
}

fn conjugate_closed(roots: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out = roots.to_vec();
    let mut matched = vec![false; roots.len()];
    for i in 0..roots.len() {
        if matched[i] {
            continue;
        }
        let r = roots[i];
        let tol = CONJUGATE_TOL * r.norm().max(1.0);
        if r.im.abs() <= tol {
            out[i] = Complex64::new(r.re, 0.0);
            matched[i] = true;
            continue;
        }
        let partner = (0..roots.len())
            .find(|&j| j != i && !matched[j] && (roots[j] - r.conj()).norm() <= tol)
            .ok_or(CarmaError::NotConjugateClosed)?;
        matched[i] = true;
        matched[partner] = true;
        out[partner] = r.conj();
    }
    Ok(out)
}
