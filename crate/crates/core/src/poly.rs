//! Dense univariate polynomials stored in ascending order (`c[k]` multiplies `z^k`).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{CarmaError, Result};

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

pub fn mul_complex(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

pub fn eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
}

pub fn eval_complex(c: &[f64], z: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &ck| acc * z + ck)
}

pub fn eval_complex_coeffs(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &ck| acc * z + ck)
}

pub fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &ck)| k as f64 * ck)
        .collect()
}

/// Coefficients of `prod_i (z - r_i)`.
pub fn monic_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    roots.iter().fold(vec![Complex64::new(1.0, 0.0)], |acc, &r| {
        mul_complex(&acc, &[-r, Complex64::new(1.0, 0.0)])
    })
}

/// Coefficients of `prod_i (1 - c_i z)`.
pub fn one_minus_products(cs: &[Complex64]) -> Vec<Complex64> {
    cs.iter().fold(vec![Complex64::new(1.0, 0.0)], |acc, &c| {
        mul_complex(&acc, &[Complex64::new(1.0, 0.0), -c])
    })
}

/// Drops imaginary parts, which must be negligible relative to the largest coefficient.
pub fn real_coefficients(c: &[Complex64], tol: f64) -> Result<Vec<f64>> {
    let scale = c.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
    if c.iter().any(|z| z.im.abs() > tol * scale) {
        return Err(CarmaError::NotConjugateClosed);
    }
    Ok(c.iter().map(|z| z.re).collect())
}

/// Replaces each root with a near-conjugate partner by an exact conjugate pair and
/// snaps near-real roots onto the real axis.
pub fn symmetrize_conjugates(roots: &[Complex64], tol: f64) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = roots.to_vec();
    let mut used = vec![false; out.len()];
    for i in 0..out.len() {
        if used[i] {
            continue;
        }
        let r = out[i];
        let scale = r.norm().max(1.0);
        if r.im.abs() <= tol * scale {
            out[i] = Complex64::new(r.re, 0.0);
            used[i] = true;
            continue;
        }
        let partner = (0..out.len())
            .filter(|&j| j != i && !used[j])
            .min_by(|&a, &b| {
                let da = (out[a] - r.conj()).norm();
                let db = (out[b] - r.conj()).norm();
                da.total_cmp(&db)
            });
        used[i] = true;
        if let Some(j) = partner {
            if (out[j] - r.conj()).norm() <= tol.sqrt() * scale {
                let avg = (r + out[j].conj()) * 0.5;
                out[i] = avg;
                out[j] = avg.conj();
                used[j] = true;
            }
        }
    }
    out
}

/// All complex roots of a real polynomial, via the eigenvalues of its companion matrix
/// followed by a Newton polish on the original coefficients.
///
/// Exact-zero leading coefficients are dropped; exact-zero low-order coefficients
/// contribute roots at the origin.
pub fn roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let mut hi = coeffs.len();
    while hi > 0 && coeffs[hi - 1] == 0.0 {
        hi -= 1;
    }
    if hi == 0 {
        return Err(CarmaError::Numeric("zero polynomial has no finite root set".into()));
    }
    let c = &coeffs[..hi];
    let mut lo = 0;
    while c[lo] == 0.0 {
        lo += 1;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); lo];
    let reduced = &c[lo..];
    let degree = reduced.len() - 1;
    if degree == 0 {
        return Ok(out);
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(CarmaError::Numeric("non-finite polynomial coefficient".into()));
    }
    let lead = reduced[degree];
    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -reduced[i] / lead;
    }
    let eig = companion.complex_eigenvalues();
    let deriv = derivative(reduced);
    for z0 in eig.iter() {
        out.push(newton_polish(reduced, &deriv, *z0));
    }
    Ok(out)
}

fn newton_polish(c: &[f64], d: &[f64], mut z: Complex64) -> Complex64 {
    let mut best = eval_complex(c, z).norm();
    for _ in 0..8 {
        let dz = eval_complex(d, z);
        if dz.norm() == 0.0 {
            break;
        }
        let step = eval_complex(c, z) / dz;
        let candidate = z - step;
        let val = eval_complex(c, candidate).norm();
        if !(val < best) {
            break;
        }
        best = val;
        z = candidate;
        if step.norm() <= 1e-16 * z.norm() {
            break;
        }
    }
    z
}
