//! The functions `alpha_n(x)` defined by
//! `sinh(z) / (cosh(z) - 1 + x) = sum_k alpha_k(x) z^{2k+1}`,
//! written as `alpha_n(x) = P_n(x) / ((2n+1)! x^{n+1})` with monic integer `P_n`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{CarmaError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphaFunction {
    pub n: usize,
    /// Coefficients of `P_n` in ascending order.
    pub numerator: Vec<BigInt>,
}

impl AlphaFunction {
    /// `(2n+1)!`.
    pub fn normalization(&self) -> BigInt {
        factorial(2 * self.n + 1)
    }

    pub fn coefficients_f64(&self) -> Vec<f64> {
        self.numerator.iter().map(big_to_f64).collect()
    }

    /// `P_n(x)`.
    pub fn eval_numerator(&self, x: f64) -> f64 {
        self.coefficients_f64().iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `alpha_n(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_numerator(x) / big_to_f64(&self.normalization()) / x.powi(self.n as i32 + 1)
    }

    /// Exact `P_n(x)` at a rational point.
    pub fn eval_exact(&self, x: &BigRational) -> BigRational {
        self.numerator
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * x + BigRational::from_integer(c.clone()))
    }

    fn derivative_exact(&self, x: &BigRational) -> BigRational {
        self.numerator
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(BigRational::zero(), |acc, (k, c)| {
                acc * x + BigRational::from_integer(c * BigInt::from(k))
            })
    }
}

fn big_to_f64(b: &BigInt) -> f64 {
    b.to_f64().unwrap_or(f64::NAN)
}

pub fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

/// Stirling numbers of the second kind `S(n, k)` for `k = 0..=n`.
fn stirling2_row(n: usize) -> Vec<BigInt> {
    let mut row = vec![BigInt::one()];
    for m in 1..=n {
        let mut next = vec![BigInt::zero(); m + 1];
        for k in 1..=m {
            let stay = if k < m { &row[k] * BigInt::from(k) } else { BigInt::zero() };
            next[k] = stay + &row[k - 1];
        }
        row = next;
    }
    row
}

/// `P_n` from the second-order recursion
/// `P_{n+1} = (x-1)(x P' - m P) + (x-2)(x^2 P'' - 2 m x P' + m(m+1) P)`, `m = n + 1`.
pub fn alpha_by_recursion(n: usize) -> AlphaFunction {
    let mut p: Vec<BigInt> = vec![BigInt::one()];
    for step in 0..n {
        let m = BigInt::from(step + 1);
        let deg = p.len() - 1;
        // xP' - mP, and x^2 P'' - 2 m x P' + m(m+1) P, both of degree `deg`.
        let mut u = vec![BigInt::zero(); deg + 1];
        let mut v = vec![BigInt::zero(); deg + 1];
        for (k, c) in p.iter().enumerate() {
            let kk = BigInt::from(k);
            u[k] = c * (&kk - &m);
            v[k] = c * (&kk * (&kk - 1) - BigInt::from(2) * &m * &kk + &m * (&m + 1));
        }
        let mut next = vec![BigInt::zero(); deg + 2];
        for k in 0..=deg {
            next[k + 1] += &u[k] + &v[k];
            next[k] -= &u[k] + BigInt::from(2) * &v[k];
        }
        p = next;
    }
    AlphaFunction { n, numerator: p }
}

/// `P_0..P_n` from the power-series division of `sinh` by `cosh - 1 + x`, done in exact
/// rational arithmetic.
pub fn alpha_series_family(n: usize) -> Vec<AlphaFunction> {
    // alpha_k = Q_k / x^{k+1}, Q_k = x^k/(2k+1)! - sum_{j=1..k} Q_{k-j} x^{j-1}/(2j)!
    let mut qs: Vec<Vec<BigRational>> = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut q = vec![BigRational::zero(); k + 1];
        q[k] = BigRational::new(BigInt::one(), factorial(2 * k + 1));
        for j in 1..=k {
            let w = BigRational::new(BigInt::one(), factorial(2 * j));
            for (i, c) in qs[k - j].iter().enumerate() {
                q[i + j - 1] -= c * &w;
            }
        }
        qs.push(q);
    }
    qs.into_iter()
        .enumerate()
        .map(|(k, q)| {
            let scale = BigRational::from_integer(factorial(2 * k + 1));
            let numerator = q.iter().map(|c| integer_or_panic(&(c * &scale))).collect();
            AlphaFunction { n: k, numerator }
        })
        .collect()
}

pub fn alpha_by_series(n: usize) -> AlphaFunction {
    alpha_series_family(n).pop().expect("family has n + 1 members")
}

/// `P_n` from the explicit double sum over Stirling numbers of the second kind.
pub fn alpha_by_stirling(n: usize) -> AlphaFunction {
    let s = stirling2_row(2 * n + 1);
    let pow_m2 = |e: i64| -> BigRational {
        let base = BigRational::from_integer(BigInt::from(-2));
        if e >= 0 {
            num_traits::pow(base, e as usize)
        } else {
            num_traits::pow(base.recip(), (-e) as usize)
        }
    };
    let mut coeffs = vec![BigInt::zero(); n + 1];
    for j in 0..=n {
        let mut total = BigRational::zero();
        for k in j + 1..=n {
            let inner: BigInt = (j..=k)
                .map(|i| binomial(i + 1, j + 1) * binomial(2 * k, 2 * i + 1) - binomial(i, j + 1) * binomial(2 * k, 2 * i))
                .sum();
            let term = BigRational::from_integer(factorial(2 * k) * &s[2 * k] * inner);
            total += term * pow_m2(j as i64 + 1 - 2 * k as i64);
        }
        for k in j..=n {
            let inner: BigInt = (j..=k)
                .map(|i| {
                    binomial(i + 1, j + 1) * binomial(2 * k + 1, 2 * i + 1)
                        - binomial(i, j + 1) * binomial(2 * k + 1, 2 * i)
                })
                .sum();
            let term = BigRational::from_integer(factorial(2 * k + 1) * &s[2 * k + 1] * inner);
            total += term * pow_m2(j as i64 - 2 * k as i64);
        }
        coeffs[n - j] = integer_or_panic(&total);
    }
    AlphaFunction { n, numerator: coeffs }
}

fn integer_or_panic(r: &BigRational) -> BigInt {
    assert!(r.is_integer(), "non-integer coefficient {r}");
    r.to_integer()
}

/// `alpha_0(x), .., alpha_n(x)` evaluated in floating point from the series recursion
/// `x alpha_k + sum_{j=1..k} alpha_{k-j} / (2j)! = 1 / (2k+1)!`.
pub fn alpha_values(x: f64, n: usize) -> Vec<f64> {
    let inv_fact: Vec<f64> = {
        let mut v = vec![1.0; 2 * n + 2];
        for k in 1..v.len() {
            v[k] = v[k - 1] / k as f64;
        }
        v
    };
    let mut out: Vec<f64> = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let s: f64 = (1..=k).map(|j| out[k - j] * inv_fact[2 * j]).sum();
        out.push((inv_fact[2 * k + 1] - s) / x);
    }
    out
}

/// The `n` real roots of `P_n`, all in `(2, inf)`, in increasing order.
pub fn xi_roots(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let f = alpha_by_recursion(n);
    let sign = |x: f64| -> i32 {
        let v = f.eval_exact(&BigRational::from_float(x).expect("finite"));
        if v.is_zero() {
            0
        } else if v.is_positive() {
            1
        } else {
            -1
        }
    };

    let mut upper = 4.0_f64;
    while sign(upper) <= 0 || upper < bound(&f) {
        upper *= 2.0;
    }

    let mut points = 200 * n;
    let brackets = loop {
        let lo_log = (1e-9_f64).ln();
        let hi_log = (upper - 2.0).ln();
        let grid: Vec<f64> = (0..=points)
            .map(|i| 2.0 + (lo_log + (hi_log - lo_log) * i as f64 / points as f64).exp())
            .collect();
        let signs: Vec<i32> = grid.iter().map(|&x| sign(x)).collect();
        let mut br = Vec::new();
        for i in 0..points {
            if signs[i] == 0 {
                br.push((grid[i], grid[i]));
            } else if signs[i] * signs[i + 1] < 0 {
                br.push((grid[i], grid[i + 1]));
            }
        }
        if br.len() == n || points > 100_000 {
            break br;
        }
        points *= 4;
    };
    if brackets.len() != n {
        return Err(CarmaError::RootCount {
            expected: n,
            found: brackets.len(),
        });
    }

    let p0 = big_to_f64(&f.numerator[0]).abs();
    let mut roots = Vec::with_capacity(n);
    for (mut a, mut b) in brackets {
        let sa = sign(a);
        while b - a > 1e-13 * b {
            let mid = 0.5 * (a + b);
            let sm = sign(mid);
            if sm == 0 {
                a = mid;
                b = mid;
                break;
            }
            if sm == sa {
                a = mid;
            } else {
                b = mid;
            }
        }
        let mut x = 0.5 * (a + b);
        let xr = BigRational::from_float(x).expect("finite");
        let (val, der) = (f.eval_exact(&xr), f.derivative_exact(&xr));
        if !der.is_zero() {
            let cand = x - (val / der).to_f64().unwrap_or(0.0);
            let cr = BigRational::from_float(cand).expect("finite");
            if f.eval_exact(&cr).abs() < f.eval_exact(&xr).abs() {
                x = cand;
            }
        }
        let value = |x: f64| f.eval_exact(&BigRational::from_float(x).expect("finite"));
        loop {
            let here = value(x).abs();
            let (down, up) = (f64::from_bits(x.to_bits() - 1), f64::from_bits(x.to_bits() + 1));
            if value(down).abs() < here {
                x = down;
            } else if value(up).abs() < here {
                x = up;
            } else {
                break;
            }
        }
        let resid = value(x).to_f64().unwrap_or(f64::INFINITY);
        // Large roots of higher-order P_n cannot reach the absolute bound in
        // double precision; a sign change across adjacent doubles is accepted.
        let rounded = {
            let (down, up) = (f64::from_bits(x.to_bits() - 1), f64::from_bits(x.to_bits() + 1));
            value(down).is_positive() != value(up).is_positive()
        };
        if !(resid.abs() < 1e-10 * p0 || rounded) || x <= 2.0 {
            return Err(CarmaError::Numeric(format!(
                "root {x} of P_{n} has residual {resid}"
            )));
        }
        roots.push(x);
    }
    Ok(roots)
}

/// Cauchy bound on the root moduli of a monic polynomial.
fn bound(f: &AlphaFunction) -> f64 {
    1.0 + f.coefficients_f64()[..f.n].iter().fold(0.0_f64, |m, c| m.max(c.abs()))
}

/// `eta(xi) = xi - 1 - sqrt((xi - 1)^2 - 1)`, the root inside the unit disc of
/// `eta + 1/eta = 2 (xi - 1)`.
pub fn eta(xi: f64) -> Result<f64> {
    if !(xi > 2.0) {
        return Err(CarmaError::InvalidParameter(format!("eta needs xi > 2, got {xi}")));
    }
    let u = xi - 1.0;
    // 1 / (u + sqrt(u^2 - 1)) avoids cancellation for large xi.
    Ok(1.0 / (u + (u * u - 1.0).sqrt()))
}

/// `eta(xi_{n,i})` for the roots of `P_n`, in decreasing order.
pub fn eta_values(n: usize) -> Result<Vec<f64>> {
    xi_roots(n)?.into_iter().map(eta).collect()
}
