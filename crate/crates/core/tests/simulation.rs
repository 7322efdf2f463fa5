mod common;

use carma_core::levy::{
    generate_increments, generate_subgrid, simulate_path, simulate_path_with_states, Driver,
    IncrementSeries, InitialState,
};
use carma_core::linalg::expm;
use carma_core::recovery::sample_autocovariance;
use carma_core::riemann::{riemann_weights, simulate_riemann};
use carma_core::spectral::{ar_polynomial, filtered_autocovariance};
use carma_core::CarmaModel;

use common::{study_car2, study_carma21};

/// Bartlett approximation of `sd(gamma^(h))` for a Gaussian linear process.
fn bartlett_sd(gamma: impl Fn(i64) -> f64, h: i64, n: usize, reach: i64) -> f64 {
    let v: f64 = (-reach..=reach)
        .map(|k| gamma(k).powi(2) + gamma(k + h) * gamma(k - h))
        .sum();
    (v / n as f64).sqrt()
}

#[test]
fn brownian_increment_variance_band() {
    let s = generate_increments(Driver::BrownianMotion, 11, 0.01, 1_000_000).unwrap();
    let c = sample_autocovariance(&s.values, 1)[0];
    assert!((0.0097..=0.0103).contains(&c), "{c}");
}

#[test]
fn every_driver_is_centered_with_variance_delta() {
    let (d, n) = (0.01, 1_000_000);
    let cases = [
        (Driver::BrownianMotion, 3.0 * d * d),
        (Driver::CompoundPoissonNormal { rate: 20.0 }, 3.0 * (d / 20.0 + d * d)),
        (Driver::GammaCentered { shape: 2.0, scale: 0.5 }, 6.0 * d / 2.0 + 3.0 * d * d),
        (Driver::VarianceGamma { nu: 0.5 }, 3.0 * (0.5 * d + d * d)),
    ];
    for (driver, fourth) in cases {
        let s = generate_increments(driver, 12, d, n).unwrap();
        let mean = s.values.iter().sum::<f64>() / n as f64;
        let var = s.values.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!(mean.abs() < 5.0 * (d / n as f64).sqrt(), "{driver:?} mean {mean}");
        let sd = ((fourth - d * d) / n as f64).sqrt();
        assert!((var - d).abs() < 5.0 * sd, "{driver:?} var {var}");
    }
}

#[test]
fn determinism() {
    let a = generate_increments(Driver::VarianceGamma { nu: 0.3 }, 5, 0.1, 1000).unwrap();
    let b = generate_increments(Driver::VarianceGamma { nu: 0.3 }, 5, 0.1, 1000).unwrap();
    let c = generate_increments(Driver::VarianceGamma { nu: 0.3 }, 6, 0.1, 1000).unwrap();
    assert_eq!(a.values, b.values);
    assert_ne!(a.values, c.values);
}

#[test]
fn subgrid_aggregation_keeps_coarse_variance() {
    let (d, n) = (0.05, 200_000);
    let s = generate_subgrid(Driver::CompoundPoissonNormal { rate: 5.0 }, 13, 0, d, n, 16).unwrap();
    let c = s.coarse_values();
    let var = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let fourth = 3.0 * (d / 5.0 + d * d);
    assert!((var - d).abs() < 5.0 * ((fourth - d * d) / n as f64).sqrt(), "{var}");
}

#[test]
fn car1_lag_one_autocorrelation() {
    let (l, d, n) = (-1.0, 0.1, 200_000);
    let m = CarmaModel::from_real(&[l], &[], 1.0).unwrap();
    let inc = generate_increments(Driver::BrownianMotion, 14, d, n).unwrap();
    let path = simulate_path(&m, inc, InitialState::StationaryGaussian).unwrap();
    let g = sample_autocovariance(&path.y_values, 2);
    let rho = (l * d).exp();
    let sd = ((1.0 - rho * rho) / n as f64).sqrt();
    assert!((g[1] / g[0] - rho).abs() < 5.0 * sd);
}

#[test]
fn carma21_autocovariances_match_model() {
    let (d, n) = (0.1, 1_000_000);
    let m = study_carma21();
    let inc = generate_increments(Driver::BrownianMotion, 15, d, n).unwrap();
    let path = simulate_path(&m, inc, InitialState::StationaryGaussian).unwrap();
    let g = sample_autocovariance(&path.y_values, 6);
    let gamma = |k: i64| m.autocovariance(k as f64 * d);
    for (h, gh) in g.iter().enumerate() {
        let sd = bartlett_sd(gamma, h as i64, n, 400);
        assert!((gh - gamma(h as i64)).abs() < 5.0 * sd, "lag {h}: {gh} vs {}", gamma(h as i64));
    }
}

#[test]
fn jump_driven_path_has_model_variance() {
    let (d, n) = (0.1, 400_000);
    let m = study_carma21();
    let inc = generate_subgrid(Driver::VarianceGamma { nu: 0.2 }, 16, 0, d, n, 16).unwrap();
    let path = simulate_path(&m, inc, InitialState::StationaryGaussian).unwrap();
    let g0 = sample_autocovariance(&path.y_values, 1)[0];
    let want = m.autocovariance(0.0);
    // Gaussian band widened for the driver's excess kurtosis.
    let sd = 2.0 * bartlett_sd(|k| m.autocovariance(k as f64 * d), 0, n, 400);
    assert!((g0 - want).abs() < 5.0 * sd, "{g0} vs {want}");
}

#[test]
fn stationary_halves_agree() {
    let (d, n) = (0.1, 400_000);
    let m = study_car2();
    let inc = generate_increments(Driver::BrownianMotion, 17, d, n).unwrap();
    let path = simulate_path(&m, inc, InitialState::BurnIn(None)).unwrap();
    let (a, b) = path.y_values.split_at(path.len() / 2);
    let half = a.len();
    let gamma = |k: i64| m.autocovariance(k as f64 * d);
    let mean_sd = ((0..400).map(&gamma).sum::<f64>() * 2.0 / half as f64).sqrt();
    let var_sd = bartlett_sd(gamma, 0, half, 400);
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let ga = sample_autocovariance(a, 1)[0];
    let gb = sample_autocovariance(b, 1)[0];
    assert!((mean(a) - mean(b)).abs() < 5.0 * 2f64.sqrt() * mean_sd);
    assert!((ga - gb).abs() < 5.0 * 2f64.sqrt() * var_sd);
}

#[test]
fn zero_input_follows_deterministic_decay() {
    let m = study_carma21();
    let d = 0.2;
    let inc = IncrementSeries {
        delta: d,
        values: vec![0.0; 60],
        driver: Driver::CompoundPoissonNormal { rate: 1.0 },
        seed: 3,
        stream: 0,
        subgrid_factor: 1,
    };
    let path = simulate_path_with_states(&m, inc, InitialState::StationaryGaussian).unwrap();
    let xs = path.x_states.as_ref().unwrap();
    let f = expm(&(m.companion() * d));
    for w in xs.windows(2) {
        let next = &f * nalgebra::DVector::from_column_slice(&w[0]);
        for (a, b) in next.iter().zip(&w[1]) {
            assert!((a - b).abs() < 1e-13);
        }
    }
    assert!(path.y_values.last().unwrap().abs() < 1e-3 * path.y_values[0].abs().max(1e-3));
}

#[test]
fn filtered_covariance_matches_simulation() {
    let (d, n) = (0.25, 10_000_000);
    let m = study_car2();
    let inc = generate_increments(Driver::BrownianMotion, 18, d, n).unwrap();
    let path = simulate_path(&m, inc, InitialState::StationaryGaussian).unwrap();
    let phi = ar_polynomial(&m, d).unwrap();
    let y = &path.y_values;
    let u: Vec<f64> = (2..y.len())
        .map(|k| phi[0] * y[k] + phi[1] * y[k - 1] + phi[2] * y[k - 2])
        .collect();
    let g = sample_autocovariance(&u, 3);
    let want = filtered_autocovariance(&m, d).unwrap();
    let gamma = |k: i64| want.get(k.unsigned_abs() as usize).copied().unwrap_or(0.0);
    for h in 0..3 {
        let sd = bartlett_sd(gamma, h as i64, u.len(), 3);
        assert!((g[h] - gamma(h as i64)).abs() < 5.0 * sd, "lag {h}");
    }
}

#[test]
fn car1_midpoint_riemann_sum_is_scaled_ar1() {
    let (l, d) = (-0.8, 0.05);
    let m = CarmaModel::from_real(&[l], &[], 1.0).unwrap();
    let inc = generate_increments(Driver::BrownianMotion, 19, d, 5_000).unwrap();
    let dl = inc.coarse_values();
    let n_trunc = 1_000;
    let r = simulate_riemann(&m, inc, 0.5, Some(n_trunc)).unwrap();
    let rho = (l * d).exp();
    let mut x = 0.0;
    let mut ar = Vec::with_capacity(dl.len());
    for v in &dl {
        x = rho * x + v;
        ar.push(x);
    }
    let scale = (l * d * 0.5_f64).exp();
    let trunc = rho.powi(n_trunc as i32 + 1) * ar.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    for (i, y) in r.y_values.iter().enumerate() {
        assert!((y - scale * ar[n_trunc + i]).abs() <= trunc + 1e-12);
    }
}

#[test]
fn riemann_variance_approaches_process_variance() {
    let m = study_car2();
    let want = m.autocovariance(0.0);
    let mut prev = f64::INFINITY;
    for k in [2, 4, 6, 8] {
        let d = 2f64.powi(-k);
        let w = riemann_weights(&m, d, 0.5, (60.0 / d) as usize);
        let v = d * w.iter().map(|x| x * x).sum::<f64>();
        let err = (v - want).abs();
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 1e-4 * want);

    let d = 2f64.powi(-6);
    let n = 400_000;
    let inc = generate_increments(Driver::BrownianMotion, 20, d, n).unwrap();
    let path = simulate_riemann(&m, inc, 0.5, Some((60.0 / d) as usize)).unwrap();
    let g0 = sample_autocovariance(&path.y_values, 1)[0];
    let sd = bartlett_sd(|k| m.autocovariance(k as f64 * d), 0, path.len(), 4000);
    assert!((g0 - want).abs() < 5.0 * sd + 1e-3 * want, "{g0} vs {want}");
}

#[test]
fn riemann_coefficients_match_simulated_filtered_covariances() {
    use carma_core::riemann::riemann_arma_coefficients;
    let d = 0.25;
    let n = 300_000;
    for (mi, m) in [study_carma21(), common::study_car3()].iter().enumerate() {
        for (hi, h) in [0.1, 0.5, 0.9].into_iter().enumerate() {
            let inc = generate_increments(Driver::BrownianMotion, 100 + 10 * mi as u64 + hi as u64, d, n).unwrap();
            let path = simulate_riemann(m, inc, h, Some(200)).unwrap();
            let phi = ar_polynomial(m, d).unwrap();
            let y = &path.y_values;
            let p = m.p();
            let u: Vec<f64> = (p..y.len())
                .map(|k| phi.iter().enumerate().map(|(i, f)| f * y[k - i]).sum())
                .collect();
            let implied = riemann_arma_coefficients(m, d, h).unwrap().implied_autocovariance();
            let gamma = |k: i64| implied.get(k.unsigned_abs() as usize).copied().unwrap_or(0.0);
            let g = sample_autocovariance(&u, p);
            for lag in 0..p {
                let sd = bartlett_sd(gamma, lag as i64, u.len(), p as i64);
                assert!((g[lag] - gamma(lag as i64)).abs() < 5.0 * sd, "model {mi}, h {h}, lag {lag}");
            }
        }
    }
}
