mod common;

use carma_core::levy::{generate_increments, simulate_path, Driver, InitialState};
use carma_core::recovery::{
    carma2_error_closed_form, estimate_kernel, innovations, inversion_burn_in, invert,
    max_relative_kernel_error, recovery_error_mc, sample_autocovariance, ArSource, KernelSource,
    McOptions,
};
use carma_core::spectral::ar_polynomial;
use carma_core::{CarmaError, CarmaModel, Provenance, SampledArma};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use common::{study_car2, study_carma21};

#[test]
fn innovations_invert_a_known_arma() {
    let arma = SampledArma::exact(&study_carma21(), 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let z: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut y = vec![0.0; z.len()];
    for n in 0..z.len() {
        let mut v: f64 = arma.theta.iter().enumerate().filter(|(k, _)| *k <= n).map(|(k, t)| t * z[n - k]).sum();
        for i in 1..arma.phi.len().min(n + 1) {
            v -= arma.phi[i] * y[n - i];
        }
        y[n] = v;
    }
    let back = innovations(&y, &arma.phi, &arma.theta);
    for (a, b) in back.iter().zip(&z) {
        assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
    }
}

#[test]
fn recovered_increments_are_white_with_variance_delta() {
    let (d, n) = (2f64.powi(-4), 200_000);
    let m = study_car2();
    let inc = generate_increments(Driver::BrownianMotion, 42, d, n).unwrap();
    let path = simulate_path(&m, inc, InitialState::StationaryGaussian).unwrap();
    let arma = SampledArma::exact(&m, d).unwrap();
    let rec = invert(&path, &arma).unwrap();
    assert!(rec.burn_in >= m.p());
    assert_eq!(rec.first_increment, path.burn_in + rec.burn_in);
    let k = rec.values.len() as f64;
    let g = sample_autocovariance(&rec.values, 6);
    assert!((g[0] - d).abs() < 5.0 * d * (2.0 / k).sqrt());
    for lag in 1..6 {
        assert!((g[lag] / g[0]).abs() < 5.0 / k.sqrt(), "lag {lag}");
    }
}

#[test]
fn inversion_refuses_non_min_phase_and_mismatched_steps() {
    let bad = SampledArma {
        delta: 0.1,
        phi: vec![1.0, -0.5],
        theta: vec![1.0, 2.0],
        sigma2_delta: 1.0,
        provenance: Provenance::Empirical,
    };
    assert!(matches!(inversion_burn_in(&bad), Err(CarmaError::NotMinPhase { .. })));

    let m = study_car2();
    let inc = generate_increments(Driver::BrownianMotion, 1, 0.1, 500).unwrap();
    let path = simulate_path(&m, inc, InitialState::StationaryGaussian).unwrap();
    let other = SampledArma::exact(&m, 0.2).unwrap();
    assert!(invert(&path, &other).is_err());
}

#[test]
fn recovery_error_does_not_depend_on_the_driver() {
    let m = study_car2();
    let d = 2f64.powi(-6);
    let opts = McOptions { seed: 43, subgrid_factor: None };
    let a = recovery_error_mc(&m, d, 1.0, 300, Driver::BrownianMotion, opts).unwrap();
    let b = recovery_error_mc(&m, d, 1.0, 300, Driver::CompoundPoissonNormal { rate: 2.0 }, opts).unwrap();
    let se = (a.mc_stderr.powi(2) + b.mc_stderr.powi(2)).sqrt();
    assert!((a.mean_sq_error - b.mean_sq_error).abs() < 5.0 * se);
}

#[test]
fn closed_form_agrees_with_monte_carlo() {
    let cases = [
        (study_car2(), 2f64.powi(-4), 1.0),
        (CarmaModel::from_real(&[-0.5, -2.0], &[1.0], 1.0).unwrap(), 2f64.powi(-4), 2.0),
        (CarmaModel::from_real(&[-0.5, -2.0], &[-1.0], 1.0).unwrap(), 2f64.powi(-6), 1.0),
    ];
    for (i, (m, d, t)) in cases.iter().enumerate() {
        let opts = McOptions { seed: 44 + i as u64, subgrid_factor: None };
        let mc = recovery_error_mc(m, *d, *t, 300, Driver::BrownianMotion, opts).unwrap();
        let exact = carma2_error_closed_form(m, *d, *t).unwrap();
        assert!(
            (mc.mean_sq_error - exact).abs() < 5.0 * mc.mc_stderr,
            "case {i}: {} +- {} vs {exact}",
            mc.mean_sq_error,
            mc.mc_stderr
        );
    }
}

#[test]
fn lattice_kernel_tracks_the_midpoint_kernel() {
    let err = max_relative_kernel_error(&study_carma21(), 2f64.powi(-6), 0.5, 64).unwrap();
    assert!(err < 1e-3, "{err}");
}

#[test]
fn empirical_kernel_matches_theoretical() {
    let (d, n) = (0.25, 1_000_000);
    let m = study_car2();
    let inc = generate_increments(Driver::BrownianMotion, 45, d, n).unwrap();
    let path = simulate_path(&m, inc, InitialState::StationaryGaussian).unwrap();
    let grid: Vec<f64> = (0..8).map(|j| j as f64 * d).collect();
    let want = estimate_kernel(KernelSource::Theoretical(&m), d, &grid).unwrap();
    let scale = want.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let sources = [
        (ArSource::Known(ar_polynomial(&m, d).unwrap()), 0.02),
        (ArSource::YuleWalker(2), 0.05),
    ];
    for (ar, tol) in sources {
        let got = estimate_kernel(KernelSource::Empirical(&path, &ar), d, &grid).unwrap();
        for (j, (a, b)) in got.iter().zip(&want).enumerate() {
            assert!((a - b).abs() < tol * scale, "{ar:?} j {j}: {a} vs {b}");
        }
    }
}
