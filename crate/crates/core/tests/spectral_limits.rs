mod common;

use carma_core::riemann::{optimal_rules, riemann_arma_coefficients, RuleSet};
use carma_core::spectral::{asymptotic_arma, ma_autocovariance};
use carma_core::{CarmaModel, SampledArma};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn theta_distance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    (0..n).map(|i| (at(a, i) - at(b, i)).powi(2)).sum::<f64>().sqrt()
}

fn autocorrelation(theta: &[f64]) -> Vec<f64> {
    let g = ma_autocovariance(theta, 1.0);
    g.iter().map(|v| v / g[0]).collect()
}

#[test]
fn exact_ma_part_converges_to_asymptotic_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    while checked < 12 {
        let m = common::random_model(&mut rng, 4, true);
        if m.p() - m.q() > 3 {
            continue;
        }
        checked += 1;
        let mut dists = Vec::new();
        let mut ratio = 0.0;
        for k in [2, 4, 6, 8, 10] {
            let d = 2f64.powi(-k);
            let exact = SampledArma::exact(&m, d).unwrap();
            let asym = asymptotic_arma(&m, d).unwrap();
            dists.push(theta_distance(&exact.theta, &asym.theta));
            ratio = (exact.sigma2_delta / asym.sigma2_delta).sqrt();
        }
        assert!(
            dists[dists.len() - 1] <= dists[0] / 10.0 + 1e-12,
            "p {} q {}: {dists:?}",
            m.p(),
            m.q()
        );
        assert!((ratio - 1.0).abs() < 0.05, "p {} q {}: sigma ratio {ratio}", m.p(), m.q());
    }
}

#[test]
fn car2_moving_average_coefficient_limit() {
    let m = common::study_car2();
    let exact = SampledArma::exact(&m, 2f64.powi(-12)).unwrap();
    assert!((exact.theta[1] - (2.0 - 3f64.sqrt())).abs() < 1e-3);
}

#[test]
fn asymptotic_form_accepts_non_invertible_ma() {
    let inv = CarmaModel::from_real(&[-1.0, -2.0], &[1.5], 1.0).unwrap();
    let non = CarmaModel::from_real(&[-1.0, -2.0], &[-1.5], 1.0).unwrap();
    let a = asymptotic_arma(&inv, 0.01).unwrap();
    let b = asymptotic_arma(&non, 0.01).unwrap();
    assert!(theta_distance(&a.theta, &b.theta) < 1e-14);
    let zero = CarmaModel::new(
        vec![Complex64::new(-1.0, 0.0), Complex64::new(-2.0, 0.0)],
        vec![Complex64::new(0.0, 0.0)],
        1.0,
    )
    .unwrap();
    assert!(asymptotic_arma(&zero, 0.01).is_err());
}

#[test]
fn matched_riemann_sums_share_the_limiting_correlation() {
    let cases = [(common::study_car2(), 2), (common::study_car3(), 3)];
    for (m, pq) in cases {
        let rules = optimal_rules(pq).unwrap();
        let RuleSet::Finite(hs) = rules.matching_h else {
            panic!("finite rule set expected");
        };
        let d = 2f64.powi(-10);
        let limit = autocorrelation(&asymptotic_arma(&m, d).unwrap().theta);
        for h in hs {
            let r = riemann_arma_coefficients(&m, d, h).unwrap();
            let g = r.implied_autocovariance();
            for (k, want) in limit.iter().enumerate().take(pq) {
                assert!((g[k] / g[0] - want).abs() < 1e-2, "pq {pq}, h {h}, lag {k}");
            }
        }
    }
}
