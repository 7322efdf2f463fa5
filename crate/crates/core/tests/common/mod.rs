#![allow(dead_code)]

use carma_core::CarmaModel;
use num_complex::Complex64;
use rand::Rng;

/// Random causal model with well separated AR roots, `p <= max_p`.
pub fn random_model<R: Rng>(rng: &mut R, max_p: usize, invertible: bool) -> CarmaModel {
    let p = rng.gen_range(1..=max_p);
    let q = rng.gen_range(0..p);
    let ar = loop {
        let roots = conjugate_closed_roots(rng, p, -3.0..-0.2, 3.0);
        if separated(&roots, 0.1) {
            break roots;
        }
    };
    let ma = loop {
        let mut roots = conjugate_closed_roots(rng, q, 0.2..3.0, 2.0);
        if !invertible {
            let mut i = 0;
            while i < roots.len() {
                // conjugate partners are adjacent and flip together
                let width = if roots[i].im != 0.0 { 2 } else { 1 };
                if rng.gen_bool(0.3) {
                    for r in &mut roots[i..i + width] {
                        *r = -*r;
                    }
                }
                i += width;
            }
        }
        let far_from_ar = roots
            .iter()
            .all(|m| ar.iter().all(|l: &Complex64| (l + m).norm() > 0.1));
        if separated(&roots, 0.1) && far_from_ar {
            break roots;
        }
    };
    CarmaModel::new(ar, ma, rng.gen_range(0.5..2.0)).expect("conjugate-closed roots")
}

fn conjugate_closed_roots<R: Rng>(
    rng: &mut R,
    n: usize,
    re: std::ops::Range<f64>,
    im_max: f64,
) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = rng.gen_range(re.clone());
        if n - out.len() >= 2 && rng.gen_bool(0.5) {
            let y = rng.gen_range(0.1..im_max);
            out.push(Complex64::new(x, y));
            out.push(Complex64::new(x, -y));
        } else {
            out.push(Complex64::new(x, 0.0));
        }
    }
    out
}

fn separated(roots: &[Complex64], gap: f64) -> bool {
    roots
        .iter()
        .enumerate()
        .all(|(i, a)| roots[i + 1..].iter().all(|b| (a - b).norm() > gap))
}

/// Log-uniform step in `[lo, hi]`.
pub fn random_delta<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

pub fn study_car2() -> CarmaModel {
    CarmaModel::from_real(&[-0.7, -1.2], &[], 1.0).unwrap()
}

pub fn study_carma21() -> CarmaModel {
    CarmaModel::from_real(&[-0.7, -1.2], &[3.0], 1.0).unwrap()
}

pub fn study_car3() -> CarmaModel {
    CarmaModel::from_real(&[-0.7, -1.2, -2.6], &[], 1.0).unwrap()
}
