//! Monte-Carlo calibration of the goodness-of-fit tests: null rejection
//! rates at the nominal level, p-value uniformity under H0, power against
//! skewed alternatives, and the Glivenko–Cantelli band for the KM-based
//! cumulative hazard.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use zresid::gof::{km_chf, ks_test_normal, sf_test, sf_test_censored, sw_test};
use zresid::residuals::{ResidualKind, ResidualSet};
use zresid::stats::kolmogorov;

fn normal_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)).collect()
}

fn ks_distance_from_uniform(ps: &[f64]) -> f64 {
    let mut sorted = ps.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &p)| ((i + 1) as f64 / n - p).abs().max((p - i as f64 / n).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn sw_null_calibration_and_p_uniformity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let reps = 2000;
    let mut ps = Vec::with_capacity(reps);
    for _ in 0..reps {
        let sample = normal_sample(&mut rng, 100);
        ps.push(sw_test(&sample).unwrap().p_value);
    }
    let rejection = ps.iter().filter(|&&p| p < 0.05).count() as f64 / reps as f64;
    assert!(
        (0.035..=0.065).contains(&rejection),
        "SW rejection under H0: {rejection}"
    );
    assert!(ks_distance_from_uniform(&ps) < 0.05);
}

#[test]
fn sf_null_calibration_and_p_uniformity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let reps = 2000;
    let mut ps = Vec::with_capacity(reps);
    for _ in 0..reps {
        let sample = normal_sample(&mut rng, 100);
        ps.push(sf_test(&sample).unwrap().p_value);
    }
    let rejection = ps.iter().filter(|&&p| p < 0.05).count() as f64 / reps as f64;
    assert!(
        (0.035..=0.065).contains(&rejection),
        "SF rejection under H0: {rejection}"
    );
    assert!(ks_distance_from_uniform(&ps) < 0.05);
}

#[test]
fn ks_normal_null_is_conservative() {
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let reps = 2000;
    let mut rejections = 0;
    for _ in 0..reps {
        let sample = normal_sample(&mut rng, 100);
        if ks_test_normal(&sample).unwrap().p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    assert!(rate <= 0.05, "KS rejection under H0: {rate}");
}

#[test]
fn censored_sf_null_calibration() {
    // N(0,1), n=200, censoring by an independent N(0,1) threshold so large
    // values are censored about half the time.
    let mut rng = ChaCha8Rng::seed_from_u64(2027);
    let reps = 1000;
    let mut rejections = 0;
    for _ in 0..reps {
        let n = 200;
        let mut values = Vec::with_capacity(n);
        let mut status = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = StandardNormal.sample(&mut rng);
            let c: f64 = StandardNormal.sample(&mut rng);
            if x < c {
                values.push(x);
                status.push(true);
            } else {
                values.push(c);
                status.push(false);
            }
        }
        if sf_test_censored(&values, &status).unwrap().p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    assert!((0.03..=0.08).contains(&rate), "censored SF rejection under H0: {rate}");
}

#[test]
fn censored_sf_power_against_lognormal() {
    // Lognormal sample with ~20% right-censoring.
    let mut rng = ChaCha8Rng::seed_from_u64(2028);
    let reps = 300;
    let shift = 2.0f64.sqrt() * 0.8416212335729143; // Φ⁻¹(0.8)·√2
    let mut rejections = 0;
    for _ in 0..reps {
        let n = 200;
        let mut values = Vec::with_capacity(n);
        let mut status = Vec::with_capacity(n);
        for _ in 0..n {
            let x = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng).exp();
            let c =
                (<StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) + shift).exp();
            if x < c {
                values.push(x);
                status.push(true);
            } else {
                values.push(c);
                status.push(false);
            }
        }
        if sf_test_censored(&values, &status).unwrap().p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    assert!(rate >= 0.8, "censored SF power against lognormal: {rate}");
}

#[test]
fn km_chf_tracks_unit_exponential() {
    // Glivenko–Cantelli band: −log Ŝ of unit-exponential draws stays within
    // 0.08 of the identity on [0, 2] at n = 2000.
    let mut rng = ChaCha8Rng::seed_from_u64(2029);
    let n = 2000;
    let values: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let set = ResidualSet {
        kind: ResidualKind::CoxSnell,
        values,
        status: vec![true; n],
        seed: None,
        linear_predictors: vec![0.0; n],
        clamped: 0,
    };
    let chf = km_chf(&set).unwrap();
    let mut checked = 0;
    for (v, h) in chf {
        if v <= 2.0 && h.is_finite() {
            assert!((h - v).abs() < 0.08, "CHF({v}) = {h}");
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn kolmogorov_survival_calibrates_uniform_ks() {
    // Empirical check that the asymptotic p-value is near-uniform for
    // uniforms at n = 1000: rejection at 10% should be below ~11%.
    let mut rng = ChaCha8Rng::seed_from_u64(2030);
    let reps = 500;
    let mut rejections = 0;
    for _ in 0..reps {
        let mut xs: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        xs.sort_by(|a, b| a.total_cmp(b));
        let n = xs.len() as f64;
        let mut d = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            d = d.max((i + 1) as f64 / n - x).max(x - i as f64 / n);
        }
        if kolmogorov::survival(n.sqrt() * d) < 0.10 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    assert!(rate < 0.12, "uniform KS rejection at 10%: {rate}");
    assert!(rate > 0.04, "uniform KS rejection at 10%: {rate}");
}
