use std::f64::consts::PI;

use bifb::baselines::{cca_correlation, cca_recognize, psda_recognize, CcaReference};
use bifb::dsp::Spectrum;
use bifb::synth::{generate_trial, SynthSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn noise(rng: &mut impl Rng, rows: usize, t: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            (0..t)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

fn centred_cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / n
}

/// Largest correlation of `[cos θ, sin θ]·A` with `[cos φ, sin φ]·B` over a
/// one-degree grid of both angles.
fn brute_force_cca(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let c = |x: &[Vec<f64>], y: &[Vec<f64>]| {
        [
            [centred_cov(&x[0], &y[0]), centred_cov(&x[0], &y[1])],
            [centred_cov(&x[1], &y[0]), centred_cov(&x[1], &y[1])],
        ]
    };
    let (caa, cbb, cab) = (c(a, a), c(b, b), c(a, b));
    let quad = |m: [[f64; 2]; 2], u: [f64; 2], v: [f64; 2]| {
        u[0] * (m[0][0] * v[0] + m[0][1] * v[1]) + u[1] * (m[1][0] * v[0] + m[1][1] * v[1])
    };
    let mut best = f64::NEG_INFINITY;
    for i in 0..180 {
        let th = (i as f64).to_radians();
        let u = [th.cos(), th.sin()];
        let va = quad(caa, u, u);
        for j in 0..360 {
            let ph = (j as f64).to_radians();
            let v = [ph.cos(), ph.sin()];
            best = best.max(quad(cab, u, v) / (va * quad(cbb, v, v)).sqrt());
        }
    }
    best
}

fn mix(m: [[f64; 2]; 2], a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..2)
        .map(|r| {
            a[0].iter()
                .zip(&a[1])
                .map(|(x, y)| m[r][0] * x + m[r][1] * y)
                .collect()
        })
        .collect()
}

/// A 2×T pair with a moderate shared component.
fn correlated_pair(rng: &mut impl Rng, t: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let a = noise(rng, 2, t);
    let e = noise(rng, 2, t);
    let w: [[f64; 2]; 2] = [
        [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
    ];
    let shared = mix(w, &a);
    let b = (0..2)
        .map(|r| shared[r].iter().zip(&e[r]).map(|(s, n)| s + n).collect())
        .collect();
    (a, b)
}

#[test]
fn eigen_solution_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..25 {
        let (a, b) = correlated_pair(&mut rng, 200);
        let rho = cca_correlation(&a, &b).unwrap();
        let grid = brute_force_cca(&a, &b);
        assert!(rho >= grid - 1e-9 && rho - grid < 1e-3, "{rho} vs {grid}");
    }
}

#[test]
fn identical_sets_correlate_perfectly() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for rows in 1..4 {
        let a = noise(&mut rng, rows, 200);
        assert!((cca_correlation(&a, &a).unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn invariant_to_channel_mixing() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..25 {
        let (a, b) = correlated_pair(&mut rng, 200);
        let m: [[f64; 2]; 2] = [
            [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
            [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
        ];
        if (m[0][0] * m[1][1] - m[0][1] * m[1][0]).abs() < 0.1 {
            continue;
        }
        let r1 = cca_correlation(&a, &b).unwrap();
        let r2 = cca_correlation(&mix(m, &a), &b).unwrap();
        assert!((r1 - r2).abs() < 1e-8);
        assert!((r1 - cca_correlation(&b, &a).unwrap()).abs() < 1e-12);
        let scaled: Vec<Vec<f64>> = b
            .iter()
            .zip([3.0, -0.2])
            .map(|(row, s)| row.iter().map(|v| s * v).collect())
            .collect();
        assert!((r1 - cca_correlation(&a, &scaled).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn noise_against_sinusoid_is_weak() {
    let t = 10_000;
    let sine = vec![(0..t)
        .map(|i| (2.0 * PI * 13.0 * i as f64 / 256.0).sin())
        .collect::<Vec<f64>>()];
    for seed in 0..20 {
        let a = noise(&mut ChaCha8Rng::seed_from_u64(seed), 1, t);
        assert!(cca_correlation(&a, &sine).unwrap() < 0.1);
    }
}

#[test]
fn reference_row_is_recognized() {
    let n = 512;
    let refs = CcaReference::new(14.0, 2, 256.0, n).unwrap();
    assert_eq!(refs.rows.len(), 4);
    let (class, rhos) = cca_recognize(&refs.rows[..1], &[8.0, 14.0, 28.0], 2, 256.0).unwrap();
    assert_eq!(class, 1);
    assert!((rhos[1] - 1.0).abs() < 1e-9);
}

#[test]
fn strong_trials_are_recognized() {
    for seed in 0..100 {
        let mut spec = SynthSpec::new(8.0, seed);
        spec.snr_scale = 20.0;
        spec.n_channels = 3;
        spec.duration_s = 2.0;
        let r = generate_trial(&spec).unwrap();
        assert_eq!(
            cca_recognize(&r.samples, &[8.0, 14.0, 28.0], 2, 256.0)
                .unwrap()
                .0,
            0
        );
    }
}

fn class_counts(noise_exponent: f64) -> [usize; 3] {
    let mut counts = [0; 3];
    for seed in 0..300 {
        let mut spec = SynthSpec::new(8.0, seed);
        spec.snr_scale = 0.0;
        spec.noise_exponent = noise_exponent;
        spec.n_channels = 3;
        spec.duration_s = 2.0;
        let r = generate_trial(&spec).unwrap();
        counts[cca_recognize(&r.samples, &[8.0, 14.0, 28.0], 2, 256.0)
            .unwrap()
            .0] += 1;
    }
    counts
}

#[test]
fn white_noise_is_recognized_at_chance() {
    let counts = class_counts(0.0);
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - 100.0).powi(2) / 100.0)
        .sum();
    // 99th percentile of chi-square with 2 degrees of freedom
    assert!(chi2 < 9.2103, "{counts:?}");
}

#[test]
fn pink_noise_favours_the_lowest_stimulus() {
    // a 1/f background puts more variance near the low references
    let counts = class_counts(1.0);
    assert!(counts[0] > counts[1] && counts[1] > counts[2], "{counts:?}");
}

fn spectrum_with(bins: &[(usize, f64)]) -> Spectrum {
    let mut power = vec![0.0; 129];
    for &(b, p) in bins {
        power[b] = p;
    }
    Spectrum {
        power,
        bin_resolution_hz: 0.5,
        n_fft: 256,
        segment_len: 256,
    }
}

#[test]
fn psda_examples() {
    let stimuli = [8.0, 14.0, 28.0];
    assert_eq!(
        psda_recognize(&spectrum_with(&[(28, 1.0)]), &stimuli, 1.0).unwrap(),
        1
    );
    // 28 Hz wins only because its harmonic band is counted
    let split = spectrum_with(&[(16, 1.0), (56, 0.75), (112, 0.75)]);
    assert_eq!(psda_recognize(&split, &stimuli, 1.0).unwrap(), 2);
    let flat = Spectrum {
        power: vec![1.0; 129],
        ..spectrum_with(&[])
    };
    assert_eq!(psda_recognize(&flat, &stimuli, 1.0).unwrap(), 0);
    assert!(matches!(
        psda_recognize(&spectrum_with(&[]), &[8.0, 40.0], 1.0),
        Err(bifb::Error::BankExceedsSpectrumRange { .. })
    ));
}

proptest! {
    #[test]
    fn psda_ignores_global_scale(power in prop::collection::vec(0.0f64..5.0, 129), c in 1e-3f64..1e3) {
        let a = spectrum_with(&[]);
        let s = Spectrum { power: power.clone(), ..a.clone() };
        let t = Spectrum { power: power.iter().map(|p| c * p).collect(), ..a };
        let stimuli = [8.0, 10.0, 14.0, 28.0];
        prop_assert_eq!(psda_recognize(&s, &stimuli, 1.0).unwrap(), psda_recognize(&t, &stimuli, 1.0).unwrap());
    }
}
