use std::f64::consts::PI;

use bifb::dsp::{hamming_window, periodogram, psd, segment_stream, PsdEstimator, Segment};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

fn segment(samples: Vec<f64>, fs: f64) -> Segment {
    Segment {
        samples,
        start_time_s: 0.0,
        sampling_rate_hz: fs,
    }
}

/// Textbook O(N²) DFT power, `|Σ x w e^{-j2πkn/N}|² / N`, one-sided.
fn naive_psd(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let w = hamming_window(n);
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, (xi, wi)) in x.iter().zip(&w).enumerate() {
                let ang = -2.0 * PI * (k * i) as f64 / n as f64;
                re += xi * wi * ang.cos();
                im += xi * wi * ang.sin();
            }
            (re * re + im * im) / n as f64
        })
        .collect()
}

#[test]
fn parseval_on_random_segments() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.random_range(8..600);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let s = psd(&segment(x.clone(), 128.0)).unwrap();
        // unfold the one-sided spectrum onto the full two-sided grid
        let mirrored = if n % 2 == 0 { n / 2 - 1 } else { n / 2 };
        let two_sided = s.power[0]
            + 2.0 * s.power[1..=mirrored].iter().sum::<f64>()
            + if n % 2 == 0 { s.power[n / 2] } else { 0.0 };
        let w = hamming_window(n);
        let energy: f64 = x.iter().zip(&w).map(|(a, b)| (a * b).powi(2)).sum();
        // Σ_k |X_k|² / N = Σ_n (x w)² with the 1/N already applied per bin
        assert!(((two_sided - energy) / energy).abs() < 1e-9, "n = {n}");
    }
}

#[test]
fn matches_direct_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [8, 9, 64, 100, 255] {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = psd(&segment(x.clone(), 256.0)).unwrap();
        let slow = naive_psd(&x);
        assert_eq!(fast.power.len(), n / 2 + 1);
        for (a, b) in fast.power.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b), "n = {n}");
        }
    }
}

#[test]
fn zero_signal_gives_zero_spectrum() {
    let s = psd(&segment(vec![0.0; 512], 256.0)).unwrap();
    assert!(s.power.iter().all(|&p| p == 0.0));
    assert_eq!(s.power.len(), 257);
    assert_eq!(s.bin_resolution_hz, 0.5);
}

#[test]
fn bin_centred_exponential_has_one_bin() {
    let n = 64;
    for k in [0usize, 1, 5, 31] {
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * (k * i) as f64 / n as f64))
            .collect();
        let p = periodogram(&x, n);
        for (bin, v) in p.iter().enumerate() {
            let want = if bin == k { n as f64 } else { 0.0 };
            assert!((v - want).abs() < 1e-9, "k = {k}, bin {bin}: {v}");
        }
    }
}

#[test]
fn rectangular_real_sinusoid_peak() {
    // real cosine of amplitude A on bin k: |X_k| = N A / 2, so power N A² / 4
    let (n, k, a) = (128usize, 10usize, 3.0);
    let x: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(a * (2.0 * PI * (k * i) as f64 / n as f64).cos(), 0.0))
        .collect();
    let p = periodogram(&x, n);
    assert!((p[k] - n as f64 * a * a / 4.0).abs() < 1e-9);
}

#[test]
fn segmentation_examples() {
    let fs = 100.0;
    let ten = vec![0.0; 1000];
    let segs = segment_stream(&ten, fs, 2.0, 0.5).unwrap();
    let starts: Vec<f64> = segs.iter().map(|s| s.start_time_s).collect();
    assert_eq!(starts, (0..9).map(f64::from).collect::<Vec<_>>());
    for ov in [0.0, 0.25, 0.9] {
        assert_eq!(segment_stream(&ten[..200], fs, 2.0, ov).unwrap().len(), 1);
    }
    assert!(matches!(
        segment_stream(&ten[..100], fs, 2.0, 0.5),
        Err(bifb::Error::SignalTooShort { .. })
    ));
}

#[test]
fn hamming_examples() {
    let w = hamming_window(33);
    assert!((w[0] - 0.08).abs() < 1e-15);
    assert!((w[16] - 1.0).abs() < 1e-15);
    for i in 0..33 {
        assert!((w[i] - w[32 - i]).abs() < 1e-15);
    }
}

#[test]
fn zero_padding_interpolates_the_same_spectrum() {
    let x: Vec<f64> = (0..50).map(|i| (0.3 * i as f64).sin()).collect();
    let plain = PsdEstimator::new(50, 1)
        .unwrap()
        .estimate(&x, 100.0)
        .unwrap();
    let padded = PsdEstimator::new(50, 4)
        .unwrap()
        .estimate(&x, 100.0)
        .unwrap();
    assert_eq!(padded.power.len(), 101);
    assert_eq!(padded.bin_resolution_hz, 0.5);
    for (k, p) in plain.power.iter().enumerate() {
        assert!((p - padded.power[4 * k]).abs() < 1e-10);
    }
}

proptest! {
    #[test]
    fn constant_offset_changes_only_dc(
        x in prop::collection::vec(-10.0f64..10.0, 16..80),
        c in -5.0f64..5.0,
    ) {
        // with a window the offset leaks into low bins, so check on the
        // unwindowed grid: only bin 0 moves
        let n = x.len();
        let to_c = |v: &[f64]| v.iter().map(|&a| Complex64::new(a, 0.0)).collect::<Vec<_>>();
        let shifted: Vec<f64> = x.iter().map(|a| a + c).collect();
        let p = periodogram(&to_c(&x), n);
        let q = periodogram(&to_c(&shifted), n);
        for k in 1..n {
            prop_assert!((p[k] - q[k]).abs() < 1e-8 * (1.0 + p[k]));
        }
    }

    #[test]
    fn doubling_amplitude_quadruples_power(x in prop::collection::vec(-10.0f64..10.0, 8..200)) {
        let a = psd(&segment(x.clone(), 64.0)).unwrap();
        let b = psd(&segment(x.iter().map(|v| 2.0 * v).collect(), 64.0)).unwrap();
        for (p, q) in a.power.iter().zip(&b.power) {
            prop_assert!(*p >= 0.0);
            prop_assert!((q - 4.0 * p).abs() <= 1e-9 * (1.0 + q));
        }
    }
}
