use std::f64::consts::PI;

use magop_tensor::{dwt, idwt, irfft, rfft, rng_for, ComplexTensor, DwtPlan, Tape, Tensor, Wavelet};
use proptest::prelude::*;
use rand::Rng;

fn random_signal(n: usize, seed: u64) -> Tensor {
    let mut rng = rng_for(seed, 0);
    Tensor::from_fn([n], |_| rng.random_range(-1.0..1.0))
}

/// Direct O(n^2) DFT, independent of the FFT backend.
fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n / 2 + 1)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (j, &v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * j % n) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            (re, im)
        })
        .collect()
}

#[test]
fn rfft_matches_direct_dft_on_198() {
    let x = random_signal(198, 1);
    let spec = rfft(&x).unwrap();
    assert_eq!(spec.shape(), &[100]);
    let oracle = naive_dft(x.data());
    for (k, &(re, im)) in oracle.iter().enumerate() {
        let (a, b) = spec.get(k);
        assert!((a - re).abs() < 1e-9 && (b - im).abs() < 1e-9, "mode {k}");
    }
}

#[test]
fn round_trip_198_and_odd() {
    for n in [198, 197, 7, 2] {
        let x = random_signal(n, n as u64);
        let y = irfft(&rfft(&x).unwrap(), n).unwrap();
        assert!(x.max_abs_diff(&y) < 1e-12, "n = {n}");
    }
}

#[test]
fn parseval() {
    for n in [198, 199] {
        let x = random_signal(n, 9);
        let spec = rfft(&x).unwrap();
        let energy: f64 = x.data().iter().map(|v| v * v).sum();
        let mut spec_energy = 0.0;
        for k in 0..spec.shape()[0] {
            let (re, im) = spec.get(k);
            let mult = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            spec_energy += mult * (re * re + im * im);
        }
        assert!((energy - spec_energy / n as f64).abs() < 1e-9);
    }
}

#[test]
fn spectra_of_real_inputs_are_conjugate_symmetric() {
    // Full-length oracle: X[n-k] = conj(X[k]).
    let x = random_signal(12, 4);
    let full: Vec<(f64, f64)> = (0..12)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (j, &v) in x.data().iter().enumerate() {
                let ang = -2.0 * PI * (k * j) as f64 / 12.0;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            (re, im)
        })
        .collect();
    for k in 1..6 {
        assert!((full[k].0 - full[12 - k].0).abs() < 1e-12);
        assert!((full[k].1 + full[12 - k].1).abs() < 1e-12);
    }
    let spec = rfft(&x).unwrap();
    assert!(spec.get(0).1.abs() < 1e-12 && spec.get(6).1.abs() < 1e-12);
}

#[test]
fn irfft_length_mismatch() {
    let s = ComplexTensor::zeros([10]);
    assert!(irfft(&s, 198).is_err());
}

#[test]
fn db6_four_levels_reconstructs_198() {
    let x = random_signal(198, 21).reshape([1, 198]).unwrap();
    let p = dwt(&x, 4, Wavelet::Db6).unwrap();
    let y = idwt(&p).unwrap();
    assert!(x.max_abs_diff(&y) < 1e-10);
}

#[test]
fn constant_signal_has_no_details() {
    let x = Tensor::full([1, 198], 0.7);
    let p = dwt(&x, 4, Wavelet::Db6).unwrap();
    for level in 1..=4 {
        for &d in p.detail(0, level) {
            assert!(d.abs() < 1e-10, "level {level}: {d}");
        }
    }
}

#[test]
fn energy_is_preserved_on_even_pyramid() {
    let x = random_signal(256, 5).reshape([1, 256]).unwrap();
    let p = dwt(&x, 4, Wavelet::Db6).unwrap();
    let ex: f64 = x.data().iter().map(|v| v * v).sum();
    let ec: f64 = p.coeffs().data().iter().map(|v| v * v).sum();
    assert!((ex - ec).abs() < 1e-9);
}

#[test]
fn five_levels_on_198_is_too_short() {
    let err = DwtPlan::new(198, 5, Wavelet::Db6).unwrap_err();
    assert!(err.to_string().contains("level 5"), "{err}");
}

#[test]
fn mode_mix_identity_and_truncation() {
    let mut tape = Tape::new();
    let z = tape.leaf(Tensor::from_fn([2, 3, 100, 2], |i| (i as f64 * 0.13).sin()));
    let mut eye = Tensor::zeros([100, 3, 3, 2]);
    for k in 0..100 {
        for c in 0..3 {
            eye.data_mut()[((k * 3 + c) * 3 + c) * 2] = 1.0;
        }
    }
    let r = tape.constant(eye);
    let full = tape.mode_mix(z, r, 100).unwrap();
    assert_eq!(tape.value(full), tape.value(z));

    let one = tape.mode_mix(z, r, 1).unwrap();
    let out = tape.value(one);
    for (i, v) in out.data().iter().enumerate() {
        let mode = (i / 2) % 100;
        if mode != 0 {
            assert_eq!(*v, 0.0);
        }
    }
    assert!(tape.mode_mix(z, r, 101).is_err());
}

proptest! {
    #[test]
    fn fft_round_trip_any_length(n in 1usize..300, seed in 0u64..1000) {
        let x = random_signal(n, seed);
        let y = irfft(&rfft(&x).unwrap(), n).unwrap();
        prop_assert!(x.max_abs_diff(&y) < 1e-11);
    }

    #[test]
    fn dwt_round_trip_any_admissible_length(n in 48usize..400, seed in 0u64..1000) {
        let x = random_signal(n, seed).reshape([1, n]).unwrap();
        let p = dwt(&x, 2, Wavelet::Db6).unwrap();
        let y = idwt(&p).unwrap();
        prop_assert!(x.max_abs_diff(&y) < 1e-10);
    }
}
