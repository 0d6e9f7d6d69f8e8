use std::time::Instant;

use magop_core::datagen::{
    build_dataset, cosine_kernel, kernel_factor, linspace, sample_forc_b, sample_minor_b, HysteresisDataset,
    MinMaxScaler, Split, Waveform, GP_JITTER,
};
use magop_core::preisach::{PreisachDensity, PreisachModel};
use proptest::prelude::*;

fn oracle() -> PreisachModel {
    PreisachModel::new(&PreisachDensity::default(), 1.2).unwrap()
}

#[test]
fn forc_curves_are_half_sines() {
    let curves = sample_forc_b(50, 198, 0.1, 1.2, 7).unwrap();
    assert_eq!(curves.len(), 50);
    for c in &curves {
        assert_eq!(c.len(), 198);
        assert_eq!(c.values[0], 0.0);
        assert!(c.values[197].abs() < 1e-12);
        let peak = c.values.iter().cloned().fold(0.0, f64::max);
        assert!((0.1..1.2).contains(&peak));
        // Nonnegative and unimodal.
        assert!(c.values.iter().all(|&v| v >= 0.0));
        let top = c.values.iter().position(|&v| v == peak).unwrap();
        assert!(c.values[..=top].windows(2).all(|w| w[1] >= w[0]));
        assert!(c.values[top..].windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn forc_sampling_is_deterministic_and_validated() {
    let a = sample_forc_b(20, 198, 0.1, 1.2, 3).unwrap();
    let b = sample_forc_b(20, 198, 0.1, 1.2, 3).unwrap();
    assert_eq!(a, b);
    let c = sample_forc_b(20, 198, 0.1, 1.2, 4).unwrap();
    assert_ne!(a, c);
    // A prefix of a larger draw is the smaller draw: per-sample streams.
    let big = sample_forc_b(40, 198, 0.1, 1.2, 3).unwrap();
    assert_eq!(&big[..20], &a[..]);
    assert!(sample_forc_b(5, 198, 0.0, 1.2, 0).is_err());
    assert!(sample_forc_b(5, 198, 1.0, 0.5, 0).is_err());
    assert!(sample_forc_b(5, 1, 0.1, 1.2, 0).is_err());
}

#[test]
fn minor_loop_samples() {
    let curves = sample_minor_b(2000, 198, 11).unwrap();
    let t = &curves[0].t;
    assert_eq!(t[0], 0.0);
    assert!((t[197] - 3.0 * std::f64::consts::PI).abs() < 1e-15);
    for c in &curves {
        let peak = c.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak <= 1.2 + 1e-12);
    }
    for j in 0..198 {
        let mean: f64 = curves.iter().map(|c| c.values[j]).sum::<f64>() / 2000.0;
        assert!(mean.abs() < 0.1, "t index {j}: mean {mean}");
    }
}

#[test]
fn minor_loop_draws_lie_in_kernel_span() {
    // cos(s - t) = cos s cos t + sin s sin t, so every draw is a cos t + c sin t.
    let curves = sample_minor_b(5, 60, 2).unwrap();
    for c in &curves {
        let t = &c.t;
        let (a, s) = (c.values[0], c.values[15]);
        // Solve for the coefficients from two points and check the rest.
        let det = t[0].cos() * t[15].sin() - t[0].sin() * t[15].cos();
        let ca = (a * t[15].sin() - s * t[0].sin()) / det;
        let cs = (t[0].cos() * s - t[15].cos() * a) / det;
        for (x, v) in t.iter().zip(&c.values) {
            // The jitter adds an O(sqrt(jitter)) component outside the span.
            assert!((ca * x.cos() + cs * x.sin() - v).abs() < 1e-3);
        }
    }
}

#[test]
fn kernel_factor_reconstructs_covariance() {
    let t = linspace(0.0, 3.0 * std::f64::consts::PI, 50);
    let l = kernel_factor(&t).unwrap();
    let k = cosine_kernel(&t, GP_JITTER);
    let diff = (&l * l.transpose() - k).abs().max();
    assert!(diff < 1e-8, "{diff}");
}

#[test]
fn dataset_round_trip_through_oracle() {
    let model = oracle();
    let curves = sample_forc_b(40, 198, 0.1, 1.2, 5).unwrap();
    let start = Instant::now();
    let ds = build_dataset(&curves, &model, 5).unwrap();
    eprintln!("inverted 40 curves in {:?}", start.elapsed());
    assert_eq!(ds.n_samples(), 40);
    let split = ds.split().unwrap();
    assert_eq!((split.train.len(), split.test.len()), (20, 20));
    split.validate(40).unwrap();
    for i in 0..40 {
        let b = model.forward_sequence(ds.h_row(i)).unwrap();
        for (x, y) in b.iter().zip(ds.b_row(i)) {
            assert!((x - y).abs() < 1e-8);
        }
    }
    let again = build_dataset(&curves, &model, 5).unwrap();
    assert_eq!(ds, again);
}

#[test]
fn dataset_is_independent_of_worker_count() {
    let model = oracle();
    let curves = sample_forc_b(16, 64, 0.1, 1.2, 8).unwrap();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| build_dataset(&curves, &model, 1).unwrap());
    let four = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| build_dataset(&curves, &model, 1).unwrap());
    assert_eq!(one, four);
}

#[test]
fn scaler_fit_on_train_maps_extremes_exactly() {
    let ds = build_dataset(&sample_forc_b(30, 40, 0.1, 1.2, 2).unwrap(), &oracle(), 2).unwrap();
    let sc = ds.scaler().unwrap();
    let (h, b) = ds.gather(&ds.split().unwrap().train);
    let hmin = h.iter().cloned().fold(f64::INFINITY, f64::min);
    let hmax = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bmax = b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(sc.scale_h(hmin), -1.0);
    assert_eq!(sc.scale_h(hmax), 1.0);
    assert_eq!(sc.scale_b(bmax), 1.0);
    for &x in ds.h.iter().chain(&ds.b) {
        assert!((sc.unscale_h(sc.scale_h(x)) - x).abs() < 1e-12);
        assert!((sc.unscale_b(sc.scale_b(x)) - x).abs() < 1e-12);
    }
}

#[test]
fn inverse_failure_names_sample() {
    let mut curves = sample_forc_b(3, 20, 0.1, 1.0, 1).unwrap();
    curves[2].values[10] = 1.2;
    let err = build_dataset(&curves, &oracle(), 0).unwrap_err();
    assert!(err.to_string().starts_with("sample 2"), "{err}");
}

#[test]
fn waveform_validation() {
    assert!(Waveform::new(vec![0.0, 1.0], vec![0.0]).is_err());
    assert!(Waveform::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
    assert!(Waveform::new(vec![0.0, 1.0], vec![0.0, f64::NAN]).is_err());
    assert!(HysteresisDataset::new(vec![0.0, 1.0], vec![0.0; 3], vec![0.0; 3]).is_err());
    assert!(MinMaxScaler::new(1.0, 1.0, 0.0, 1.0).is_err());
}

proptest! {
    #[test]
    fn splits_are_disjoint_halves(n in 0usize..300, seed in 0u64..50) {
        let s = Split::random_half(n, seed);
        prop_assert_eq!(s.train.len(), n / 2);
        prop_assert!(s.validate(n).is_ok());
    }

    #[test]
    fn scaler_round_trip(lo in -1e3f64..0.0, span in 1e-3f64..2e3, x in -5e3f64..5e3) {
        let sc = MinMaxScaler::new(lo, lo + span, lo, lo + span).unwrap();
        prop_assert!((sc.unscale_h(sc.scale_h(x)) - x).abs() < 1e-12 * (1.0 + x.abs() + span));
    }
}
