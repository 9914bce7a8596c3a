//! Property tests over random inputs.

mod support;

use knife::data::DomainDataset;
use knife::diffengine::Tensor;
use knife::eval::paired_ttest;
use knife::fourier::{self, make_mask, SwapMask};
use knife::losses::{coral_align_value, DomainFeatureSet};
use knife::TrialTensor;
use proptest::collection::vec;
use proptest::prelude::*;

fn signal() -> impl Strategy<Value = Vec<f64>> {
    (2usize..=128).prop_flat_map(|m| vec(-10.0f64..10.0, m))
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (4usize..=128).prop_flat_map(|m| (vec(-5.0f64..5.0, m), vec(-5.0f64..5.0, m)))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn one_channel(x: &[f64]) -> TrialTensor {
    TrialTensor::from_channels(vec![x.to_vec()]).unwrap()
}

fn feature_sets() -> impl Strategy<Value = (usize, Vec<Vec<f64>>, Vec<usize>)> {
    (2usize..=4, 1usize..=5).prop_flat_map(|(nd, d)| {
        let rows = vec(2usize..=8, nd);
        rows.prop_flat_map(move |rows| {
            let cells: Vec<_> = rows.iter().map(|&r| vec(-3.0f64..3.0, r * d)).collect();
            (Just(d), cells, Just(rows))
        })
    })
}

fn to_set(d: usize, cells: &[Vec<f64>], rows: &[usize]) -> DomainFeatureSet {
    DomainFeatureSet::new(
        cells
            .iter()
            .zip(rows)
            .map(|(c, &r)| Tensor::new(vec![r, d], c.clone()).unwrap())
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dft_round_trip(x in signal()) {
        let back = fourier::idft(&fourier::dft(&x).unwrap()).unwrap();
        prop_assert!(max_abs_diff(&x, &back) < 1e-9);
    }

    #[test]
    fn parseval(x in signal()) {
        let s = fourier::dft(&x).unwrap();
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = s.amplitude.iter().map(|a| a * a).sum::<f64>() / x.len() as f64;
        prop_assert!((time - freq).abs() <= 1e-6 * time.max(1e-12));
    }

    #[test]
    fn amplitude_is_conjugate_symmetric(x in signal()) {
        let s = fourier::dft(&x).unwrap();
        let m = x.len();
        for k in 1..m {
            prop_assert!((s.amplitude[k] - s.amplitude[m - k]).abs() < 1e-9 * (1.0 + s.amplitude[k]));
        }
        prop_assert!(s.phase.iter().all(|p| *p > -std::f64::consts::PI && *p <= std::f64::consts::PI));
    }

    #[test]
    fn self_transfer_is_identity(x in signal(), alpha in 0.001f64..0.499) {
        prop_assume!(x.len() >= 2);
        let t = one_channel(&x);
        let (a, b) = fourier::spectral_transfer(&t, &t, alpha).unwrap();
        prop_assert!(max_abs_diff(a.as_slice(), &x) < 1e-9);
        prop_assert!(max_abs_diff(b.as_slice(), &x) < 1e-9);
    }

    #[test]
    fn complementary_masks_recompose((u, v) in pair(), alpha in 0.001f64..0.499) {
        let m = u.len();
        let mask = make_mask(alpha, m).unwrap();
        let complement = SwapMask { alpha, bins: mask.bins.iter().map(|b| !b).collect() };
        let (su, sv) = (fourier::dft(&u).unwrap(), fourier::dft(&v).unwrap());
        // Low band from v, then the rest from v: all of v's amplitude on u's phase.
        let low = fourier::transfer_spectrum(&su, &sv, &mask).unwrap();
        let both = fourier::transfer_spectrum(&low, &sv, &complement).unwrap();
        prop_assert_eq!(&both.amplitude, &sv.amplitude);
        // Giving u its own amplitude back restores u.
        let back = fourier::transfer_spectrum(&both, &su, &mask).unwrap();
        let back = fourier::transfer_spectrum(&back, &su, &complement).unwrap();
        let x = fourier::idft(&back).unwrap();
        prop_assert!(max_abs_diff(&x, &u) < 1e-6);
        // Transferring there and back through the time domain also restores u.
        let (tu, tv) = (one_channel(&u), one_channel(&v));
        let (forward, _) = fourier::spectral_transfer(&tu, &tv, alpha).unwrap();
        let restored = fourier::synthesize_transfer(
            &fourier::trial_spectra(&forward).unwrap(),
            &fourier::trial_spectra(&tu).unwrap(),
            &mask,
        ).unwrap();
        let keep_phase = su.amplitude.iter().all(|a| *a > 1e-6);
        if keep_phase {
            prop_assert!(max_abs_diff(restored.as_slice(), &u) < 1e-6);
        }
    }

    #[test]
    fn mask_grows_with_alpha(m in 2usize..300, a in 0.001f64..0.499, b in 0.001f64..0.499) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let small = make_mask(lo, m).unwrap();
        let large = make_mask(hi, m).unwrap();
        for k in 0..m {
            prop_assert!(!small.bins[k] || large.bins[k]);
            prop_assert_eq!(small.bins[k], small.bins[(m - k) % m]);
        }
        prop_assert!(small.bins[0]);
    }

    #[test]
    fn bandpass_is_idempotent(x in vec(-5.0f64..5.0, 64..=256), lo in 1.0f64..40.0, width in 2.0f64..60.0) {
        let fs = 250.0;
        let hi = (lo + width).min(124.0);
        let once = fourier::bandpass_channel(&x, lo, hi, fs).unwrap();
        let twice = fourier::bandpass_channel(&once, lo, hi, fs).unwrap();
        prop_assert!(max_abs_diff(&once, &twice) < 1e-9);
    }

    #[test]
    fn coral_is_symmetric_and_nonnegative((d, cells, rows) in feature_sets()) {
        let forward = coral_align_value(&to_set(d, &cells, &rows)).unwrap();
        let mut rc = cells.clone();
        let mut rr = rows.clone();
        rc.reverse();
        rr.reverse();
        let backward = coral_align_value(&to_set(d, &rc, &rr)).unwrap();
        prop_assert!(forward >= 0.0);
        prop_assert!((forward - backward).abs() <= 1e-12 * (1.0 + forward));
    }

    #[test]
    fn coral_ignores_per_domain_shifts((d, cells, rows) in feature_sets(), shift in vec(-50.0f64..50.0, 5)) {
        let base = coral_align_value(&to_set(d, &cells, &rows)).unwrap();
        let moved: Vec<Vec<f64>> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| c.iter().enumerate().map(|(j, v)| v + shift[(i + j % d) % shift.len()]).collect())
            .collect();
        let shifted = coral_align_value(&to_set(d, &moved, &rows)).unwrap();
        prop_assert!((base - shifted).abs() < 1e-9 * (1.0 + base));
    }

    #[test]
    fn ttest_antisymmetric(a in vec(0.0f64..1.0, 2..12), b_seed in vec(0.0f64..1.0, 12)) {
        let b: Vec<f64> = b_seed[..a.len()].to_vec();
        let (Ok(ab), Ok(ba)) = (paired_ttest(&a, &b), paired_ttest(&b, &a)) else {
            return Ok(());
        };
        prop_assert!((ab.t + ba.t).abs() < 1e-12 * (1.0 + ab.t.abs()));
        prop_assert!((ab.p - ba.p).abs() < 1e-12);
        prop_assert!(ab.p >= 0.0 && ab.p <= 1.0);
    }

    #[test]
    fn ttest_p_shrinks_as_shift_grows(d in vec(-1.0f64..1.0, 3..10), s1 in 0.0f64..2.0, s2 in 0.0f64..2.0) {
        let zeros = vec![0.0; d.len()];
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let shifted = |s: f64| d.iter().map(|v| v + s).collect::<Vec<_>>();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        prop_assume!(mean >= 0.0);
        let (Ok(a), Ok(b)) = (paired_ttest(&shifted(lo), &zeros), paired_ttest(&shifted(hi), &zeros)) else {
            return Ok(());
        };
        prop_assert!(b.t >= a.t - 1e-12);
        prop_assert!(b.p <= a.p + 1e-12);
    }

    #[test]
    fn ktrl_round_trip(
        n in 1usize..4,
        m in 2usize..40,
        classes in 2usize..4,
        count in 1usize..12,
        seed in any::<u64>(),
        fs in 1.0f64..1000.0,
    ) {
        use rand::Rng;
        let mut r = support::rng(seed);
        let trials: Vec<(TrialTensor, usize)> = (0..count)
            .map(|i| {
                let data = (0..n * m).map(|_| r.gen_range(-1e6..1e6)).collect();
                (TrialTensor::new(n, m, data).unwrap(), i % classes)
            })
            .collect();
        let ds = DomainDataset::new("prop", fs, (n, m), classes, trials).unwrap();
        let bytes = ds.to_bytes().unwrap();
        let back = DomainDataset::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }
}
