//! Library routines against independent reference implementations.

mod support;

use knife::eval::{paired_ttest, t_two_sided_p};
use knife::fourier;
use knife::losses::{coral_align_value, DomainFeatureSet};
use rand::Rng;
use support::*;

#[test]
fn dft_matches_definition() {
    let mut r = rng(11);
    for _ in 0..100 {
        let m = r.gen_range(16..=128);
        let x = signal(&mut r, m);
        let s = fourier::dft(&x).unwrap();
        for (k, (re, im)) in naive_dft(&x).into_iter().enumerate() {
            let (a, p) = (s.amplitude[k], s.phase[k]);
            assert!((a * p.cos() - re).abs() < 1e-10, "m {m} bin {k}");
            assert!((a * p.sin() - im).abs() < 1e-10, "m {m} bin {k}");
        }
    }
}

#[test]
fn coral_matches_double_loop() {
    let mut r = rng(12);
    for _ in 0..50 {
        let nd = r.gen_range(2..=5);
        let d = r.gen_range(1..=8);
        let domains: Vec<Vec<Vec<f64>>> = (0..nd)
            .map(|_| {
                let n = r.gen_range(2..=16);
                (0..n).map(|_| (0..d).map(|_| r.gen_range(-2.0..2.0)).collect()).collect()
            })
            .collect();
        let set = DomainFeatureSet::new(domains.iter().map(|m| to_tensor(m)).collect()).unwrap();
        let got = coral_align_value(&set).unwrap();
        let want = coral_double_loop(&domains);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn coral_zero_on_identical_domains() {
    let mut r = rng(13);
    let m: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    let set = DomainFeatureSet::new(vec![to_tensor(&m), to_tensor(&m), to_tensor(&m)]).unwrap();
    assert!(coral_align_value(&set).unwrap().abs() < 1e-15);
}

#[test]
fn ttest_matches_quadrature() {
    let mut r = rng(14);
    let mut compared = 0;
    while compared < 20 {
        let n = r.gen_range(2..=10);
        let a: Vec<f64> = (0..n).map(|_| r.gen_range(0.4..0.9)).collect();
        let b: Vec<f64> = a.iter().map(|v| v + r.gen_range(-0.1..0.08)).collect();
        let Ok(t) = paired_ttest(&a, &b) else { continue };
        let oracle = t_two_sided_quadrature(t.t, t.df as f64);
        assert!((t.p - oracle).abs() < 1e-6, "n {n}: {} vs {oracle}", t.p);
        compared += 1;
    }
}

#[test]
fn t_tail_matches_quadrature_on_a_grid() {
    for nu in 1..=30 {
        for t in [0.05, 0.5, 1.0, 2.0, 3.5, 8.0] {
            let got = t_two_sided_p(t, nu as f64);
            let want = t_two_sided_quadrature(t, nu as f64);
            assert!((got - want).abs() < 1e-6, "nu {nu} t {t}: {got} vs {want}");
        }
    }
}
