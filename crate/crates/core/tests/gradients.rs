//! Reverse-mode gradients against central finite differences.

mod support;

use support::{grad_cases, grad_check};

const SEEDS: u64 = 20;
const TOL: f64 = 1e-4;

#[test]
fn every_primitive_matches_finite_differences() {
    let mut failures = Vec::new();
    let mut checked = 0;
    for seed in 0..SEEDS {
        for (name, inputs, build) in grad_cases(seed) {
            let err = grad_check(&inputs, build);
            checked += 1;
            if !(err < TOL) {
                failures.push(format!("{name} seed {seed}: rel err {err:.3e}"));
            }
        }
    }
    assert!(checked >= 20 * 19);
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn composed_loss_covers_all_parameters() {
    for seed in 0..SEEDS {
        let cases = grad_cases(seed);
        let (_, inputs, build) = cases.iter().find(|c| c.0 == "composed_student_loss").unwrap();
        let mut g = knife::diffengine::Graph::new();
        let vars: Vec<_> = inputs.iter().map(|t| g.param(t.clone()).unwrap()).collect();
        let loss = build(&mut g, &vars).unwrap();
        let grads = g.backward(loss).unwrap();
        for v in &vars {
            let gv = grads.get(*v).expect("every input gets a gradient");
            assert!(gv.data().iter().any(|x| *x != 0.0));
        }
    }
}

#[test]
fn checker_detects_a_wrong_gradient() {
    let inputs = vec![support::randn(&mut support::rng(1), &[3, 3])];
    let honest = grad_check(&inputs, |g, v| g.frobenius_sq(v[0]));
    assert!(honest < TOL);
    // Routing the value through a constant drops the gradient; the checker must notice.
    let severed = grad_check(&inputs, |g, v| {
        let frozen = g.constant(g.value(v[0]).clone())?;
        let s = g.frobenius_sq(frozen)?;
        let tiny = g.scale(v[0], 0.0)?;
        let z = g.frobenius_sq(tiny)?;
        g.add(s, z)
    });
    assert!(severed > 0.5);
}
