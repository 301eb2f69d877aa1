use std::sync::Arc;

use agnostic_core::bellman::pde_diagnostics;
use agnostic_core::sim::{paired_difference_under_prior, run_paths};
use agnostic_core::{
    load_field, save_field, solve_bellman_shared, Atom, DiscretePrior, Partition, SolverGrid, Strategy, ValueField,
};

fn grid() -> SolverGrid {
    SolverGrid::with_cfl(4.0, 81, 6.0, 21, 6.0, 11, 1.0, 11, 1.0, 3.0).unwrap()
}

fn two_point() -> DiscretePrior {
    DiscretePrior::new(vec![Atom { a: -1.0, p: 0.5 }, Atom { a: 1.0, p: 0.5 }], 1.0).unwrap()
}

fn field() -> Arc<ValueField> {
    solve_bellman_shared(&two_point(), &grid()).unwrap()
}

#[test]
fn bayes_control_beats_simpler_laws_under_its_prior() {
    let prior = two_point();
    let bayes = Strategy::bayes(field());
    let partition = Partition::uniform(1.0, 500).unwrap();
    for other in [
        Strategy::certainty_equivalent(prior.clone()),
        Strategy::KnownA(-1.0),
        Strategy::KnownA(1.0),
    ] {
        let d = paired_difference_under_prior(&bayes, &other, &prior, &partition, 1.0, 20_000, 12).unwrap();
        assert!(d.mean <= 2.0 * d.std_error, "{}: {} ± {}", other.label(), d.mean, d.std_error);
    }
}

#[test]
fn near_optimal_perturbations_stay_close_to_the_optimal_paths() {
    let f = field();
    let bayes = Strategy::bayes(f.clone());
    let partition = Partition::uniform(1.0, 200).unwrap();
    let n = 2000;
    let base = run_paths(&bayes, 1.0, &partition, 1.0, n, 4).unwrap();
    let mut gaps = Vec::new();
    for delta in [0.1, 0.05, 0.01] {
        let perturbed = Strategy::Offset {
            inner: Box::new(bayes.clone()),
            offset: delta,
        };
        let batch = run_paths(&perturbed, 1.0, &partition, 1.0, n, 4).unwrap();
        let gap = batch.estimate().mean - base.estimate().mean;
        gaps.push(gap.abs());
    }
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn derivative_growth_and_tameness_are_reported() {
    let f = field();
    let diag = pde_diagnostics(&f, 1e6, 2, 2);
    assert!(diag.samples > 0);
    assert_eq!(diag.tame_violations, 0);
    assert!(diag.measured_k.is_finite() && diag.measured_k > 0.0);
    let strict = pde_diagnostics(&f, 1e-9, 0, 2);
    assert!(strict.derivative_violations > 0 && !strict.passes());
}

#[test]
fn saved_fields_reload_bit_exactly() {
    let f = field();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two_point.fld");
    save_field(&f, &path).unwrap();
    let back = load_field(&path).unwrap();
    assert_eq!(back.values(), f.values());
    assert_eq!(back.controls(), f.controls());
    assert_eq!(back.prior(), f.prior());

    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&path, bytes).unwrap();
    assert!(load_field(&path).is_err());
}
