use agnostic_core::sim::{paired_from_batches, run_paths, PathBatch};
use agnostic_core::{extend_strategy, known_a_expected_cost, ExtensionParams, Partition, ProblemSpec, Strategy};

const N: usize = 4000;

fn partition() -> Partition {
    Partition::uniform(1.0, 1000).unwrap()
}

fn extended(inner: Strategy) -> Strategy {
    extend_strategy(inner, ExtensionParams::new(1.0, 0.5).unwrap()).unwrap()
}

fn median_switch_time(batch: &PathBatch) -> f64 {
    let mut times = batch.switch_times.clone();
    times.sort_by(f64::total_cmp);
    let n = batch.costs.len();
    if times.len() * 2 <= n {
        return f64::INFINITY;
    }
    times[(n - 1) / 2]
}

#[test]
fn zero_drift_rarely_switches() {
    let batch = run_paths(&extended(Strategy::KnownA(0.0)), 0.0, &partition(), 1.0, N, 3).unwrap();
    assert!(batch.switched_paths * 20 < N, "{} switched", batch.switched_paths);
    assert_eq!(batch.multi_switch_paths, 0);
}

#[test]
fn extension_never_hurts_a_known_drift_law_inside_the_interval() {
    for a in [-1.0, 0.0, 0.5, 1.0] {
        let inner = Strategy::KnownA(a);
        let ext = run_paths(&extended(inner.clone()), a, &partition(), 1.0, N, 4).unwrap();
        let base = run_paths(&inner, a, &partition(), 1.0, N, 4).unwrap();
        let d = paired_from_batches(&ext, &base);
        let allowance = 0.5 * base.estimate().mean;
        assert!(d.mean <= allowance + 2.0 * d.std_error, "a={a}: {d:?}");
    }
}

#[test]
fn detection_speeds_up_with_drift_size() {
    let strategy = extended(Strategy::KnownA(1.0));
    let medians: Vec<f64> = [2.0, 4.0, 8.0]
        .iter()
        .map(|&a| median_switch_time(&run_paths(&strategy, a, &partition(), 1.0, N, 5).unwrap()))
        .collect();
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

#[test]
fn cost_ratio_to_the_informed_optimum_falls_with_drift_size() {
    let strategy = extended(Strategy::KnownA(1.0));
    let ratios: Vec<f64> = [4.0, 8.0, 16.0]
        .iter()
        .map(|&a| {
            let batch = run_paths(&strategy, a, &partition(), 1.0, N, 6).unwrap();
            assert_eq!(batch.blowups(), 0);
            assert_eq!(batch.multi_switch_paths, 0);
            batch.estimate().mean / known_a_expected_cost(&ProblemSpec::new(a, 1.0, 1.0).unwrap()).unwrap()
        })
        .collect();
    assert!(ratios[0] > ratios[1] && ratios[1] > ratios[2], "{ratios:?}");
    assert!(ratios.iter().all(|&r| r >= 1.0));
}
