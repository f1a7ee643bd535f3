//! Small Monte Carlo sanity checks; the full-size runs live in the acceptance target.

use tensor_factor::bench::{run_benchmark, BenchConfig, Estimator};
use tensor_factor::dgp::Setting;

fn quick(setting: Setting, t: usize, est: Vec<Estimator>) -> tensor_factor::bench::BenchResult {
    let mut cfg = BenchConfig::new(setting, vec![20, 20], t, 8, est, 31);
    cfg.timing = false;
    cfg.preaverage.m0 = 60;
    cfg.rank.replicates = 20;
    run_benchmark(&cfg).unwrap()
}

#[test]
fn strong_factors_are_recovered() {
    let res = quick(Setting::Ia, 100, vec![Estimator::PreAveraged, Estimator::Projected, Estimator::Hosvd, Estimator::Hooi]);
    for name in ["pre", "proj", "hosvd", "hooi"] {
        for k in 0..2 {
            let m = res.median_error(name, k);
            assert!(m < 0.5, "{name} mode {k}: {m}");
        }
    }
    assert!(res.records.iter().all(|r| r.failure.is_none()));
    for k in 0..2 {
        assert!(res.median_error("proj", k) < res.median_error("pre", k) + 0.05);
    }
}

#[test]
fn ranks_of_strong_factors() {
    let res = quick(Setting::Ia, 100, vec![Estimator::Bcorth]);
    assert!(res.correct_proportion("bcorth") >= 0.75, "{:?}", res.ranks("bcorth", 0));
}
