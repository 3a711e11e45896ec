use proptest::prelude::*;

use heston_american::{
    binomial_american, european_monte_carlo, extract_boundary, fit_boundary, lsm_backward_induction,
    simulate_paths, BoundaryPointCloud, Error, MarketParams, Measure, ModelParams, OptionSpec, SimGrid,
};

fn flat() -> ModelParams<f64> {
    ModelParams::without_risk_premium(2.0, 0.04, 0.0, 0.0, 0.04).unwrap()
}

fn sv() -> ModelParams<f64> {
    ModelParams::without_risk_premium(2.0, 0.04, 0.3, -0.5, 0.04).unwrap()
}

#[test]
fn put_matches_binomial_without_vol_of_vol() {
    let mkt = MarketParams::risk_neutral(0.05, 0.0).unwrap();
    let opt = OptionSpec::put(100.0, 0.5).unwrap();
    let grid = SimGrid::new(100_000, 50, 0.5, 31).unwrap();
    let paths = simulate_paths(&flat(), &mkt, 100.0, &grid, Measure::RiskNeutral).unwrap();
    let lsm = lsm_backward_induction(&paths, &opt).unwrap();
    let want = binomial_american(100.0, 0.2, &opt, &mkt, 2000).unwrap();
    assert!(
        (lsm.price - want).abs() < 3.0 * lsm.stderr,
        "{} +- {} vs {want}",
        lsm.price,
        lsm.stderr
    );
}

#[test]
fn decisions_invariant_under_joint_rescaling() {
    let mkt = MarketParams::risk_neutral(0.05, 0.08).unwrap();
    let grid = SimGrid::new(5_000, 20, 0.5, 2).unwrap();
    let base = simulate_paths(&sv(), &mkt, 100.0, &grid, Measure::RiskNeutral).unwrap();
    let doubled = simulate_paths(&sv(), &mkt, 200.0, &grid, Measure::RiskNeutral).unwrap();
    let a = lsm_backward_induction(&base, &OptionSpec::call(100.0, 0.5).unwrap()).unwrap();
    let b = lsm_backward_induction(&doubled, &OptionSpec::call(200.0, 0.5).unwrap()).unwrap();
    assert_eq!(a.decisions, b.decisions);
    assert_eq!(a.exercise_step, b.exercise_step);
    assert_eq!((2.0 * a.price).to_bits(), b.price.to_bits());
}

#[test]
fn lsm_identical_across_worker_counts() {
    let mkt = MarketParams::risk_neutral(0.05, 0.08).unwrap();
    let opt = OptionSpec::call(100.0, 0.5).unwrap();
    let grid = SimGrid::new(20_000, 20, 0.5, 3).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let paths = simulate_paths(&sv(), &mkt, 100.0, &grid, Measure::RiskNeutral).unwrap();
            let lsm = lsm_backward_induction(&paths, &opt).unwrap();
            let clouds = extract_boundary(&paths, &lsm, &opt).unwrap();
            let curve = fit_boundary(&clouds, &opt, &sv(), &mkt).unwrap();
            (lsm, curve.to_json().unwrap())
        })
    };
    assert_eq!(run(1), run(8));
}

#[test]
fn fitted_boundary_spans_the_exercise_dates() {
    let mkt = MarketParams::risk_neutral(0.05, 0.08).unwrap();
    let opt = OptionSpec::call(100.0, 0.25).unwrap();
    let grid = SimGrid::new(50_000, 25, 0.25, 4).unwrap();
    let paths = simulate_paths(&sv(), &mkt, 110.0, &grid, Measure::RiskNeutral).unwrap();
    let lsm = lsm_backward_induction(&paths, &opt).unwrap();
    let clouds = extract_boundary(&paths, &lsm, &opt).unwrap();
    assert_eq!(clouds.len(), 24);
    let curve = fit_boundary(&clouds, &opt, &sv(), &mkt).unwrap();
    assert_eq!(curve.taus()[0], 0.0);
    assert!((curve.b0()[0] - 100f64.ln()).abs() < 1e-15);
    assert!(curve.taus().windows(2).all(|w| w[0] < w[1]));
    assert!(curve.max_tau() > 0.2 && curve.max_tau() < 0.25);
    // Every point sits above the strike, where exercising a call can pay.
    for c in &clouds {
        assert!(c.points.iter().all(|&(_, s)| s > 100.0));
    }
}

#[test]
fn call_without_dividends_has_no_exercise_region() {
    let mkt = MarketParams::risk_neutral(0.05, 0.0).unwrap();
    let opt = OptionSpec::call(100.0, 0.25).unwrap();
    let grid = SimGrid::new(20_000, 10, 0.25, 5).unwrap();
    let paths = simulate_paths(&sv(), &mkt, 100.0, &grid, Measure::RiskNeutral).unwrap();
    let lsm = lsm_backward_induction(&paths, &opt).unwrap();
    let clouds = extract_boundary(&paths, &lsm, &opt).unwrap();
    assert!(matches!(fit_boundary(&clouds, &opt, &sv(), &mkt), Err(Error::NoExerciseRegion)));
}

#[test]
fn exact_clouds_are_recovered() {
    let mkt = MarketParams::risk_neutral(0.05, 0.08).unwrap();
    let opt = OptionSpec::call(100.0, 1.0).unwrap();
    let levels: Vec<f64> = (0..10).map(|i| 0.02 + 0.01 * i as f64).collect();
    let truth: Vec<(f64, f64, f64)> = (1..=5).map(|i| (0.2 * i as f64, 4.7 + 0.01 * i as f64, 1.0 + i as f64)).collect();
    let clouds: Vec<BoundaryPointCloud<f64>> = truth
        .iter()
        .map(|&(tau, b0, b1)| BoundaryPointCloud {
            step_index: 0,
            tau,
            points: levels.iter().map(|&v| (v, (b0 + b1 * v).exp())).collect(),
            unbounded_levels: vec![],
        })
        .collect();
    let curve = fit_boundary(&clouds, &opt, &sv(), &mkt).unwrap();
    for (i, &(tau, b0, b1)) in truth.iter().enumerate() {
        assert_eq!(curve.taus()[i + 1], tau);
        assert!((curve.b0()[i + 1] - b0).abs() < 1e-12);
        assert!((curve.b1()[i + 1] - b1).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn one_cashflow_and_price_bounds(
        spot in 80.0f64..120.0,
        q in 0.0f64..0.1,
        put in any::<bool>(),
        seed in 0u64..10_000,
    ) {
        let mkt = MarketParams::risk_neutral(0.05, q).unwrap();
        let opt = if put { OptionSpec::put(100.0, 0.5) } else { OptionSpec::call(100.0, 0.5) }.unwrap();
        let grid = SimGrid::new(2_000, 12, 0.5, seed).unwrap();
        let paths = simulate_paths(&sv(), &mkt, spot, &grid, Measure::RiskNeutral).unwrap();
        let lsm = lsm_backward_induction(&paths, &opt).unwrap();
        for (row, cf) in lsm.cashflow_matrix().iter().zip(&lsm.cashflow) {
            prop_assert!(row.iter().filter(|c| **c != 0.0).count() <= 1);
            prop_assert!(*cf >= 0.0);
        }
        // In-sample exercise decisions can cost a little against holding to
        // expiry on the same paths, but only within sampling noise.
        let (eu, _) = european_monte_carlo(&paths, &opt);
        prop_assert!(lsm.price + 3.0 * lsm.stderr >= eu, "{} +- {} vs {eu}", lsm.price, lsm.stderr);
    }
}
