use proptest::prelude::*;

use heston_american::simulate::correlated_shocks;
use heston_american::{
    european_call_heston, gaussian_pair_stream, simulate_paths, simulate_terminal, MarketParams, Measure,
    ModelParams, QuadratureSpec, SimGrid,
};

fn sv() -> ModelParams<f64> {
    ModelParams::without_risk_premium(2.0, 0.04, 0.3, -0.5, 0.04).unwrap()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let (ma, _) = mean_se(a);
    let (mb, _) = mean_se(b);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn normal_stream_moments() {
    let n = 1_000_000;
    let draws: Vec<f64> = gaussian_pair_stream::<f64>(3, 0).take(n / 2).flat_map(|(a, b)| [a, b]).collect();
    let (mean, se) = mean_se(&draws);
    assert!(mean.abs() < 4.0 * se, "mean {mean}");
    let var = draws.iter().map(|x| x * x).sum::<f64>() / n as f64;
    // Var of x^2 is 2, so the sample second moment has sd sqrt(2/n).
    assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt(), "var {var}");
    let kurt = draws.iter().map(|x| x.powi(4)).sum::<f64>() / n as f64;
    assert!((kurt - 3.0).abs() < 0.05, "fourth moment {kurt}");
}

#[test]
fn streams_are_uncorrelated() {
    let n = 100_000;
    let a: Vec<(f64, f64)> = gaussian_pair_stream(3, 0).take(n).collect();
    let b: Vec<(f64, f64)> = gaussian_pair_stream(3, 1).take(n).collect();
    let c: Vec<(f64, f64)> = gaussian_pair_stream(4, 0).take(n).collect();
    let first = |v: &[(f64, f64)]| v.iter().map(|p| p.0).collect::<Vec<_>>();
    let second = |v: &[(f64, f64)]| v.iter().map(|p| p.1).collect::<Vec<_>>();
    let bound = 4.0 / (n as f64).sqrt();
    assert!(corr(&first(&a), &first(&b)).abs() < bound);
    assert!(corr(&first(&a), &first(&c)).abs() < bound);
    assert!(corr(&first(&a), &second(&a)).abs() < bound);
    // Lag-one autocorrelation within a stream.
    let fa = first(&a);
    assert!(corr(&fa[1..], &fa[..n - 1]).abs() < bound);
}

#[test]
fn shock_correlation() {
    let n = 100_000;
    let pairs: Vec<(f64, f64)> = gaussian_pair_stream(9, 0).take(n).collect();
    for rho in [-1.0, -0.5, 0.0, 0.7, 1.0] {
        let (e1, e2): (Vec<f64>, Vec<f64>) = pairs.iter().map(|&(z1, z2)| correlated_shocks(rho, z1, z2)).unzip();
        let tol = if rho.abs() == 1.0 { 1e-3 } else { 4.0 * (1.0 - rho * rho) / (n as f64).sqrt() + 1e-3 };
        let c = corr(&e1, &e2);
        assert!((c - rho).abs() < tol, "rho {rho}: {c}");
    }
}

#[test]
fn discounted_price_is_a_martingale() {
    let m = sv();
    let mkt = MarketParams::new(0.05, 0.02, 0.11).unwrap();
    let grid = SimGrid::new(200_000, 50, 1.0, 12).unwrap();
    for (measure, growth) in [(Measure::RiskNeutral, 0.03f64), (Measure::Physical, 0.11)] {
        let term = simulate_terminal(&m, &mkt, 100.0, &grid, measure).unwrap();
        let disc: Vec<f64> = term.iter().map(|(s, _)| s * (-growth).exp()).collect();
        let (mean, se) = mean_se(&disc);
        assert!((mean - 100.0).abs() < 3.0 * se, "{measure:?}: {mean} +- {se}");
    }
}

#[test]
fn terminal_only_matches_full_paths() {
    let (m, mkt) = (sv(), MarketParams::risk_neutral(0.05, 0.02).unwrap());
    let grid = SimGrid::new(500, 20, 0.5, 4).unwrap();
    let full = simulate_paths(&m, &mkt, 100.0, &grid, Measure::RiskNeutral).unwrap();
    let term = simulate_terminal(&m, &mkt, 100.0, &grid, Measure::RiskNeutral).unwrap();
    for (i, &(s, v)) in term.iter().enumerate() {
        assert_eq!(s.to_bits(), full.price(i, 20).to_bits());
        assert_eq!(v.to_bits(), full.variance(i, 20).to_bits());
    }
}

#[test]
fn fine_grid_matches_the_transform_price() {
    let (m, mkt) = (sv(), MarketParams::risk_neutral(0.05, 0.02).unwrap());
    let exact = european_call_heston(100.0, 0.04, 0.5, 100.0, &m, &mkt, &QuadratureSpec::default()).unwrap();
    let grid = SimGrid::new(200_000, 64, 0.5, 77).unwrap();
    let term = simulate_terminal(&m, &mkt, 100.0, &grid, Measure::RiskNeutral).unwrap();
    let pay: Vec<f64> = term.iter().map(|(s, _)| (s - 100.0).max(0.0) * (-0.025f64).exp()).collect();
    let (mean, se) = mean_se(&pay);
    assert!((mean - exact).abs() < 3.0 * se, "{mean} +- {se} vs {exact}");
}

#[test]
fn antithetic_pairs_mirror_the_first_step() {
    let (m, mkt) = (sv(), MarketParams::risk_neutral(0.05, 0.02).unwrap());
    let grid = SimGrid::new(8, 4, 1.0, 5).unwrap().with_antithetic(true);
    let p = simulate_paths(&m, &mkt, 100.0, &grid, Measure::RiskNeutral).unwrap();
    let centre = 100.0 * (1.0 + 0.03 * 0.25);
    for i in (0..8).step_by(2) {
        let avg = 0.5 * (p.price(i, 1) + p.price(i + 1, 1));
        assert!((avg - centre).abs() < 1e-12, "{avg}");
    }
}

#[test]
fn identical_across_worker_counts() {
    let (m, mkt) = (sv(), MarketParams::risk_neutral(0.05, 0.02).unwrap());
    let grid = SimGrid::new(3_000, 25, 1.0, 8).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_paths(&m, &mkt, 100.0, &grid, Measure::RiskNeutral).unwrap())
    };
    assert_eq!(run(1), run(8));
}

#[test]
fn csv_dump_layout() {
    let (m, mkt) = (sv(), MarketParams::risk_neutral(0.05, 0.02).unwrap());
    let grid = SimGrid::new(2, 3, 1.0, 1).unwrap();
    let p = simulate_paths(&m, &mkt, 100.0, &grid, Measure::RiskNeutral).unwrap();
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "path,step,time,S,V");
    assert_eq!(lines.len(), 1 + 2 * 4);
    assert!(lines[1].starts_with("0,0,0,100,"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn full_truncation_keeps_stored_variance_non_negative(
        kappa in 0.2f64..3.0,
        theta in 0.01f64..0.1,
        xi in 1.0f64..2.0,
        rho in -0.95f64..0.95,
        seed in 0u64..1000,
    ) {
        // xi >= 1 with theta <= 0.1 and kappa <= 3 always violates 2 kappa theta > xi^2.
        let m = ModelParams::without_risk_premium(kappa, theta, xi, rho, theta).unwrap();
        let mkt = MarketParams::risk_neutral(0.03, 0.0).unwrap();
        let grid = SimGrid::new(200, 50, 1.0, seed).unwrap();
        let p = simulate_paths(&m, &mkt, 100.0, &grid, Measure::RiskNeutral).unwrap();
        for i in 0..p.n_paths() {
            prop_assert!(p.variance_path(i).iter().all(|&v| v >= 0.0));
            prop_assert!(p.price_path(i).iter().all(|&s| s > 0.0 && s.is_finite()));
        }
    }
}
