//! Monte-Carlo backtest and sampler behaviour.

use vohedge::cumulants::LevyCumulantModel;
use vohedge::fs_engine::FsCoefficients;
use vohedge::montecarlo::sampling::{path_rng, sample_levy_increment};
use vohedge::montecarlo::stats::k_statistics;
use vohedge::montecarlo::{run_backtest, BacktestConfig, Strategy};
use vohedge::payoff::{CallVariant, PayoffMeasure};
use vohedge::pii::{Kernel, PiiModel, Tabulated};

const T: f64 = 0.25;

fn call(k: f64) -> PayoffMeasure {
    PayoffMeasure::call(k, CallVariant::AboveOne(1.5)).unwrap()
}

fn cfg(n: usize, paths: usize, seed: u64) -> BacktestConfig {
    BacktestConfig { n_rebalances: n, n_paths: paths, seed, ..Default::default() }
}

#[test]
fn complete_toy_model_error_vanishes_with_rebalancing() {
    let psi = Tabulated::new(&[(0.0, 0.0), (T, T)]).unwrap();
    let c = FsCoefficients::build(PiiModel::time_changed_brownian(psi, T).unwrap(), 100.0).unwrap();
    let stds: Vec<f64> = [12, 50, 200]
        .iter()
        .map(|&n| {
            let r = run_backtest(&c, &call(100.0), BacktestConfig { strategies: vec![Strategy::Vo], ..cfg(n, 4000, 3) }).unwrap();
            r.get(Strategy::Vo).unwrap().stats.std
        })
        .collect();
    assert!(stds[0] > stds[1] && stds[1] > stds[2], "{stds:?}");
    // discrete rebalancing error of a complete market shrinks like N^(-1/2)
    for (i, n) in [(1, 50.0), (2, 200.0)] {
        let expected = (12.0f64 / n).sqrt();
        assert!((stds[i] / stds[0] / expected - 1.0).abs() < 0.1, "{stds:?}");
    }
}

#[test]
fn gaussian_model_strategies_coincide() {
    let m = PiiModel::levy(LevyCumulantModel::brownian(0.4, -0.08).unwrap(), T).unwrap();
    let c = FsCoefficients::build(m, 100.0).unwrap();
    for n in [4, 12, 50] {
        let r = run_backtest(&c, &call(100.0), cfg(n, 3000, 11)).unwrap();
        let vo = r.get(Strategy::Vo).unwrap();
        let bs = r.get(Strategy::Bs).unwrap();
        let se = vo.stats.se_std.hypot(bs.stats.se_std);
        assert!((vo.stats.std - bs.stats.std).abs() < 2.0 * se, "N={n}: {} vs {}", vo.stats.std, bs.stats.std);
        let se_mean = vo.stats.se_mean.hypot(bs.stats.se_mean);
        assert!((vo.stats.mean - bs.stats.mean).abs() < 2.0 * se_mean, "N={n}");
    }
}

#[test]
fn variance_optimal_error_is_unbiased() {
    let nig = LevyCumulantModel::nig(38.46, -3.85, 6.40, 0.64).unwrap();
    let c = FsCoefficients::build(PiiModel::levy(nig, T).unwrap(), 100.0).unwrap();
    for n in [12, 50] {
        let r = run_backtest(&c, &call(99.0), BacktestConfig { strategies: vec![Strategy::Vo], ..cfg(n, 5000, 21) }).unwrap();
        let s = r.get(Strategy::Vo).unwrap().stats;
        assert!(s.mean.abs() < 4.0 * s.se_mean, "N={n}: mean {} se {}", s.mean, s.se_mean);
    }
}

#[test]
fn substep_doubling_is_within_one_standard_error() {
    let nig = LevyCumulantModel::nig(38.46, -3.85, 6.40, 0.64).unwrap();
    let kernel = Kernel::Exponential { scale: 0.8, rate: 3.0, anchor: T };
    let m = PiiModel::wiener(nig, kernel.clone(), T).unwrap();
    let c = FsCoefficients::build(m, 100.0).unwrap();
    let run = |sub: usize| {
        let r = run_backtest(
            &c,
            &call(100.0),
            BacktestConfig { substeps_per_interval: sub, strategies: vec![Strategy::Vo], ..cfg(12, 5000, 8) },
        )
        .unwrap();
        r.get(Strategy::Vo).unwrap().stats
    };
    let (a, b) = (run(32), run(64));

    // The two runs draw different paths, so their gap is mostly noise. The
    // scheme's own bias is the gap between the midpoint sums of l^2 and l^4
    // (the variance and fourth cumulant of the increments) and their exact
    // integrals, well below one standard error.
    let (l, r) = (3.0f64, 0.8f64);
    let exact = |p: i32| r.powi(p) * (1.0 - (-(p as f64) * l * T).exp()) / (p as f64 * l);
    let midpoint = |p: i32, sub: usize| {
        let h = T / (12 * sub) as f64;
        (0..12 * sub).map(|j| h * kernel.eval((j as f64 + 0.5) * h).powi(p)).sum::<f64>()
    };
    for p in [2, 4] {
        let rel = (midpoint(p, 32) / exact(p) - 1.0).abs();
        // std moves by about half the relative variance change
        assert!(0.5 * rel * b.std < 0.01 * b.se_std, "order {p}: relative bias {rel:e}");
    }
    let se = a.se_std.hypot(b.se_std);
    assert!((a.std - b.std).abs() < 3.0 * se, "{} vs {} (se {se})", a.std, b.std);
}

/// `k`-statistics of `n` increments against the driver cumulants, in
/// units of their asymptotic standard errors.
fn cumulant_z_scores(d: &LevyCumulantModel, dt: f64, n: usize, seed: u64) -> [f64; 2] {
    let mut rng = path_rng(seed, 0);
    let xs: Vec<f64> = (0..n).map(|_| sample_levy_increment(d, dt, &mut rng)).collect();
    let k = k_statistics(&xs).unwrap();
    let c = d.derivatives_at_zero(4).unwrap();
    let (c2, c4) = (c[1] * dt, c[3] * dt);
    let nf = n as f64;
    let se_mean = (c2 / nf).sqrt();
    let se_var = ((2.0 * c2 * c2 + c4) / nf).sqrt();
    [(k[0] - c[0] * dt) / se_mean, (k[1] - c2) / se_var]
}

#[test]
fn sampler_laws() {
    let nig = LevyCumulantModel::nig(38.46, -3.85, 6.40, 0.64).unwrap();
    assert!((nig.derivatives_at_zero(2).unwrap()[1] - 0.169).abs() < 5e-4);
    for (d, dt) in [
        (nig, 1.0),
        (LevyCumulantModel::brownian(0.3, 0.05).unwrap(), 0.5),
        (LevyCumulantModel::poisson(3.0).unwrap(), 0.2),
        (LevyCumulantModel::variance_gamma(20.0, -1.0, 10.0, 0.1).unwrap(), 0.25),
    ] {
        for z in cumulant_z_scores(&d, dt, 1_000_000, 17) {
            assert!(z.abs() < 4.0, "{:?}: z-score {z}", d.driver());
        }
    }
}
