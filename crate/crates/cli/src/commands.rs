//! One function per subcommand; each returns the tables it would write.

use anyhow::{bail, Result};
use vohedge::arithmetic::ArithmeticCoefficients;
use vohedge::fs_engine::FsCoefficients;
use vohedge::montecarlo::{benchmark_sigma, black_scholes, initial_capitals, Backtest, BacktestConfig, BacktestReport};

use crate::config::{Engine, PayoffKind, RunConfig};
use crate::output::Table;
use crate::setup;

pub fn price(cfg: &RunConfig) -> Result<Vec<Table>> {
    let q = setup::quadrature(cfg)?;
    let mut t = Table::new("price.csv", vec!["K", "V0_vo", "IC_bs"]);
    match cfg.engine {
        Engine::Exponential => {
            let c = setup::fs(cfg)?;
            for (k, m) in setup::contour_payoffs(cfg, c.model())? {
                let (vo, bs) = initial_capitals(&c, &m, &q)?;
                t.push(vec![k.into(), vo.into(), bs.into()]);
            }
        }
        Engine::Arithmetic => {
            let c = setup::arithmetic(cfg)?;
            let g = ArithmeticCoefficients::build(setup::gaussian_benchmark(c.model(), false)?, c.x0())?;
            for (k, f) in setup::fourier_payoffs(cfg)? {
                t.push(vec![k.into(), c.initial_capital(&f, &q)?.into(), g.initial_capital(&f, &q)?.into()]);
            }
        }
    }
    Ok(vec![t])
}

pub fn hedge(cfg: &RunConfig) -> Result<Vec<Table>> {
    let q = setup::quadrature(cfg)?;
    let mut t = Table::new("hedge.csv", vec!["K", "xi0_vo", "delta_bs"]);
    match cfg.engine {
        Engine::Exponential => {
            let c = setup::fs(cfg)?;
            let s0 = c.s0();
            let sigma = benchmark_sigma(c.model())?;
            let g = FsCoefficients::build(setup::gaussian_benchmark(c.model(), true)?, s0)?;
            for (k, m) in setup::contour_payoffs(cfg, c.model())? {
                let xi = c.pure_hedge(&m, 0.0, s0, &q)?;
                let delta = match m.closed_form() {
                    Some(cf) => black_scholes(cf, s0, sigma, c.model().horizon()).1,
                    None => g.pure_hedge(&m, 0.0, s0, &q)?,
                };
                t.push(vec![k.into(), xi.into(), delta.into()]);
            }
        }
        Engine::Arithmetic => {
            let c = setup::arithmetic(cfg)?;
            let g = ArithmeticCoefficients::build(setup::gaussian_benchmark(c.model(), false)?, c.x0())?;
            for (k, f) in setup::fourier_payoffs(cfg)? {
                let xi = c.hedge(&f, 0.0, c.x0(), &q)?;
                let delta = g.hedge(&f, 0.0, c.x0(), &q)?;
                t.push(vec![k.into(), xi.into(), delta.into()]);
            }
        }
    }
    Ok(vec![t])
}

pub fn variance(cfg: &RunConfig) -> Result<Vec<Table>> {
    if cfg.engine != Engine::Exponential {
        bail!("the variance command needs engine = exponential");
    }
    let q = setup::quadrature(cfg)?;
    let opts = setup::j0_options(cfg, &q);
    let c = setup::fs(cfg)?;
    let mut t = Table::new("variance.csv", vec!["K", "V0_vo", "J0", "sqrt_J0"]);
    for (k, m) in setup::contour_payoffs(cfg, c.model())? {
        let j0 = c.quadratic_error(&m, &opts)?;
        t.push(vec![k.into(), c.initial_capital(&m, &q)?.into(), j0.into(), j0.max(0.0).sqrt().into()]);
    }
    Ok(vec![t])
}

fn backtest_config(cfg: &RunConfig, n: usize) -> BacktestConfig {
    let b = &cfg.backtest;
    BacktestConfig {
        n_rebalances: n,
        n_paths: b.paths,
        seed: b.seed,
        substeps_per_interval: b.substeps,
        strategies: b.strategies.clone(),
        keep_errors: b.dump_errors,
    }
}

pub fn backtest(cfg: &RunConfig) -> Result<Vec<Table>> {
    let reports: Vec<BacktestReport> = match cfg.engine {
        Engine::Exponential => {
            let c = setup::fs(cfg)?;
            let mut payoffs = setup::contour_payoffs(cfg, c.model())?;
            if payoffs.len() != 1 {
                bail!("backtest needs a single payoff level, got {}", payoffs.len());
            }
            let (_, m) = payoffs.pop().unwrap();
            let opts = setup::plan_options(cfg);
            cfg.backtest
                .n
                .iter()
                .map(|&n| Ok(Backtest::exponential_with(&c, &m, backtest_config(cfg, n), &opts)?.run()?))
                .collect::<Result<_>>()?
        }
        Engine::Arithmetic => {
            let c = setup::arithmetic(cfg)?;
            let mut payoffs = setup::fourier_payoffs(cfg)?;
            if payoffs.len() != 1 {
                bail!("backtest needs a single payoff level, got {}", payoffs.len());
            }
            let (_, f) = payoffs.pop().unwrap();
            cfg.backtest
                .n
                .iter()
                .map(|&n| Ok(Backtest::arithmetic(&c, &f, backtest_config(cfg, n))?.run()?))
                .collect::<Result<_>>()?
        }
    };
    let mut summary = Table::new(
        "backtest.csv",
        vec!["strategy", "N", "paths", "seed", "V0", "mean", "se_mean", "std", "se_std", "skew", "kurt"],
    );
    let mut dumps = Vec::new();
    for r in &reports {
        for s in &r.strategies {
            let st = &s.stats;
            summary.push(vec![
                s.strategy.name().into(),
                r.n_rebalances.into(),
                r.n_paths.into(),
                r.seed.into(),
                s.v0.into(),
                st.mean.into(),
                st.se_mean.into(),
                st.std.into(),
                st.se_std.into(),
                st.skew.into(),
                st.kurt.into(),
            ]);
            if let Some(errors) = &s.errors {
                let mut d = Table::new(format!("errors_{}_{}.csv", s.strategy.name(), r.n_rebalances), vec!["path", "error"]);
                for (i, e) in errors.iter().enumerate() {
                    d.push(vec![i.into(), (*e).into()]);
                }
                dumps.push(d);
            }
        }
    }
    let mut out = vec![summary];
    out.extend(dumps);
    Ok(out)
}

const SPOT_GRID: [f64; 5] = [0.5, 0.8, 1.0, 1.2, 2.0];
const LOG_OFFSETS: [f64; 5] = [-1.0, -0.5, -0.25, 0.25, 0.5];

pub fn payoff_check(cfg: &RunConfig) -> Result<Vec<Table>> {
    let q = setup::quadrature(cfg)?;
    let mut t = Table::new("payoff_check.csv", vec!["K", "point", "reconstructed", "exact", "abs_error"]);
    let explicit = cfg.payoff.check_points.clone();
    match cfg.engine {
        Engine::Exponential => {
            let m = setup::model(cfg)?;
            for (k, meas) in setup::contour_payoffs(cfg, &m)? {
                let anchor = k.unwrap_or(cfg.level0);
                let points = explicit.clone().unwrap_or_else(|| SPOT_GRID.iter().map(|f| f * anchor).collect());
                for s in points {
                    if s <= 0.0 {
                        bail!("payoff.check_points must be positive spots for engine = exponential, got {s}");
                    }
                    let rec = meas.reconstruct(s, &q)?;
                    let exact = meas.payoff(s)?;
                    t.push(vec![k.into(), s.into(), rec.into(), exact.into(), (rec - exact).abs().into()]);
                }
            }
        }
        Engine::Arithmetic => {
            for (k, f) in setup::fourier_payoffs(cfg)? {
                let anchor = match (cfg.payoff.kind, k) {
                    (PayoffKind::Custom, _) | (_, None) => cfg.level0,
                    (_, Some(level)) => level.ln(),
                };
                let points = explicit.clone().unwrap_or_else(|| LOG_OFFSETS.iter().map(|d| anchor + d).collect());
                for x in points {
                    let rec = f.reconstruct(x, &q)?;
                    let exact = f.payoff(x)?;
                    t.push(vec![k.into(), x.into(), rec.into(), exact.into(), (rec - exact).abs().into()]);
                }
            }
        }
    }
    Ok(vec![t])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RawConfig;
    use crate::output::Cell;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::from_raw(&RawConfig::parse(text, "t").unwrap()).unwrap()
    }

    #[test]
    fn custom_forward_hedge_is_one() {
        let c = cfg("model.kind = nig\nmodel.alpha = 38.46\nmodel.beta = -3.85\nmodel.delta = 6.40\nmodel.mu = 0.64\npii.T = 0.25\npayoff.kind = custom\npayoff.atoms = 1:1\n");
        let t = &hedge(&c).unwrap()[0];
        assert_eq!(t.rows[0][0], Cell::Empty);
        assert_eq!(t.rows[0][1], Cell::Num(1.0));
    }

    #[test]
    fn backtest_rejects_strike_grids() {
        let c = cfg("model.kind = brownian\nmodel.sigma = 0.2\npii.T = 0.25\npayoff.K = 90, 100\n");
        assert!(backtest(&c).unwrap_err().to_string().contains("single payoff"));
    }
}
