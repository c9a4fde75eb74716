//! Path simulation and discrete-rebalancing backtests.
//!
//! All strategies of a backtest run on the same simulated paths. Path `k`
//! draws from its own ChaCha stream `(seed, k)`, so results are identical
//! for any number of worker threads.

pub mod plan;
pub mod sampling;
pub mod stats;

use std::sync::Arc;

use rayon::prelude::*;

use crate::arithmetic::{ArithPlanOptions, ArithmeticCoefficients};
use crate::cumulants::LevyCumulantModel;
use crate::error::{invalid, Result};
use crate::fs_engine::{FsCoefficients, PlanOptions};
use crate::payoff::{ClosedForm, FourierMeasure, PayoffMeasure};
use crate::pii::PiiModel;
use crate::quadrature::LineQuadrature;
use plan::{HedgePlan, StepValues};
use sampling::{path_rng, PathSampler};
pub use stats::{error_statistics, MomentBlock};

/// Hedging strategies compared in a backtest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Variance-optimal capital and strategy.
    Vo,
    /// Delta hedge of a Gaussian model with the same variance.
    Bs,
    /// Variance-optimal strategy started from the Gaussian capital.
    VoWithBsCapital,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Vo, Strategy::Bs, Strategy::VoWithBsCapital];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Vo => "VO",
            Strategy::Bs => "BS",
            Strategy::VoWithBsCapital => "VO_with_BS_capital",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub n_rebalances: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// Substeps per rebalancing interval for inhomogeneous kinds.
    pub substeps_per_interval: usize,
    pub strategies: Vec<Strategy>,
    /// Keep per-path errors in the report.
    pub keep_errors: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            n_rebalances: 12,
            n_paths: 5000,
            seed: 0,
            substeps_per_interval: 64,
            strategies: Strategy::ALL.to_vec(),
            keep_errors: false,
        }
    }
}

impl BacktestConfig {
    fn validate(&self) -> Result<()> {
        if self.n_rebalances == 0 {
            return Err(invalid("n_rebalances must be at least 1"));
        }
        if self.n_paths < 2 {
            return Err(invalid("n_paths must be at least 2"));
        }
        if self.substeps_per_interval == 0 {
            return Err(invalid("substeps_per_interval must be at least 1"));
        }
        if self.strategies.is_empty() {
            return Err(invalid("no strategy selected"));
        }
        Ok(())
    }

    /// Rebalancing dates `t_i = i T / N`, `i < N`.
    pub fn dates(&self, horizon: f64) -> Vec<f64> {
        (0..self.n_rebalances).map(|i| horizon * i as f64 / self.n_rebalances as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyReport {
    pub strategy: Strategy,
    pub v0: f64,
    pub stats: MomentBlock,
    pub errors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub n_rebalances: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub strategies: Vec<StrategyReport>,
}

impl BacktestReport {
    pub fn get(&self, s: Strategy) -> Option<&StrategyReport> {
        self.strategies.iter().find(|r| r.strategy == s)
    }

    /// Ratio of error standard deviations `std(a) / std(b)`.
    pub fn std_ratio(&self, a: Strategy, b: Strategy) -> Option<f64> {
        Some(self.get(a)?.stats.std / self.get(b)?.stats.std)
    }
}

/// How the simulated additive process maps to the traded level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelMap {
    /// `S = s0 exp(X)`.
    Exponential { s0: f64 },
    /// `S = x0 + X`.
    Arithmetic { x0: f64 },
}

impl LevelMap {
    #[inline]
    fn level(self, x: f64) -> f64 {
        match self {
            LevelMap::Exponential { s0 } => s0 * x.exp(),
            LevelMap::Arithmetic { x0 } => x0 + x,
        }
    }
}

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Zero-rate Black-Scholes call or put value and delta.
pub fn black_scholes(cf: ClosedForm, s: f64, sigma: f64, tau: f64) -> (f64, f64) {
    let (k, call) = match cf {
        ClosedForm::Call { strike } => (strike, true),
        ClosedForm::Put { strike } => (strike, false),
    };
    let v = sigma * tau.sqrt();
    if !(v > 0.0) {
        let intrinsic = if call { (s - k).max(0.0) } else { (k - s).max(0.0) };
        let delta = match (call, s > k) {
            (true, true) => 1.0,
            (false, false) => -1.0,
            _ => 0.0,
        };
        return (intrinsic, delta);
    }
    let d1 = (s / k).ln() / v + 0.5 * v;
    let d2 = d1 - v;
    if call {
        (s * norm_cdf(d1) - k * norm_cdf(d2), norm_cdf(d1))
    } else {
        (k * norm_cdf(-d2) - s * norm_cdf(-d1), norm_cdf(d1) - 1.0)
    }
}

/// Closed-form Black-Scholes delta hedge of a call or put.
pub struct BlackScholesPlan {
    dates: Vec<f64>,
    horizon: f64,
    sigma: f64,
    claim: ClosedForm,
    v0: f64,
}

impl BlackScholesPlan {
    pub fn new(claim: ClosedForm, s0: f64, sigma: f64, dates: Vec<f64>, horizon: f64) -> Self {
        let v0 = black_scholes(claim, s0, sigma, horizon - dates[0]).0;
        Self { dates, horizon, sigma, claim, v0 }
    }
}

impl HedgePlan for BlackScholesPlan {
    fn dates(&self) -> &[f64] {
        &self.dates
    }

    fn initial_capital(&self) -> f64 {
        self.v0
    }

    fn evaluate(&self, i: usize, level: f64) -> StepValues {
        let (price, hedge) = black_scholes(self.claim, level, self.sigma, self.horizon - self.dates[i]);
        StepValues { price, hedge, feedback: 0.0 }
    }

    fn payoff(&self, level: f64) -> f64 {
        self.claim.eval(level)
    }
}

/// Volatility of the Gaussian benchmark: `sqrt(Var(X_T) / T)`.
pub fn benchmark_sigma(model: &PiiModel) -> Result<f64> {
    let t = model.horizon();
    Ok((model.variance(t)? / t).sqrt())
}

/// Paths, plans and strategies of one backtest.
pub struct Backtest {
    sampler: PathSampler,
    map: LevelMap,
    plans: Vec<Arc<dyn HedgePlan>>,
    /// Strategy, plan index and initial capital.
    legs: Vec<(Strategy, usize, f64)>,
    config: BacktestConfig,
}

impl Backtest {
    /// Generic constructor; `legs` refer to `plans` by index.
    pub fn new(
        model: PiiModel,
        map: LevelMap,
        plans: Vec<Arc<dyn HedgePlan>>,
        legs: Vec<(Strategy, usize, f64)>,
        config: BacktestConfig,
    ) -> Result<Self> {
        config.validate()?;
        let dates = config.dates(model.horizon());
        for p in &plans {
            if p.dates() != dates.as_slice() {
                return Err(invalid("plan dates differ from the backtest dates"));
            }
        }
        if legs.iter().any(|l| l.1 >= plans.len()) {
            return Err(invalid("strategy refers to a missing plan"));
        }
        let mut grid = dates;
        grid.push(model.horizon());
        let sampler = PathSampler::new(model, grid, config.substeps_per_interval)?;
        Ok(Self { sampler, map, plans, legs, config })
    }

    /// Exponential model `S = s0 exp(X)` hedging `f(S_T)`.
    pub fn exponential(coeffs: &FsCoefficients, measure: &PayoffMeasure, config: BacktestConfig) -> Result<Self> {
        Self::exponential_with(coeffs, measure, config, &PlanOptions::default())
    }

    pub fn exponential_with(
        coeffs: &FsCoefficients,
        measure: &PayoffMeasure,
        config: BacktestConfig,
        opts: &PlanOptions,
    ) -> Result<Self> {
        config.validate()?;
        let model = coeffs.model().clone();
        let t_end = model.horizon();
        let s0 = coeffs.s0();
        let dates = config.dates(t_end);
        let need_vo = config.strategies.iter().any(|s| *s != Strategy::Bs);
        let need_bs = config.strategies.iter().any(|s| *s != Strategy::Vo);
        let mut plans: Vec<Arc<dyn HedgePlan>> = Vec::new();
        let mut vo_idx = None;
        if need_vo {
            plans.push(Arc::new(coeffs.hedge_plan(measure, &dates, opts)?));
            vo_idx = Some(plans.len() - 1);
        }
        let mut bs_idx = None;
        if need_bs {
            let sigma = benchmark_sigma(&model)?;
            let plan: Arc<dyn HedgePlan> = match measure.closed_form() {
                Some(cf) => Arc::new(BlackScholesPlan::new(cf, s0, sigma, dates.clone(), t_end)),
                None => {
                    let g = PiiModel::levy(LevyCumulantModel::brownian(sigma, -0.5 * sigma * sigma)?, t_end)?;
                    Arc::new(FsCoefficients::build(g, s0)?.hedge_plan(measure, &dates, opts)?)
                }
            };
            plans.push(plan);
            bs_idx = Some(plans.len() - 1);
        }
        let legs = Self::legs(&config, &plans, vo_idx, bs_idx);
        Self::new(model, LevelMap::Exponential { s0 }, plans, legs, config)
    }

    /// Arithmetic model `S = x0 + X` hedging `f(S_T)`.
    pub fn arithmetic(coeffs: &ArithmeticCoefficients, fourier: &FourierMeasure, config: BacktestConfig) -> Result<Self> {
        config.validate()?;
        let model = coeffs.model().clone();
        let t_end = model.horizon();
        let dates = config.dates(t_end);
        let opts = ArithPlanOptions::default();
        let mut plans: Vec<Arc<dyn HedgePlan>> = Vec::new();
        let mut vo_idx = None;
        if config.strategies.iter().any(|s| *s != Strategy::Bs) {
            plans.push(Arc::new(coeffs.hedge_plan(fourier, &dates, &opts)?));
            vo_idx = Some(plans.len() - 1);
        }
        let mut bs_idx = None;
        if config.strategies.iter().any(|s| *s != Strategy::Vo) {
            let sigma = benchmark_sigma(&model)?;
            let g = PiiModel::levy(LevyCumulantModel::brownian(sigma, 0.0)?, t_end)?;
            plans.push(Arc::new(ArithmeticCoefficients::build(g, coeffs.x0())?.hedge_plan(fourier, &dates, &opts)?));
            bs_idx = Some(plans.len() - 1);
        }
        let legs = Self::legs(&config, &plans, vo_idx, bs_idx);
        Self::new(model, LevelMap::Arithmetic { x0: coeffs.x0() }, plans, legs, config)
    }

    fn legs(
        config: &BacktestConfig,
        plans: &[Arc<dyn HedgePlan>],
        vo: Option<usize>,
        bs: Option<usize>,
    ) -> Vec<(Strategy, usize, f64)> {
        config
            .strategies
            .iter()
            .map(|&s| match s {
                Strategy::Vo => (s, vo.unwrap(), plans[vo.unwrap()].initial_capital()),
                Strategy::Bs => (s, bs.unwrap(), plans[bs.unwrap()].initial_capital()),
                Strategy::VoWithBsCapital => (s, vo.unwrap(), plans[bs.unwrap()].initial_capital()),
            })
            .collect()
    }

    pub fn run(&self) -> Result<BacktestReport> {
        let n_legs = self.legs.len();
        let grid_len = self.config.n_rebalances + 1;
        let rows: Vec<Vec<f64>> = (0..self.config.n_paths as u64)
            .into_par_iter()
            .map_init(
                || (vec![0.0; grid_len], Vec::new()),
                |(x, vals), k| {
                    let mut out = vec![0.0; n_legs];
                    self.path_errors(k, x, vals, &mut out);
                    out
                },
            )
            .collect();
        let mut strategies = Vec::with_capacity(n_legs);
        for (j, leg) in self.legs.iter().enumerate() {
            let errors: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let stats = error_statistics(&errors)?;
            strategies.push(StrategyReport {
                strategy: leg.0,
                v0: leg.2,
                stats,
                errors: self.config.keep_errors.then_some(errors),
            });
        }
        Ok(BacktestReport {
            n_rebalances: self.config.n_rebalances,
            n_paths: self.config.n_paths,
            seed: self.config.seed,
            strategies,
        })
    }

    /// Terminal errors of every leg along path `index`. Each plan is
    /// evaluated once per date and shared between legs.
    fn path_errors(&self, index: u64, x: &mut [f64], cache: &mut Vec<Vec<StepValues>>, out: &mut [f64]) {
        let mut rng = path_rng(self.config.seed, index);
        self.sampler.sample_into(&mut rng, x);
        let n = self.config.n_rebalances;
        let levels: Vec<f64> = x.iter().map(|&v| self.map.level(v)).collect();
        cache.resize(self.plans.len(), Vec::new());
        for (p, c) in self.plans.iter().zip(cache.iter_mut()) {
            c.clear();
            c.extend((0..n).map(|i| p.evaluate(i, levels[i])));
        }
        for (leg, slot) in self.legs.iter().zip(out.iter_mut()) {
            let vals = &cache[leg.1];
            let v0 = leg.2;
            let mut gains = 0.0;
            for i in 0..n {
                let v = vals[i];
                let phi = v.hedge + v.feedback * (v.price - v0 - gains);
                gains += phi * (levels[i + 1] - levels[i]);
            }
            *slot = v0 + gains - self.plans[leg.1].payoff(levels[n]);
        }
    }
}

/// Runs a backtest of an exponential model with default plan options.
pub fn run_backtest(coeffs: &FsCoefficients, measure: &PayoffMeasure, config: BacktestConfig) -> Result<BacktestReport> {
    Backtest::exponential(coeffs, measure, config)?.run()
}

/// Initial capitals of the variance-optimal and Gaussian strategies.
pub fn initial_capitals(coeffs: &FsCoefficients, measure: &PayoffMeasure, q: &LineQuadrature) -> Result<(f64, f64)> {
    let vo = coeffs.initial_capital(measure, q)?;
    let model = coeffs.model();
    let sigma = benchmark_sigma(model)?;
    let bs = match measure.closed_form() {
        Some(cf) => black_scholes(cf, coeffs.s0(), sigma, model.horizon()).0,
        None => {
            let g = PiiModel::levy(LevyCumulantModel::brownian(sigma, -0.5 * sigma * sigma)?, model.horizon())?;
            FsCoefficients::build(g, coeffs.s0())?.initial_capital(measure, q)?
        }
    };
    Ok((vo, bs))
}
