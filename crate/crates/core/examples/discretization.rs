//! Hedging error variance of the variance-optimal strategy against the
//! number of rebalancing dates, next to the continuous-time error `J0`.

use vohedge::cumulants::LevyCumulantModel;
use vohedge::fs_engine::{FsCoefficients, J0Options};
use vohedge::montecarlo::{run_backtest, BacktestConfig, Strategy};
use vohedge::payoff::{CallVariant, PayoffMeasure};
use vohedge::pii::PiiModel;

fn main() {
    let c: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1.0);
    let paths: usize = std::env::args().nth(2).and_then(|a| a.parse().ok()).unwrap_or(20000);
    let mut d = LevyCumulantModel::nig(38.46, -3.85, 6.40, 0.64).unwrap();
    if c != 1.0 {
        d = d.reparametrize_moment_matched(c).unwrap();
    }
    let coeffs = FsCoefficients::build(PiiModel::levy(d, 0.25).unwrap(), 100.0).unwrap();
    let call = PayoffMeasure::call(99.0, CallVariant::AboveOne(1.5)).unwrap();
    let j0 = coeffs.quadratic_error(&call, &J0Options::default()).unwrap();
    println!("C = {c}, J0 = {j0:.6}");
    println!("{:>6} {:>12} {:>12} {:>12}", "N", "var VO", "se", "var BS");
    for n in [25, 50, 100, 200, 400] {
        let cfg = BacktestConfig { n_rebalances: n, n_paths: paths, seed: 5, strategies: vec![Strategy::Vo, Strategy::Bs], ..Default::default() };
        let r = run_backtest(&coeffs, &call, cfg).unwrap();
        let vo = r.get(Strategy::Vo).unwrap().stats;
        let bs = r.get(Strategy::Bs).unwrap().stats;
        println!("{n:>6} {:>12.5} {:>12.5} {:>12.5}", vo.std * vo.std, 2.0 * vo.std * vo.se_std, bs.std * bs.std);
    }
}
