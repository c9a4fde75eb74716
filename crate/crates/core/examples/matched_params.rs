//! Moment-matched NIG parameters and call capitals for a few scales.
//!
//! `cargo run --example matched_params -- 0.08`

use vohedge::cumulants::{Driver, LevyCumulantModel};
use vohedge::fs_engine::FsCoefficients;
use vohedge::payoff::{CallVariant, PayoffMeasure};
use vohedge::pii::PiiModel;
use vohedge::quadrature::LineQuadrature;

fn main() {
    let base = LevyCumulantModel::nig(38.46, -3.85, 6.40, 0.64).unwrap();
    let q = LineQuadrature::default();
    for arg in std::env::args().skip(1) {
        let c: f64 = arg.parse().expect("scale");
        let d = base.reparametrize_moment_matched(c).unwrap();
        let Driver::Nig { alpha, beta, delta, mu } = *d.driver() else { unreachable!() };
        println!("C = {c}: alpha {alpha:.6} beta {beta:.6} delta {delta:.6} mu {mu:.6}");
        let f = FsCoefficients::build(PiiModel::levy(d, 0.25).unwrap(), 100.0).unwrap();
        for k in [60.0, 99.0, 150.0] {
            let v0 = f.initial_capital(&PayoffMeasure::call(k, CallVariant::UnitInterval(0.5)).unwrap(), &q).unwrap();
            println!("  K = {k}: V0 = {v0:.6}");
        }
    }
}
