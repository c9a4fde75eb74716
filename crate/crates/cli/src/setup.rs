//! Turns a validated [`RunConfig`] into engine objects.

use anyhow::{bail, Context, Result};
use vohedge::arithmetic::ArithmeticCoefficients;
use vohedge::cumulants::LevyCumulantModel;
use vohedge::fs_engine::{FsCoefficients, J0Options, PlanOptions};
use vohedge::payoff::{CallVariant, FourierMeasure, PayoffMeasure};
use vohedge::pii::{Kernel, PiiModel, Tabulated, TwoFactorParams};
use vohedge::quadrature::LineQuadrature;
use vohedge::{Complex64, HedgeError};

use crate::config::{DriverSpec, KernelSpec, PayoffKind, PiiSpec, RunConfig, VariantSpec};

pub fn driver(cfg: &RunConfig) -> Result<Option<LevyCumulantModel>> {
    let Some(spec) = &cfg.model else { return Ok(None) };
    let d = match spec.driver {
        DriverSpec::Nig { alpha, beta, delta, mu } => LevyCumulantModel::nig(alpha, beta, delta, mu)?,
        DriverSpec::VarianceGamma { alpha, beta, delta, mu } => LevyCumulantModel::variance_gamma(alpha, beta, delta, mu)?,
        DriverSpec::Poisson { lambda_p } => LevyCumulantModel::poisson(lambda_p)?,
        DriverSpec::Brownian { sigma, m } => LevyCumulantModel::brownian(sigma, m)?,
    };
    Ok(Some(match spec.scale {
        Some(c) => d.reparametrize_moment_matched(c).context("moment-matched rescaling")?,
        None => d,
    }))
}

pub fn model(cfg: &RunConfig) -> Result<PiiModel> {
    let drv = driver(cfg)?;
    let t = cfg.horizon;
    let m = match &cfg.pii {
        PiiSpec::Levy => PiiModel::levy(drv.unwrap(), t)?,
        PiiSpec::Wiener { kernel } => {
            let k = match kernel {
                KernelSpec::Constant(c) => Kernel::Constant(*c),
                KernelSpec::Table(pts) => Kernel::Table(Tabulated::new(pts)?),
            };
            PiiModel::wiener(drv.unwrap(), k, t)?
        }
        PiiSpec::TwoFactor { sigma_s, lambda_mr, sigma_l, delivery, trend } => {
            let trend = trend.as_ref().map(|pts| Tabulated::new(pts)).transpose()?;
            let params =
                TwoFactorParams { sigma_s: *sigma_s, lambda_mr: *lambda_mr, sigma_l: *sigma_l, delivery: *delivery, trend };
            PiiModel::two_factor(drv.unwrap(), params, t)?
        }
        PiiSpec::TimeChangedBrownian { psi } => PiiModel::time_changed_brownian(Tabulated::new(psi)?, t)?,
    };
    let m = match cfg.grid {
        Some(g) => m.with_grid(g)?,
        None => m,
    };
    let report = m.validate_model();
    if !report.passed() {
        bail!("model fails validation: {}", report.failures.join("; "));
    }
    Ok(m)
}

pub fn quadrature(cfg: &RunConfig) -> Result<LineQuadrature> {
    let d = LineQuadrature::default();
    let q = LineQuadrature {
        umax: cfg.quadrature.umax.unwrap_or(d.umax),
        log2_panels: cfg.quadrature.log2_panels.unwrap_or(d.log2_panels),
        tol: cfg.quadrature.tol.unwrap_or(d.tol),
    };
    q.validate()?;
    Ok(q)
}

pub fn j0_options(cfg: &RunConfig, q: &LineQuadrature) -> J0Options {
    let d = J0Options::default();
    let f = &cfg.fs;
    J0Options {
        umax: f.j0_umax.unwrap_or(d.umax),
        log2_panels: f.j0_log2_panels.unwrap_or(q.log2_panels.saturating_sub(2).max(4)),
        time_steps: f.j0_time_steps.unwrap_or(d.time_steps),
        tol: f.j0_tol.unwrap_or(d.tol),
        max_doublings: f.j0_max_doublings.unwrap_or(d.max_doublings),
    }
}

pub fn plan_options(cfg: &RunConfig) -> PlanOptions {
    let d = PlanOptions::default();
    PlanOptions {
        umax: cfg.fs.plan_umax.unwrap_or(d.umax),
        log2_panels: cfg.fs.plan_log2_panels.unwrap_or(d.log2_panels),
        truncation_tol: cfg.fs.plan_truncation_tol.unwrap_or(d.truncation_tol),
    }
}

/// Distance of a contour abscissa to the singularities met by the
/// quadratic-error integrand, which sets its decay rate.
fn clearance(r: f64, lower: f64, upper: f64) -> f64 {
    [r.abs(), (r - 1.0).abs(), r - lower, 2.0 * r - lower, upper - r - 1.0, upper - 2.0 * r]
        .into_iter()
        .filter(|x| x.is_finite())
        .fold(f64::INFINITY, f64::min)
}

/// Call representation with the widest clearance from the model strip.
pub fn auto_call_variant(m: &PiiModel) -> CallVariant {
    let s = m.strip();
    let above = (1.5f64).min((s.upper + 1.0) / 3.0);
    let unit = 0.5;
    let d_above = if above > 1.0 { clearance(above, s.lower, s.upper) } else { f64::NEG_INFINITY };
    if d_above >= clearance(unit, s.lower, s.upper) {
        CallVariant::AboveOne(above)
    } else {
        CallVariant::UnitInterval(unit)
    }
}

pub fn auto_put_abscissa(m: &PiiModel) -> f64 {
    (-0.5f64).max(m.strip().lower / 3.0)
}

/// One exponential payoff per configured level.
pub fn contour_payoffs(cfg: &RunConfig, m: &PiiModel) -> Result<Vec<(Option<f64>, PayoffMeasure)>> {
    let p = &cfg.payoff;
    match p.kind {
        PayoffKind::Call => p
            .levels
            .iter()
            .map(|&k| {
                let v = match (p.variant, p.r) {
                    (VariantSpec::Auto, _) => auto_call_variant(m),
                    (VariantSpec::AboveOne, r) => CallVariant::AboveOne(r.unwrap_or(1.5)),
                    (VariantSpec::UnitInterval, r) => CallVariant::UnitInterval(r.unwrap_or(0.5)),
                };
                Ok((Some(k), PayoffMeasure::call(k, v)?))
            })
            .collect(),
        PayoffKind::Put => {
            let r = p.r.unwrap_or_else(|| auto_put_abscissa(m));
            p.levels.iter().map(|&k| Ok((Some(k), PayoffMeasure::put(k, r)?))).collect()
        }
        PayoffKind::Custom => {
            let atoms = p.atoms.iter().map(|&(z, w)| (Complex64::new(z, 0.0), Complex64::new(w, 0.0))).collect();
            Ok(vec![(None, PayoffMeasure::atoms_only(atoms)?)])
        }
        PayoffKind::Digital | PayoffKind::SelfQuanto => unreachable!("rejected by the config schema"),
    }
}

/// One arithmetic payoff per configured level.
pub fn fourier_payoffs(cfg: &RunConfig) -> Result<Vec<(Option<f64>, FourierMeasure)>> {
    let p = &cfg.payoff;
    match p.kind {
        PayoffKind::Digital => {
            p.levels.iter().map(|&b| Ok((Some(b), FourierMeasure::digital_asset_or_nothing(b)?))).collect()
        }
        PayoffKind::SelfQuanto => p.levels.iter().map(|&k| Ok((Some(k), FourierMeasure::self_quanto_put(k)?))).collect(),
        PayoffKind::Custom => {
            let atoms = p.atoms.iter().map(|&(u, w)| (u, Complex64::new(w, 0.0))).collect();
            Ok(vec![(None, FourierMeasure::point_masses(atoms)?)])
        }
        PayoffKind::Call | PayoffKind::Put => unreachable!("rejected by the config schema"),
    }
}

pub fn fs(cfg: &RunConfig) -> Result<FsCoefficients> {
    Ok(FsCoefficients::build(model(cfg)?, cfg.level0)?)
}

pub fn arithmetic(cfg: &RunConfig) -> Result<ArithmeticCoefficients> {
    Ok(ArithmeticCoefficients::build(model(cfg)?, cfg.level0)?)
}

/// Same model and level with the Gaussian benchmark driver used by BS.
pub fn gaussian_benchmark(m: &PiiModel, exponential: bool) -> Result<PiiModel, HedgeError> {
    let sigma = vohedge::montecarlo::benchmark_sigma(m)?;
    let drift = if exponential { -0.5 * sigma * sigma } else { 0.0 };
    PiiModel::levy(LevyCumulantModel::brownian(sigma, drift)?, m.horizon())
}
