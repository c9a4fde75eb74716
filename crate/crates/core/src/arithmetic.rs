//! Variance-optimal hedging of claims `f(X_T)` written on the additive
//! process itself, with `f(x) = int exp(iux) mu(du)`.
//!
//! With `Psi_t(u) = kappa_t(iu)`:
//!
//! * `H(u)_t = exp(eta(u,T) - eta(u,t) + Psi_T(u) - Psi_t(u)) exp(iu X_t)`
//! * `xi_t = int i d(Psi'_t(u) - Psi'_t(0)) / d Psi''_t(0) H(u)_t mu(du)`
//! * `phi_t = xi_t + alpha_t (H_t- - V0 - G_t-)`, `alpha_t = i d Psi'_t(0) / d Psi''_t(0)`

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{invalid, HedgeError, Result};
use crate::montecarlo::plan::{truncation_len, Basis, NodeGroup, PlanAtom, SpectralPlan};
use crate::payoff::{DecayClass, FourierMeasure, DAMPING};
use crate::pii::{PiiKind, PiiModel};
use crate::quadrature::LineQuadrature;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Variance-optimal coefficients of an arithmetic model.
#[derive(Debug, Clone)]
pub struct ArithmeticCoefficients {
    model: PiiModel,
    x0: f64,
}

/// Controls for precomputed arithmetic backtest plans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArithPlanOptions {
    pub umax: f64,
    pub log2_panels: u32,
    pub truncation_tol: f64,
}

impl Default for ArithPlanOptions {
    fn default() -> Self {
        Self { umax: 400.0, log2_panels: 12, truncation_tol: 1e-10 }
    }
}

impl ArithmeticCoefficients {
    pub fn build(model: PiiModel, x0: f64) -> Result<Self> {
        if !x0.is_finite() {
            return Err(invalid(format!("initial level must be finite, got {x0}")));
        }
        let n = model.grid();
        let t_end = model.horizon();
        for k in 0..=n {
            let t = t_end * k as f64 / n as f64;
            let v = model.psi2_rate(t);
            if !(v < 0.0) || !v.is_finite() {
                return Err(HedgeError::DegenerateModel(format!("variance rate {} at t = {t}", -v)));
            }
        }
        Ok(Self { model, x0 })
    }

    pub fn model(&self) -> &PiiModel {
        &self.model
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    fn horizon(&self) -> f64 {
        self.model.horizon()
    }

    #[inline]
    fn ratio(&self, u: f64, t: f64) -> C64 {
        (self.model.psi1_rate(u, t) - self.model.psi1_rate(0.0, t)) / self.model.psi2_rate(t)
    }

    /// Density of `xi` in front of `H(u)_t`.
    #[inline]
    pub fn xi_density(&self, u: f64, t: f64) -> C64 {
        I * self.ratio(u, t)
    }

    /// Feedback coefficient `alpha_t`.
    #[inline]
    pub fn alpha(&self, t: f64) -> f64 {
        (I * self.model.psi1_rate(0.0, t) / self.model.psi2_rate(t)).re
    }

    /// Time density of `eta`, chosen so that `H(u)` is a martingale under
    /// the minimal martingale measure.
    #[inline]
    pub fn eta_rate(&self, u: f64, t: f64) -> C64 {
        -self.ratio(u, t) * self.model.psi1_rate(0.0, t)
    }

    #[inline]
    fn exponent_rate(&self, u: f64, t: f64) -> C64 {
        self.model.rate(C64::new(0.0, u), t) + self.eta_rate(u, t)
    }

    /// `eta(u, t) = int_0^t eta(u, ds)`.
    pub fn eta_arith(&self, u: f64, t: f64) -> Result<C64> {
        self.check_time(t)?;
        if self.model.is_homogeneous() {
            return Ok(self.eta_rate(u, 0.0) * t);
        }
        if matches!(self.model.kind(), PiiKind::TimeChangedBrownian { .. }) {
            return Ok(C64::new(0.0, 0.0));
        }
        self.model.time_integral(0.0, t, |s| self.eta_rate(u, s))
    }

    /// `eta(u,T) - eta(u,t) + Psi_T(u) - Psi_t(u)` over `[t1, t2]`.
    fn exponent(&self, u: f64, t1: f64, t2: f64) -> C64 {
        if self.model.is_homogeneous() {
            return self.exponent_rate(u, 0.0) * (t2 - t1);
        }
        if let PiiKind::TimeChangedBrownian { psi } = self.model.kind() {
            return C64::new(-0.5 * u * u * (psi.eval(t2) - psi.eval(t1)), 0.0);
        }
        self.model.integrate_fixed(t1, t2, 1.0, |s| self.exponent_rate(u, s))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t.is_finite() && t >= 0.0 && t <= self.horizon() * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(invalid(format!("time {t} lies outside [0, {}]", self.horizon())))
        }
    }

    fn check_measure(&self, fourier: &FourierMeasure) -> Result<()> {
        if !fourier.has_density() {
            return Ok(());
        }
        let strip = self.model.strip();
        if !(strip.lower < 0.0 && strip.upper > 0.0) {
            return Err(invalid("the model strip must contain a neighbourhood of zero"));
        }
        Ok(())
    }

    /// `H(u)_t` at log-level `x`.
    pub fn h_density(&self, u: f64, t: f64, x: f64) -> Result<C64> {
        self.check_time(t)?;
        Ok((self.exponent(u, t, self.horizon()) + I * (u * x)).exp())
    }

    /// Variance-optimal price `H_t(x)`.
    pub fn price(&self, fourier: &FourierMeasure, t: f64, x: f64, q: &LineQuadrature) -> Result<f64> {
        self.check_time(t)?;
        self.check_measure(fourier)?;
        if !x.is_finite() {
            return Err(invalid(format!("log-level must be finite, got {x}")));
        }
        let t_end = self.horizon();
        fourier.integrate_real(|u| (self.exponent(u, t, t_end) + I * (u * x)).exp(), q)
    }

    /// Pure hedge `xi_t(x)` at the left-limit level `x`.
    pub fn hedge(&self, fourier: &FourierMeasure, t: f64, x: f64, q: &LineQuadrature) -> Result<f64> {
        self.check_time(t)?;
        self.check_measure(fourier)?;
        if !x.is_finite() {
            return Err(invalid(format!("log-level must be finite, got {x}")));
        }
        let t_end = self.horizon();
        fourier.integrate_real(|u| self.xi_density(u, t) * (self.exponent(u, t, t_end) + I * (u * x)).exp(), q)
    }

    pub fn initial_capital(&self, fourier: &FourierMeasure, q: &LineQuadrature) -> Result<f64> {
        self.price(fourier, 0.0, self.x0, q)
    }

    /// `sup_u Re eta(u, T)` over `[-umax, umax]` sampled at `n` points.
    pub fn sup_re_eta(&self, umax: f64, n: usize) -> Result<f64> {
        let t_end = self.horizon();
        let mut sup = f64::NEG_INFINITY;
        for k in 0..=n {
            let u = -umax + 2.0 * umax * k as f64 / n.max(1) as f64;
            sup = sup.max(self.eta_arith(u, t_end)?.re);
        }
        Ok(sup)
    }

    /// Per-date node weights for backtests; the level passed to the plan is `x`.
    pub fn hedge_plan(&self, fourier: &FourierMeasure, dates: &[f64], opts: &ArithPlanOptions) -> Result<SpectralPlan> {
        self.check_measure(fourier)?;
        for &t in dates {
            self.check_time(t)?;
        }
        if dates.is_empty() || dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("rebalancing dates must be non-empty and strictly increasing"));
        }
        let t_end = self.horizon();
        let tails = |u: f64| -> Vec<C64> {
            let mut out = vec![C64::new(0.0, 0.0); dates.len()];
            let mut acc = C64::new(0.0, 0.0);
            let mut upper = t_end;
            for i in (0..dates.len()).rev() {
                acc += self.exponent(u, dates[i], upper);
                upper = dates[i];
                out[i] = acc;
            }
            out
        };
        let mut groups = Vec::new();
        if fourier.has_density() {
            let strip = self.model.strip();
            let d = [1.0, -strip.lower, strip.upper].into_iter().fold(f64::INFINITY, f64::min);
            let h = (opts.umax / (1usize << opts.log2_panels) as f64).min(2.0 * std::f64::consts::PI * d / 30.0);
            let damped = fourier.decay_class() == DecayClass::Conditional;
            let weight = |u: f64| -> C64 {
                let damp: f64 = if damped { DAMPING.iter().map(|(e, w)| w * (-e * u * u).exp()).sum() } else { 1.0 };
                fourier.density(u) * damp
            };
            let last = *dates.last().unwrap();
            let mut umax = opts.umax;
            if damped {
                let eps_min = DAMPING.iter().map(|d| d.0).fold(f64::INFINITY, f64::min);
                umax = umax.max((40.0 / eps_min).sqrt());
            } else {
                let body: f64 = (0..2000).map(|k| (weight(k as f64 * 0.05) * self.exponent(k as f64 * 0.05, last, t_end).exp()).norm() * 0.05).sum();
                while umax < 256.0 * opts.umax {
                    let tail = (weight(umax) * self.exponent(umax, last, t_end).exp()).norm() * umax;
                    if tail <= 1e-3 * opts.truncation_tol * body {
                        break;
                    }
                    umax *= 2.0;
                }
            }
            let count = (umax / h).ceil() as usize + 1;
            let cols: Vec<Vec<(C64, C64)>> = (0..count)
                .into_par_iter()
                .map(|j| {
                    let u = h * j as f64;
                    let w = weight(u) * if j == 0 { 0.5 * h } else { h };
                    tails(u)
                        .iter()
                        .zip(dates)
                        .map(|(e, &t)| {
                            let a = w * e.exp();
                            (a, a * self.xi_density(u, t))
                        })
                        .collect()
                })
                .collect();
            let weights = (0..dates.len())
                .map(|i| {
                    let row: Vec<(C64, C64)> = cols.iter().map(|col| col[i]).collect();
                    let keep = truncation_len(&row, opts.truncation_tol);
                    row[..keep].to_vec()
                })
                .collect();
            groups.push(NodeGroup { shift: 0.0, u0: 0.0, step: h, doubled: true, weights });
        }
        let atoms = fourier
            .atoms()
            .iter()
            .map(|&(u, w)| PlanAtom {
                exponent: C64::new(0.0, u),
                weights: tails(u)
                    .iter()
                    .zip(dates)
                    .map(|(e, &t)| {
                        let a = w * e.exp();
                        (a, a * self.xi_density(u, t))
                    })
                    .collect(),
            })
            .collect();
        let v0 = self.price(fourier, dates[0], self.x0, &LineQuadrature::default())?;
        let payoff = fourier.clone();
        Ok(SpectralPlan {
            dates: dates.to_vec(),
            basis: Basis::LogLevel,
            groups,
            atoms,
            feedback: dates.iter().map(|&t| self.alpha(t)).collect(),
            initial_capital: v0,
            payoff: Box::new(move |x| payoff.payoff(x).unwrap_or(f64::NAN)),
        })
    }
}
