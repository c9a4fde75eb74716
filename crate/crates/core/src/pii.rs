//! Log-price models `X_t` with independent increments built from a Lévy driver.
//!
//! Every kind is described by its cumulant rate `d/dt kappa_t(z)`, so that
//! `kappa_t(z) = int_0^t rate(z, s) ds`. Closed forms are used where they
//! exist; otherwise the time integral is computed by composite
//! Gauss-Legendre quadrature split at the knots of any tabulated input.

use num_complex::Complex64 as C64;

use crate::cumulants::{DomainStrip, LevyCumulantModel};
use crate::error::{invalid, HedgeError, Result};
use crate::quadrature::gl8_split;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Piecewise-linear function of time, constant beyond its end knots.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    t: Vec<f64>,
    v: Vec<f64>,
}

impl Tabulated {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("a tabulated function needs at least two knots"));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(invalid(format!("table knots must increase strictly, got {} then {}", w[0].0, w[1].0)));
            }
        }
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(invalid("table entries must be finite"));
        }
        Ok(Self { t: points.iter().map(|p| p.0).collect(), v: points.iter().map(|p| p.1).collect() })
    }

    pub fn knots(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.t.len();
        match self.t.partition_point(|&k| k <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t <= self.t[0] {
            return self.v[0];
        }
        if t >= self.t[n - 1] {
            return self.v[n - 1];
        }
        let i = self.segment(t);
        let w = (t - self.t[i]) / (self.t[i + 1] - self.t[i]);
        self.v[i] + w * (self.v[i + 1] - self.v[i])
    }

    /// Right derivative inside the table, zero outside it.
    pub fn slope(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t < self.t[0] || t >= self.t[n - 1] {
            if t == self.t[n - 1] {
                let i = n - 2;
                return (self.v[i + 1] - self.v[i]) / (self.t[i + 1] - self.t[i]);
            }
            return 0.0;
        }
        let i = self.segment(t);
        (self.v[i + 1] - self.v[i]) / (self.t[i + 1] - self.t[i])
    }

    /// Exact `int_a^b f(t) dt`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integral(b, a);
        }
        let mut pts = vec![a];
        pts.extend(self.t.iter().copied().filter(|&k| k > a && k < b));
        pts.push(b);
        pts.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (self.eval(w[0]) + self.eval(w[1]))).sum()
    }

    fn range_on(&self, a: f64, b: f64) -> (f64, f64) {
        let mut lo = self.eval(a).min(self.eval(b));
        let mut hi = self.eval(a).max(self.eval(b));
        for (&k, &v) in self.t.iter().zip(&self.v) {
            if k > a && k < b {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

/// Deterministic loading `l(t)` of a Wiener-integral model.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Constant(f64),
    /// `scale * exp(-rate * (anchor - t))`.
    Exponential { scale: f64, rate: f64, anchor: f64 },
    Table(Tabulated),
}

impl Kernel {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Kernel::Constant(c) => *c,
            Kernel::Exponential { scale, rate, anchor } => scale * (-rate * (anchor - t)).exp(),
            Kernel::Table(tab) => tab.eval(t),
        }
    }

    fn range_on(&self, a: f64, b: f64) -> (f64, f64) {
        match self {
            Kernel::Constant(c) => (*c, *c),
            Kernel::Exponential { .. } => {
                let (x, y) = (self.eval(a), self.eval(b));
                (x.min(y), x.max(y))
            }
            Kernel::Table(tab) => tab.range_on(a, b),
        }
    }

    fn knots(&self) -> &[f64] {
        match self {
            Kernel::Table(tab) => tab.knots(),
            _ => &[],
        }
    }
}

/// Parameters of the spot-plus-forward model `X_t = m_t + sigma_l W_t + int sigma_s e^{-lambda (Td - s)} dL_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoFactorParams {
    pub sigma_s: f64,
    pub lambda_mr: f64,
    pub sigma_l: f64,
    pub delivery: f64,
    /// Density `dm_t/dt` of the deterministic trend. `None` means zero.
    pub trend: Option<Tabulated>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PiiKind {
    LevyHomogeneous { driver: LevyCumulantModel },
    WienerIntegral { driver: LevyCumulantModel, kernel: Kernel },
    TwoFactor { driver: LevyCumulantModel, params: TwoFactorParams },
    TimeChangedBrownian { psi: Tabulated },
}

/// A log-price model with independent increments on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiiModel {
    kind: PiiKind,
    horizon: f64,
    grid: usize,
    strip: DomainStrip,
    breaks: Vec<f64>,
}

/// Time densities of the variance-like process `rho_t = kappa_t(2) - 2 kappa_t(1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoDensities {
    pub t: f64,
    pub drho_dt: f64,
    pub dkappa1_drho: f64,
}

/// Outcome of [`PiiModel::validate_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub two_in_domain: bool,
    pub rho_increasing: bool,
    pub kind_specific: bool,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl PiiModel {
    pub const DEFAULT_GRID: usize = 256;

    fn build(kind: PiiKind, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        let (strip, mut breaks) = match &kind {
            PiiKind::LevyHomogeneous { driver } => (driver.strip(), vec![]),
            PiiKind::WienerIntegral { driver, kernel } => {
                let (lo, hi) = kernel.range_on(0.0, horizon);
                let lmax = lo.abs().max(hi.abs());
                let strip = if lmax > 0.0 { driver.strip().scaled(lmax) } else { DomainStrip::WHOLE_LINE };
                (strip, kernel.knots().to_vec())
            }
            PiiKind::TwoFactor { driver, params } => {
                let p = params;
                if !(p.sigma_s > 0.0 && p.sigma_s.is_finite()) {
                    return Err(invalid(format!("sigma_s must be positive, got {}", p.sigma_s)));
                }
                if !(p.lambda_mr >= 0.0 && p.lambda_mr.is_finite()) {
                    return Err(invalid(format!("lambda_mr must be non-negative, got {}", p.lambda_mr)));
                }
                if !(p.sigma_l >= 0.0 && p.sigma_l.is_finite()) {
                    return Err(invalid(format!("sigma_l must be non-negative, got {}", p.sigma_l)));
                }
                if !(p.delivery >= horizon) {
                    return Err(invalid(format!(
                        "delivery date {} precedes the horizon {horizon}",
                        p.delivery
                    )));
                }
                let zmax = p.sigma_s * (-p.lambda_mr * (p.delivery - horizon)).exp();
                let breaks = p.trend.as_ref().map(|t| t.knots().to_vec()).unwrap_or_default();
                (driver.strip().scaled(zmax), breaks)
            }
            PiiKind::TimeChangedBrownian { psi } => (DomainStrip::WHOLE_LINE, psi.knots().to_vec()),
        };
        breaks.retain(|&b| b > 0.0 && b < horizon);
        Ok(Self { kind, horizon, grid: Self::DEFAULT_GRID, strip, breaks })
    }

    pub fn levy(driver: LevyCumulantModel, horizon: f64) -> Result<Self> {
        Self::build(PiiKind::LevyHomogeneous { driver }, horizon)
    }

    pub fn wiener(driver: LevyCumulantModel, kernel: Kernel, horizon: f64) -> Result<Self> {
        Self::build(PiiKind::WienerIntegral { driver, kernel }, horizon)
    }

    pub fn two_factor(driver: LevyCumulantModel, params: TwoFactorParams, horizon: f64) -> Result<Self> {
        Self::build(PiiKind::TwoFactor { driver, params }, horizon)
    }

    pub fn time_changed_brownian(psi: Tabulated, horizon: f64) -> Result<Self> {
        Self::build(PiiKind::TimeChangedBrownian { psi }, horizon)
    }

    /// Set the number of time-grid points used by inhomogeneous quadratures.
    pub fn with_grid(mut self, grid: usize) -> Result<Self> {
        if grid < 8 {
            return Err(invalid(format!("time grid must have at least 8 points, got {grid}")));
        }
        self.grid = grid;
        Ok(self)
    }

    pub fn kind(&self) -> &PiiKind {
        &self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// Real parts of `z` for which `kappa_t(z)` is finite for every `t <= horizon`.
    pub fn strip(&self) -> DomainStrip {
        self.strip
    }

    /// Interior points where a time integrand may have a kink.
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// True when the cumulant rate does not depend on time.
    pub fn is_homogeneous(&self) -> bool {
        matches!(
            &self.kind,
            PiiKind::LevyHomogeneous { .. } | PiiKind::WienerIntegral { kernel: Kernel::Constant(_), .. }
        )
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t.is_finite() && t >= 0.0 && t <= self.horizon * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(invalid(format!("time {t} lies outside [0, {}]", self.horizon)))
        }
    }

    fn spot_loading(p: &TwoFactorParams, t: f64) -> f64 {
        p.sigma_s * (-p.lambda_mr * (p.delivery - t)).exp()
    }

    /// `d/dt kappa_t(z)`, unchecked.
    #[inline]
    pub fn rate(&self, z: C64, t: f64) -> C64 {
        match &self.kind {
            PiiKind::LevyHomogeneous { driver } => driver.eval_unchecked(z),
            PiiKind::WienerIntegral { driver, kernel } => driver.eval_unchecked(z * kernel.eval(t)),
            PiiKind::TwoFactor { driver, params } => {
                let zt = Self::spot_loading(params, t);
                let m = params.trend.as_ref().map_or(0.0, |tr| tr.eval(t));
                z * m + z * z * (0.5 * params.sigma_l * params.sigma_l) + driver.eval_unchecked(z * zt)
            }
            PiiKind::TimeChangedBrownian { psi } => z * z * (0.5 * psi.slope(t)),
        }
    }

    /// `d/dt d/dz kappa_t(z)`, unchecked.
    #[inline]
    pub fn rate_d1(&self, z: C64, t: f64) -> C64 {
        match &self.kind {
            PiiKind::LevyHomogeneous { driver } => driver.d1_unchecked(z),
            PiiKind::WienerIntegral { driver, kernel } => {
                let l = kernel.eval(t);
                driver.d1_unchecked(z * l) * l
            }
            PiiKind::TwoFactor { driver, params } => {
                let zt = Self::spot_loading(params, t);
                let m = params.trend.as_ref().map_or(0.0, |tr| tr.eval(t));
                z * (params.sigma_l * params.sigma_l) + m + driver.d1_unchecked(z * zt) * zt
            }
            PiiKind::TimeChangedBrownian { psi } => z * psi.slope(t),
        }
    }

    /// `d/dt d^2/dz^2 kappa_t(z)`, unchecked.
    #[inline]
    pub fn rate_d2(&self, z: C64, t: f64) -> C64 {
        match &self.kind {
            PiiKind::LevyHomogeneous { driver } => driver.d2_unchecked(z),
            PiiKind::WienerIntegral { driver, kernel } => {
                let l = kernel.eval(t);
                driver.d2_unchecked(z * l) * (l * l)
            }
            PiiKind::TwoFactor { driver, params } => {
                let zt = Self::spot_loading(params, t);
                driver.d2_unchecked(z * zt) * (zt * zt) + params.sigma_l * params.sigma_l
            }
            PiiKind::TimeChangedBrownian { psi } => C64::new(psi.slope(t), 0.0),
        }
    }

    /// `d/dt rho_t(y, z)` with the trend cancelled analytically.
    #[inline]
    pub fn bilinear_rate(&self, y: C64, z: C64, t: f64) -> C64 {
        match &self.kind {
            PiiKind::LevyHomogeneous { driver } => {
                driver.eval_unchecked(y + z) - driver.eval_unchecked(y) - driver.eval_unchecked(z)
            }
            PiiKind::WienerIntegral { driver, kernel } => {
                let l = kernel.eval(t);
                driver.eval_unchecked((y + z) * l) - driver.eval_unchecked(y * l) - driver.eval_unchecked(z * l)
            }
            PiiKind::TwoFactor { driver, params } => {
                let zt = Self::spot_loading(params, t);
                y * z * (params.sigma_l * params.sigma_l) + driver.eval_unchecked((y + z) * zt)
                    - driver.eval_unchecked(y * zt)
                    - driver.eval_unchecked(z * zt)
            }
            PiiKind::TimeChangedBrownian { psi } => y * z * psi.slope(t),
        }
    }

    /// `d rho_t / dt`.
    #[inline]
    pub fn rho_rate(&self, t: f64) -> f64 {
        let one = C64::new(1.0, 0.0);
        self.bilinear_rate(one, one, t).re
    }

    /// Fixed-resolution time integral on `[a, b]`; `refine` multiplies the
    /// base panel density derived from the grid.
    pub(crate) fn integrate_fixed<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, refine: f64, f: F) -> C64 {
        let density = refine * self.grid as f64 / (8.0 * self.horizon);
        gl8_split(a, b, &self.breaks, density, f)
    }

    /// Adaptive time integral on `[a, b]`: doubles the panel density until
    /// successive values agree to `1e-11` relative.
    pub fn time_integral<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, mut f: F) -> Result<C64> {
        let mut refine = 1.0;
        let mut prev = self.integrate_fixed(a, b, refine, &mut f);
        for _ in 0..12 {
            refine *= 2.0;
            let next = self.integrate_fixed(a, b, refine, &mut f);
            if !next.is_finite() {
                return Err(HedgeError::QuadratureFailure(format!("non-finite time integral on [{a}, {b}]")));
            }
            if (next - prev).norm() <= 1e-11 * next.norm() + 1e-300 {
                return Ok(next);
            }
            prev = next;
        }
        Err(HedgeError::QuadratureFailure(format!("time integral on [{a}, {b}] did not settle")))
    }

    /// `kappa_b(z) - kappa_a(z)`, unchecked in `z`.
    pub fn kappa_increment(&self, z: C64, a: f64, b: f64) -> Result<C64> {
        let dt = b - a;
        Ok(match &self.kind {
            PiiKind::LevyHomogeneous { driver } => driver.eval_unchecked(z) * dt,
            PiiKind::WienerIntegral { driver, kernel: Kernel::Constant(c) } => driver.eval_unchecked(z * *c) * dt,
            PiiKind::WienerIntegral { driver, kernel } => {
                self.time_integral(a, b, |s| driver.eval_unchecked(z * kernel.eval(s)))?
            }
            PiiKind::TwoFactor { driver, params } => {
                let m = params.trend.as_ref().map_or(0.0, |tr| tr.integral(a, b));
                let jump = self.time_integral(a, b, |s| driver.eval_unchecked(z * Self::spot_loading(params, s)))?;
                z * m + z * z * (0.5 * params.sigma_l * params.sigma_l * dt) + jump
            }
            PiiKind::TimeChangedBrownian { psi } => z * z * (0.5 * (psi.eval(b) - psi.eval(a))),
        })
    }

    /// Cumulant generating function `kappa_t(z) = ln E[exp(z X_t)]`.
    pub fn kappa(&self, t: f64, z: C64) -> Result<C64> {
        self.check_time(t)?;
        self.strip.check(z.re)?;
        self.kappa_increment(z, 0.0, t)
    }

    /// `rho_t = kappa_t(2) - 2 kappa_t(1)`.
    pub fn rho(&self, t: f64) -> Result<f64> {
        let one = C64::new(1.0, 0.0);
        self.rho_bilinear(t, one, one).map(|c| c.re)
    }

    /// `rho_t(y, z) = kappa_t(y + z) - kappa_t(y) - kappa_t(z)`.
    pub fn rho_bilinear(&self, t: f64, y: C64, z: C64) -> Result<C64> {
        self.check_time(t)?;
        for x in [y.re, z.re, y.re + z.re] {
            self.strip.check(x)?;
        }
        Ok(match &self.kind {
            PiiKind::LevyHomogeneous { .. } => self.bilinear_rate(y, z, 0.0) * t,
            PiiKind::TimeChangedBrownian { psi } => y * z * (psi.eval(t) - psi.eval(0.0)),
            _ => self.time_integral(0.0, t, |s| self.bilinear_rate(y, z, s))?,
        })
    }

    /// Densities of `rho` and of `kappa(1)` with respect to `rho` at time `t`.
    pub fn densities(&self, t: f64) -> Result<RhoDensities> {
        self.check_time(t)?;
        self.strip.check(2.0)?;
        let drho_dt = self.rho_rate(t);
        if !(drho_dt > 0.0) {
            return Err(HedgeError::DegenerateModel(format!("d rho / dt = {drho_dt} at t = {t}")));
        }
        let k1 = self.rate(C64::new(1.0, 0.0), t).re;
        Ok(RhoDensities { t, drho_dt, dkappa1_drho: k1 / drho_dt })
    }

    /// `d kappa_t(z) / d rho_t`.
    pub fn dkappa_drho(&self, t: f64, z: C64) -> Result<C64> {
        let d = self.densities(t)?;
        self.strip.check(z.re)?;
        Ok(self.rate(z, t) / d.drho_dt)
    }

    /// `(Psi_t'(u), Psi_t''(u))` for the log-characteristic function `Psi_t(u) = kappa_t(iu)`.
    pub fn log_char_derivatives(&self, t: f64, u: f64) -> Result<(C64, C64)> {
        self.check_time(t)?;
        let z = C64::new(0.0, u);
        let i = C64::new(0.0, 1.0);
        let (k1, k2) = match &self.kind {
            PiiKind::LevyHomogeneous { driver } => (driver.d1_unchecked(z) * t, driver.d2_unchecked(z) * t),
            PiiKind::TimeChangedBrownian { psi } => {
                let p = psi.eval(t) - psi.eval(0.0);
                (z * p, C64::new(p, 0.0))
            }
            _ => (
                self.time_integral(0.0, t, |s| self.rate_d1(z, s))?,
                self.time_integral(0.0, t, |s| self.rate_d2(z, s))?,
            ),
        };
        Ok((i * k1, -k2))
    }

    /// `d/dt Psi_t'(u)`.
    #[inline]
    pub fn psi1_rate(&self, u: f64, t: f64) -> C64 {
        C64::new(0.0, 1.0) * self.rate_d1(C64::new(0.0, u), t)
    }

    /// `d/dt Psi_t''(0)`, which is minus the variance rate.
    #[inline]
    pub fn psi2_rate(&self, t: f64) -> f64 {
        -self.rate_d2(ZERO, t).re
    }

    /// `Var(X_t)`.
    pub fn variance(&self, t: f64) -> Result<f64> {
        Ok(-self.log_char_derivatives(t, 0.0)?.1.re)
    }

    /// Check the structural assumptions behind the hedging formulas.
    pub fn validate_model(&self) -> ValidationReport {
        let mut failures = Vec::new();
        let two_in_domain = self.strip.contains(2.0) && self.strip.contains(1.0);
        if !two_in_domain {
            failures.push(format!(
                "exponent 2 is outside the effective strip ({}, {})",
                self.strip.lower, self.strip.upper
            ));
        }
        let mut rho_increasing = two_in_domain;
        if two_in_domain {
            for k in 0..=64 {
                let t = self.horizon * k as f64 / 64.0;
                let r = self.rho_rate(t.min(self.horizon * (1.0 - 1e-12)));
                if !(r > 0.0) {
                    rho_increasing = false;
                    failures.push(format!("rho is not strictly increasing near t = {t} (rate {r})"));
                    break;
                }
            }
        }
        let mut kind_specific = true;
        match &self.kind {
            PiiKind::LevyHomogeneous { driver } => {
                if !(driver.derivatives_at_zero(2).map(|c| c[1]).unwrap_or(0.0) > 0.0) {
                    kind_specific = false;
                    failures.push("driver is deterministic".into());
                }
            }
            PiiKind::WienerIntegral { kernel, .. } => {
                let (lo, _) = kernel.range_on(0.0, self.horizon);
                if !(lo > 0.0) {
                    kind_specific = false;
                    failures.push(format!("kernel is not positive on [0, T] (min {lo})"));
                }
            }
            PiiKind::TwoFactor { driver, params } => {
                if params.sigma_l == 0.0 && !(driver.derivatives_at_zero(2).map(|c| c[1]).unwrap_or(0.0) > 0.0) {
                    kind_specific = false;
                    failures.push("no Brownian factor and a deterministic driver".into());
                }
            }
            PiiKind::TimeChangedBrownian { psi } => {
                if psi.eval(0.0).abs() > 1e-14 {
                    kind_specific = false;
                    failures.push(format!("psi(0) = {} instead of 0", psi.eval(0.0)));
                }
                if psi.values().windows(2).any(|w| !(w[1] > w[0])) {
                    kind_specific = false;
                    failures.push("psi is not strictly increasing".into());
                }
                if psi.knots()[psi.knots().len() - 1] < self.horizon {
                    kind_specific = false;
                    failures.push("psi table ends before the horizon".into());
                }
            }
        }
        ValidationReport { two_in_domain, rho_increasing, kind_specific, failures }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nig() -> LevyCumulantModel {
        LevyCumulantModel::nig(38.46, -3.85, 6.40, 0.64).unwrap()
    }

    fn electricity() -> PiiModel {
        let driver = LevyCumulantModel::nig(15.81, -1.581, 15.57, 1.56).unwrap();
        let params = TwoFactorParams { sigma_s: 0.5747, lambda_mr: 3.0, sigma_l: 0.0, delivery: 0.25, trend: None };
        PiiModel::two_factor(driver, params, 0.25).unwrap()
    }

    fn tcb() -> PiiModel {
        let psi = Tabulated::new(&[(0.0, 0.0), (0.1, 0.01), (0.25, 0.05)]).unwrap();
        PiiModel::time_changed_brownian(psi, 0.25).unwrap()
    }

    #[test]
    fn tabulated_integral_and_slope() {
        let t = Tabulated::new(&[(0.0, 1.0), (1.0, 3.0), (2.0, 3.0)]).unwrap();
        assert!((t.integral(0.0, 2.0) - 5.0).abs() < 1e-15);
        assert!((t.integral(0.5, 1.5) - (0.5 * 0.5 * (2.0 + 3.0) + 1.5)).abs() < 1e-15);
        assert_eq!(t.slope(0.5), 2.0);
        assert_eq!(t.slope(1.0), 0.0);
        assert_eq!(t.eval(-1.0), 1.0);
        assert!(Tabulated::new(&[(0.0, 1.0), (0.0, 2.0)]).is_err());
    }

    #[test]
    fn constant_kernel_reduces_to_scaled_levy() {
        let w = PiiModel::wiener(nig(), Kernel::Constant(0.5), 1.0).unwrap();
        let base = PiiModel::levy(nig(), 1.0).unwrap();
        let z = C64::new(0.7, 2.0);
        let a = w.kappa(0.6, z).unwrap();
        let b = base.kappa(0.6, z * 0.5).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn two_factor_matches_direct_quadrature() {
        let m = electricity();
        let z = C64::new(1.0, 3.0);
        let PiiKind::TwoFactor { driver, params } = m.kind() else { unreachable!() };
        // midpoint rule with many points as an independent reference
        let n = 200_000;
        let h = 0.2 / n as f64;
        let reference: C64 = (0..n)
            .map(|k| {
                let s = (k as f64 + 0.5) * h;
                driver.eval_unchecked(z * params.sigma_s * (-params.lambda_mr * (0.25 - s)).exp()) * h
            })
            .sum();
        let v = m.kappa(0.2, z).unwrap();
        assert!((v - reference).norm() < 1e-9 * reference.norm(), "{v} {reference}");
    }

    #[test]
    fn density_consistency() {
        for m in [electricity(), tcb(), PiiModel::levy(nig(), 0.25).unwrap()] {
            let t = 0.2;
            let integral = m
                .time_integral(0.0, t, |s| {
                    let d = m.densities(s).unwrap();
                    C64::new(d.dkappa1_drho * d.drho_dt, 0.0)
                })
                .unwrap();
            let k1 = m.kappa(t, C64::new(1.0, 0.0)).unwrap().re;
            assert!((integral.re - k1).abs() < 1e-10 * k1.abs().max(1e-3), "{:?}", m.kind());
        }
    }

    #[test]
    fn rho_bilinear_symmetric_and_consistent() {
        let m = electricity();
        let y = C64::new(0.3, 1.0);
        let z = C64::new(0.6, -2.5);
        let a = m.rho_bilinear(0.25, y, z).unwrap();
        let b = m.rho_bilinear(0.25, z, y).unwrap();
        assert!((a - b).norm() < 1e-13 * a.norm());
        let direct = m.kappa(0.25, y + z).unwrap() - m.kappa(0.25, y).unwrap() - m.kappa(0.25, z).unwrap();
        assert!((a - direct).norm() < 1e-10 * a.norm());
    }

    #[test]
    fn log_char_derivatives_by_finite_difference() {
        for m in [electricity(), tcb(), PiiModel::levy(nig(), 0.25).unwrap()] {
            let t = 0.2;
            let u = 1.7;
            let h = 1e-4;
            let psi = |u: f64| m.kappa(t, C64::new(0.0, u)).unwrap();
            let fd1 = (psi(u + h) - psi(u - h)) / (2.0 * h);
            let fd2 = (psi(u + h) - psi(u) * 2.0 + psi(u - h)) / (h * h);
            let (d1, d2) = m.log_char_derivatives(t, u).unwrap();
            assert!((fd1 - d1).norm() < 1e-7 * d1.norm().max(1.0));
            assert!((fd2 - d2).norm() < 1e-5 * d2.norm().max(1.0));
        }
    }

    #[test]
    fn validation_outcomes() {
        assert!(electricity().validate_model().passed());
        assert!(tcb().validate_model().passed());
        let bad = PiiModel::wiener(nig(), Kernel::Constant(30.0), 1.0).unwrap();
        assert!(!bad.validate_model().passed());
        let flat = Tabulated::new(&[(0.0, 0.0), (0.1, 0.01), (0.25, 0.01)]).unwrap();
        assert!(!PiiModel::time_changed_brownian(flat, 0.25).unwrap().validate_model().passed());
        let det = PiiModel::levy(LevyCumulantModel::brownian(0.0, 0.1).unwrap(), 1.0).unwrap();
        assert!(!det.validate_model().passed());
    }

    #[test]
    fn domain_is_enforced_for_two_factor() {
        let m = electricity();
        assert!(matches!(m.kappa(0.1, C64::new(40.0, 0.0)), Err(HedgeError::DomainViolation { .. })));
    }
}
