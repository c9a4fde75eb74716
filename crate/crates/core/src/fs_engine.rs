//! Föllmer-Schweizer decomposition and variance-optimal hedging of claims
//! `f(S_T)` with `S = s0 exp(X)`.
//!
//! For a payoff `f(s) = int s^z Pi(dz)`:
//!
//! * `H_t = int exp(int_t^T eta(z, ds)) S_t^z Pi(dz)`
//! * `xi_t = int gamma(z, t) exp(int_t^T eta(z, ds)) S_t^(z-1) Pi(dz)`
//! * `phi_t = xi_t + lambda_t / S_t (H_t - V0 - G_t)`
//!
//! with `gamma(z, t) = d rho_t(z, 1) / d rho_t`,
//! `eta(z, dt) = kappa_dt(z) - gamma(z, t) kappa_dt(1)` and
//! `lambda_t = d kappa_t(1) / d rho_t`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{invalid, HedgeError, Result};
use crate::montecarlo::plan::{truncation_len, Basis, NodeGroup, PlanAtom, SpectralPlan};
use crate::payoff::{spot_power, PayoffMeasure};
use crate::pii::{PiiKind, PiiModel};
use crate::quadrature::{exprel, integrate_half_line, LineQuadrature};

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Variance-optimal coefficients of an exponential model.
#[derive(Debug, Clone)]
pub struct FsCoefficients {
    model: PiiModel,
    s0: f64,
}

/// Controls for the double contour integral of the quadratic error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct J0Options {
    pub umax: f64,
    /// Upper bound on the node spacing, `umax / 2^log2_panels`.
    pub log2_panels: u32,
    /// Uniform time steps for inhomogeneous kinds (rounded up to even).
    pub time_steps: usize,
    /// Relative tolerance of the truncation check.
    pub tol: f64,
    /// Maximum number of `umax` doublings (at least one is done).
    pub max_doublings: u32,
}

impl Default for J0Options {
    fn default() -> Self {
        Self { umax: 200.0, log2_panels: 11, time_steps: 64, tol: 1e-4, max_doublings: 3 }
    }
}

impl J0Options {
    /// One panel level coarser than the payoff quadrature, per contour.
    pub fn from_quadrature(q: &LineQuadrature) -> Self {
        Self { umax: q.umax, log2_panels: q.log2_panels.saturating_sub(2).max(4), ..Self::default() }
    }
}

/// Controls for precomputed backtest plans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    pub umax: f64,
    pub log2_panels: u32,
    /// Relative L1 mass dropped when truncating the node list of a date.
    pub truncation_tol: f64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self { umax: 400.0, log2_panels: 13, truncation_tol: 1e-10 }
    }
}

struct JNode {
    z: C64,
    w: C64,
    mult: f64,
}

impl FsCoefficients {
    pub fn build(model: PiiModel, s0: f64) -> Result<Self> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(invalid(format!("s0 must be positive, got {s0}")));
        }
        let report = model.validate_model();
        if !report.passed() {
            return Err(HedgeError::DegenerateModel(report.failures.join("; ")));
        }
        Ok(Self { model, s0 })
    }

    pub fn model(&self) -> &PiiModel {
        &self.model
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    fn horizon(&self) -> f64 {
        self.model.horizon()
    }

    /// `gamma(z, t)`. Exactly 1 at `z = 1` and 0 at `z = 0`.
    #[inline]
    pub fn gamma(&self, z: C64, t: f64) -> C64 {
        self.model.bilinear_rate(z, ONE, t) / self.model.bilinear_rate(ONE, ONE, t).re
    }

    /// Time density of `eta(z, .)`.
    #[inline]
    pub fn eta_rate(&self, z: C64, t: f64) -> C64 {
        self.model.rate(z, t) - self.gamma(z, t) * self.model.rate(ONE, t).re
    }

    /// `lambda_t = d kappa_t(1) / d rho_t`.
    #[inline]
    pub fn lambda(&self, t: f64) -> f64 {
        self.model.rate(ONE, t).re / self.model.rho_rate(t)
    }

    /// Time density of `K`.
    #[inline]
    fn k_rate(&self, t: f64) -> f64 {
        let k1 = self.model.rate(ONE, t).re;
        k1 * k1 / self.model.rho_rate(t)
    }

    /// `int_{t1}^{t2} eta(z, ds)`, adaptive in time.
    pub fn eta_integral(&self, z: C64, t1: f64, t2: f64) -> Result<C64> {
        if let Some(v) = self.eta_closed(z, t1, t2) {
            return Ok(v);
        }
        self.model.time_integral(t1, t2, |s| self.eta_rate(z, s))
    }

    fn eta_closed(&self, z: C64, t1: f64, t2: f64) -> Option<C64> {
        if self.model.is_homogeneous() {
            return Some(self.eta_rate(z, 0.0) * (t2 - t1));
        }
        if let PiiKind::TimeChangedBrownian { psi } = self.model.kind() {
            return Some((z * z - z) * (0.5 * (psi.eval(t2) - psi.eval(t1))));
        }
        None
    }

    /// Fixed-resolution version used inside node loops.
    fn eta_fixed(&self, z: C64, t1: f64, t2: f64) -> C64 {
        self.eta_closed(z, t1, t2)
            .unwrap_or_else(|| self.model.integrate_fixed(t1, t2, 1.0, |s| self.eta_rate(z, s)))
    }

    /// Mean-variance tradeoff `K_t = int_0^t lambda_u kappa_du(1)`.
    pub fn mvt_k(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.horizon() * (1.0 + 1e-12)) {
            return Err(invalid(format!("time {t} lies outside [0, {}]", self.horizon())));
        }
        Ok(self.model.time_integral(0.0, t, |s| C64::new(self.k_rate(s), 0.0))?.re)
    }

    fn check_measure(&self, measure: &PayoffMeasure) -> Result<()> {
        let Some((lo, hi)) = measure.required_interval() else {
            return Ok(());
        };
        let strip = self.model.strip();
        strip.check(lo)?;
        strip.check(hi)?;
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t.is_finite() && t >= 0.0 && t <= self.horizon() * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(invalid(format!("time {t} lies outside [0, {}]", self.horizon())))
        }
    }

    /// Variance-optimal price `H_t(s)`.
    pub fn price_process(&self, measure: &PayoffMeasure, t: f64, s: f64, q: &LineQuadrature) -> Result<f64> {
        self.check_time(t)?;
        self.check_measure(measure)?;
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid(format!("spot must be positive, got {s}")));
        }
        let t_end = self.horizon();
        let ls = s.ln();
        measure.integrate_real(|z| (self.eta_fixed(z, t, t_end)).exp() * spot_power(s, ls, z), q)
    }

    /// Pure hedge `xi_t(s)` at the left-limit price `s`.
    pub fn pure_hedge(&self, measure: &PayoffMeasure, t: f64, s: f64, q: &LineQuadrature) -> Result<f64> {
        self.check_time(t)?;
        self.check_measure(measure)?;
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid(format!("spot must be positive, got {s}")));
        }
        let t_end = self.horizon();
        let ls = s.ln();
        measure.integrate_real(
            |z| self.gamma(z, t) * (self.eta_fixed(z, t, t_end)).exp() * spot_power(s, ls, z - 1.0),
            q,
        )
    }

    /// Variance-optimal initial capital `V0 = H_0(s0)`.
    pub fn initial_capital(&self, measure: &PayoffMeasure, q: &LineQuadrature) -> Result<f64> {
        self.price_process(measure, 0.0, self.s0, q)
    }

    /// Time density of `beta(y, z, .)`.
    pub fn beta_density(&self, y: C64, z: C64, t: f64) -> Result<C64> {
        self.check_time(t)?;
        let strip = self.model.strip();
        for x in [y.re, z.re, y.re + z.re, y.re + 1.0, z.re + 1.0] {
            strip.check(x)?;
        }
        Ok(self.beta_rate(y, z, t))
    }

    #[inline]
    fn beta_rate(&self, y: C64, z: C64, t: f64) -> C64 {
        self.model.bilinear_rate(y, z, t) - self.gamma(z, t) * self.model.bilinear_rate(y, ONE, t)
    }

    fn j0_nodes(measure: &PayoffMeasure, umax: f64, h: f64) -> (Vec<JNode>, Vec<JNode>) {
        let n = (umax / h).ceil() as usize;
        let mut all = Vec::new();
        let mut half = Vec::new();
        let symmetric = measure.contours().iter().all(|c| c.is_symmetric()) && {
            let atoms = measure.atoms();
            atoms.iter().all(|a| {
                a.z.im == 0.0 && a.weight.im == 0.0
                    || atoms.iter().any(|b| b.z == a.z.conj() && b.weight == a.weight.conj())
            })
        };
        for a in measure.atoms() {
            all.push(JNode { z: a.z, w: a.weight, mult: 1.0 });
            if !symmetric {
                half.push(JNode { z: a.z, w: a.weight, mult: 1.0 });
            } else if a.z.im > 0.0 {
                half.push(JNode { z: a.z, w: a.weight, mult: 2.0 });
            } else if a.z.im == 0.0 {
                half.push(JNode { z: a.z, w: a.weight, mult: 1.0 });
            }
        }
        for c in measure.contours() {
            for j in 0..=2 * n {
                let u = h * (j as f64 - n as f64);
                let w = c.density(u) * (if j == 0 || j == 2 * n { 0.5 * h } else { h });
                let z = C64::new(c.abscissa, u);
                all.push(JNode { z, w, mult: 1.0 });
                if !symmetric {
                    half.push(JNode { z, w, mult: 1.0 });
                } else if j > n {
                    half.push(JNode { z, w, mult: 2.0 });
                } else if j == n {
                    half.push(JNode { z, w, mult: 1.0 });
                }
            }
        }
        (all, half)
    }

    /// Kinds whose rates are `c(t) f(z)` reduce to a Lévy model run on the
    /// clock `int c`: returns a reference time, `c` there and the total clock.
    fn clock(&self) -> Option<(f64, f64, f64)> {
        if self.model.is_homogeneous() {
            return Some((0.0, 1.0, self.horizon()));
        }
        if let PiiKind::TimeChangedBrownian { psi } = self.model.kind() {
            let knots = psi.knots();
            let t_end = self.horizon();
            let (t_ref, c) = knots
                .windows(2)
                .filter(|w| w[0] < t_end)
                .map(|w| {
                    let t = 0.5 * (w[0] + w[1].min(t_end));
                    (t, psi.slope(t))
                })
                .find(|p| p.1 > 0.0)?;
            return Some((t_ref, c, psi.eval(t_end) - psi.eval(0.0)));
        }
        None
    }

    fn j0_homogeneous(&self, all: &[JNode], half: &[JNode], (t_ref, scale, t_end): (f64, f64, f64)) -> C64 {
        let m = &self.model;
        let k = self.k_rate(t_ref) / scale;
        struct Pre {
            kappa: C64,
            eta: C64,
            gamma: C64,
            rho1: C64,
            sw: C64,
        }
        let ls0 = self.s0.ln();
        let pre = |n: &JNode| Pre {
            kappa: m.rate(n.z, t_ref) / scale,
            eta: self.eta_rate(n.z, t_ref) / scale,
            gamma: self.gamma(n.z, t_ref),
            rho1: m.bilinear_rate(n.z, ONE, t_ref) / scale,
            sw: n.w * spot_power(self.s0, ls0, n.z) * n.mult,
        };
        let py: Vec<Pre> = all.iter().map(pre).collect();
        let pz: Vec<Pre> = half.iter().map(pre).collect();
        let rows: Vec<C64> = all
            .par_iter()
            .zip(py.par_iter())
            .map(|(ny, y)| {
                let mut acc = C64::new(0.0, 0.0);
                for (nz, z) in half.iter().zip(&pz) {
                    let a = m.rate(ny.z + nz.z, t_ref) / scale;
                    let b = (a - y.kappa - z.kappa) - z.gamma * y.rho1;
                    let c = y.eta + z.eta - k;
                    // int_0^T exp(a t + c (T - t)) dt, expanded around the larger exponent
                    let tint = if (a - c).re > 0.0 {
                        (a * t_end).exp() * exprel((c - a) * t_end) * t_end
                    } else {
                        (c * t_end).exp() * exprel((a - c) * t_end) * t_end
                    };
                    acc += z.sw * b * tint;
                }
                acc * y.sw
            })
            .collect();
        rows.iter().sum()
    }

    fn j0_inhomogeneous(&self, all: &[JNode], half: &[JNode], steps: usize) -> C64 {
        let t_end = self.horizon();
        let m = &self.model;
        let steps = steps.max(2) + steps % 2;
        let dt = t_end / steps as f64;
        // fine grid: nodes at even indices, midpoints at odd ones
        let tf: Vec<f64> = (0..=2 * steps).map(|j| 0.5 * dt * j as f64).collect();
        let knodes: Vec<f64> = tf.iter().map(|&t| self.k_rate(t)).collect();
        let mut k_tail = vec![0.0; steps + 1];
        for i in (0..steps).rev() {
            let (a, b, c) = (knodes[2 * i], knodes[2 * i + 1], knodes[2 * i + 2]);
            k_tail[i] = k_tail[i + 1] + dt / 6.0 * (a + 4.0 * b + c);
        }
        let ls0 = self.s0.ln();
        struct Pre {
            rate: Vec<C64>,
            gamma: Vec<C64>,
            rho1: Vec<C64>,
            eta_tail: Vec<C64>,
            sw: C64,
        }
        let pre = |n: &JNode| {
            let er: Vec<C64> = tf.iter().map(|&t| self.eta_rate(n.z, t)).collect();
            let mut eta_tail = vec![C64::new(0.0, 0.0); steps + 1];
            for i in (0..steps).rev() {
                eta_tail[i] = eta_tail[i + 1] + (er[2 * i] + er[2 * i + 1] * 4.0 + er[2 * i + 2]) * (dt / 6.0);
            }
            Pre {
                rate: (0..=steps).map(|i| m.rate(n.z, tf[2 * i])).collect(),
                gamma: (0..=steps).map(|i| self.gamma(n.z, tf[2 * i])).collect(),
                rho1: (0..=steps).map(|i| m.bilinear_rate(n.z, ONE, tf[2 * i])).collect(),
                eta_tail,
                sw: n.w * spot_power(self.s0, ls0, n.z) * n.mult,
            }
        };
        let py: Vec<Pre> = all.iter().map(pre).collect();
        let pz: Vec<Pre> = half.iter().map(pre).collect();
        let rows: Vec<C64> = all
            .par_iter()
            .zip(py.par_iter())
            .map(|(ny, y)| {
                let mut acc = C64::new(0.0, 0.0);
                let mut ryz = vec![C64::new(0.0, 0.0); 2 * steps + 1];
                for (nz, z) in half.iter().zip(&pz) {
                    let w = ny.z + nz.z;
                    for (r, &t) in ryz.iter_mut().zip(&tf) {
                        *r = m.rate(w, t);
                    }
                    // exponent exact-linear and b trapezoidal on each interval
                    let mut kap = C64::new(0.0, 0.0);
                    let mut sum = C64::new(0.0, 0.0);
                    let mut prev = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
                    for i in 0..=steps {
                        if i > 0 {
                            kap += (ryz[2 * i - 2] + ryz[2 * i - 1] * 4.0 + ryz[2 * i]) * (dt / 6.0);
                        }
                        let b = (ryz[2 * i] - y.rate[i] - z.rate[i]) - z.gamma[i] * y.rho1[i];
                        let e = kap + y.eta_tail[i] + z.eta_tail[i] - k_tail[i];
                        if i > 0 {
                            let (b0, e0) = prev;
                            let w = if (e - e0).re > 0.0 { e.exp() * exprel(e0 - e) } else { e0.exp() * exprel(e - e0) };
                            sum += (b0 + b) * 0.5 * w;
                        }
                        prev = (b, e);
                    }
                    acc += z.sw * sum * dt;
                }
                acc * y.sw
            })
            .collect();
        rows.iter().sum()
    }

    /// Node spacing from the distance `d` of the contours to the nearest
    /// singularity of the `J0` integrand; the trapezoidal error is then
    /// about `exp(-2 pi d / h)`.
    fn j0_spacing(&self, measure: &PayoffMeasure, opts: &J0Options) -> f64 {
        let strip = self.model.strip();
        let d = measure
            .contours()
            .iter()
            .map(|c| {
                let r = c.abscissa;
                [r.abs(), (r - 1.0).abs(), r - strip.lower, 2.0 * r - strip.lower, strip.upper - r - 1.0, strip.upper - 2.0 * r]
                    .into_iter()
                    .filter(|x| x.is_finite())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min);
        (opts.umax / (1usize << opts.log2_panels) as f64).min(2.0 * std::f64::consts::PI * d / 30.0)
    }

    fn j0_level(&self, measure: &PayoffMeasure, opts: &J0Options, umax: f64, h: f64) -> C64 {
        let (all, half) = Self::j0_nodes(measure, umax, h);
        match self.clock() {
            Some(clock) => self.j0_homogeneous(&all, &half, clock),
            None => self.j0_inhomogeneous(&all, &half, opts.time_steps),
        }
    }

    /// Minimal quadratic hedging error `J0 = E[(V0 + G_T(phi) - f(S_T))^2]`.
    ///
    /// The contour truncation is checked by doubling `umax` until the value
    /// changes by less than `tol` relative.
    pub fn quadratic_error(&self, measure: &PayoffMeasure, opts: &J0Options) -> Result<f64> {
        self.check_measure(measure)?;
        if !(opts.umax > 0.0) || opts.log2_panels < 2 || opts.log2_panels > 16 {
            return Err(invalid("J0 options need umax > 0 and log2_panels in 2..=16"));
        }
        let scale = self.s0 * self.s0;
        let h = self.j0_spacing(measure, opts);
        let mut umax = opts.umax;
        let mut value = self.j0_level(measure, opts, umax, h);
        if !measure.contours().is_empty() {
            // the truncation error of a u^-2 kernel pair decays like umax^-3
            let mut settled = false;
            for _ in 0..opts.max_doublings.max(1) {
                umax *= 2.0;
                let next = self.j0_level(measure, opts, umax, h);
                let step = (next - value) / 7.0;
                value = next + step;
                if step.re.abs() <= opts.tol * value.re.abs() + 1e-12 * scale {
                    settled = true;
                    break;
                }
                value = next;
            }
            if !settled {
                return Err(HedgeError::QuadratureFailure(format!(
                    "J0 did not settle after {} doublings of umax (value {})",
                    opts.max_doublings, value.re
                )));
            }
        }
        if !value.is_finite() {
            return Err(HedgeError::QuadratureFailure("non-finite J0".into()));
        }
        if value.re < -1e-10 * scale {
            return Err(HedgeError::QuadratureFailure(format!("negative quadratic error {}", value.re)));
        }
        Ok(value.re.max(0.0))
    }

    #[doc(hidden)]
    pub fn j0_truncated(&self, measure: &PayoffMeasure, opts: &J0Options, umax: f64) -> f64 {
        let h = self.j0_spacing(measure, opts);
        self.j0_level(measure, opts, umax, h).re
    }

    /// Per-date weights for fast evaluation of `H`, `xi` and `lambda / S`
    /// along simulated paths at the rebalancing `dates`.
    pub fn hedge_plan(&self, measure: &PayoffMeasure, dates: &[f64], opts: &PlanOptions) -> Result<SpectralPlan> {
        self.check_measure(measure)?;
        for &t in dates {
            self.check_time(t)?;
        }
        if dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("rebalancing dates must increase strictly"));
        }
        let t_end = self.horizon();
        // E(z, t_i) for all dates from per-interval integrals accumulated backwards
        let eta_tails = |z: C64| -> Vec<C64> {
            let mut out = vec![C64::new(0.0, 0.0); dates.len()];
            let mut acc = C64::new(0.0, 0.0);
            let mut upper = t_end;
            for i in (0..dates.len()).rev() {
                acc += self.eta_fixed(z, dates[i], upper);
                upper = dates[i];
                out[i] = acc;
            }
            out
        };
        let mut groups = Vec::new();
        for c in measure.contours() {
            let r = c.abscissa;
            // Trapezoidal nodes converge geometrically for integrands analytic in a
            // strip of half-width d around the contour; error ~ exp(-2 pi d / h).
            let strip = self.model.strip();
            let d = [r.abs(), (r - 1.0).abs(), r - strip.lower, strip.upper - r - 1.0]
                .into_iter()
                .filter(|x| x.is_finite())
                .fold(f64::INFINITY, f64::min);
            let h = (opts.umax / (1usize << opts.log2_panels) as f64).min(2.0 * std::f64::consts::PI * d / 30.0);
            // grow U until the least damped date has a negligible tail
            let last = dates.len() - 1;
            let mut umax = opts.umax;
            loop {
                let z = C64::new(r, umax);
                let tail = (c.density(umax) * self.eta_fixed(z, dates[last], t_end).exp()).norm() * umax;
                let body = integrate_half_line(
                    |u| (c.density(u) * self.eta_fixed(C64::new(r, u), dates[last], t_end).exp()).norm().into(),
                    &LineQuadrature { umax: opts.umax, log2_panels: 8, tol: 1e-3 },
                )
                .map(|v| v.value.re)
                .unwrap_or(f64::INFINITY);
                if tail <= 1e-3 * opts.truncation_tol * body || umax >= 256.0 * opts.umax {
                    break;
                }
                umax *= 2.0;
            }
            let len = (umax / h).ceil() as usize;
            let (u0, count, doubled) = if c.is_symmetric() { (0.0, len + 1, true) } else { (-umax, 2 * len + 1, false) };
            let cols: Vec<Vec<(C64, C64)>> = (0..count)
                .into_par_iter()
                .map(|j| {
                    let u = u0 + h * j as f64;
                    let z = C64::new(r, u);
                    let end = if (doubled && j == 0) || (!doubled && (j == 0 || j == count - 1)) { 0.5 } else { 1.0 };
                    let w = c.density(u) * (h * end);
                    eta_tails(z)
                        .iter()
                        .zip(dates)
                        .map(|(e, &t)| {
                            let a = w * e.exp();
                            (a, a * self.gamma(z, t))
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
            groups.push(NodeGroup { shift: r, u0, step: h, doubled, weights });
        }
        let atoms = measure
            .atoms()
            .iter()
            .map(|a| {
                let tails = eta_tails(a.z);
                let weights = tails
                    .iter()
                    .zip(dates)
                    .map(|(e, &t)| {
                        let v = a.weight * e.exp();
                        (v, v * self.gamma(a.z, t))
                    })
                    .collect();
                PlanAtom { exponent: a.z, weights }
            })
            .collect();
        let q = LineQuadrature::default();
        let v0 = self.price_process(measure, dates[0], self.s0, &q)?;
        let payoff_measure = measure.clone();
        Ok(SpectralPlan {
            dates: dates.to_vec(),
            basis: Basis::Spot,
            groups,
            atoms,
            feedback: dates.iter().map(|&t| self.lambda(t)).collect(),
            initial_capital: v0,
            payoff: Box::new(move |s| payoff_measure.payoff(s).unwrap_or(f64::NAN)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulants::LevyCumulantModel;
    use crate::montecarlo::plan::HedgePlan;
    use crate::payoff::CallVariant;
    use crate::pii::Tabulated;

    fn gaussian_martingale() -> FsCoefficients {
        let m = PiiModel::levy(LevyCumulantModel::brownian(0.4, -0.08).unwrap(), 0.25).unwrap();
        FsCoefficients::build(m, 100.0).unwrap()
    }

    fn nig(scale: f64) -> FsCoefficients {
        let d = LevyCumulantModel::nig(38.46, -3.85, 6.40, 0.64).unwrap();
        let d = d.reparametrize_moment_matched(scale).unwrap();
        FsCoefficients::build(PiiModel::levy(d, 0.25).unwrap(), 100.0).unwrap()
    }

    fn tcb() -> FsCoefficients {
        let psi = Tabulated::new(&[(0.0, 0.0), (0.1, 0.01), (0.25, 0.05)]).unwrap();
        FsCoefficients::build(PiiModel::time_changed_brownian(psi, 0.25).unwrap(), 100.0).unwrap()
    }

    fn norm_cdf(x: f64) -> f64 {
        0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
    }

    #[test]
    fn black_scholes_limit() {
        let c = gaussian_martingale();
        let m = PayoffMeasure::call(100.0, CallVariant::AboveOne(1.5)).unwrap();
        let q = LineQuadrature::default();
        let v0 = c.initial_capital(&m, &q).unwrap();
        let xi = c.pure_hedge(&m, 0.0, 100.0, &q).unwrap();
        let d = 0.4 * 0.5 / 2.0;
        assert!((v0 - 100.0 * (2.0 * norm_cdf(d) - 1.0)).abs() < 1e-9 * v0);
        assert!((xi - norm_cdf(d)).abs() < 1e-9);
        assert!(c.lambda(0.1).abs() < 1e-14);
    }

    #[test]
    fn endpoint_identities() {
        for c in [nig(0.08), tcb(), gaussian_martingale()] {
            for t in [0.0, 0.1, 0.2] {
                assert_eq!(c.gamma(ONE, t), ONE);
                assert_eq!(c.gamma(C64::new(0.0, 0.0), t), C64::new(0.0, 0.0));
                assert_eq!(c.eta_integral(ONE, t, 0.25).unwrap(), C64::new(0.0, 0.0));
                assert_eq!(c.eta_integral(C64::new(0.0, 0.0), t, 0.25).unwrap(), C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn poisson_gamma_and_k() {
        let m = PiiModel::levy(LevyCumulantModel::poisson(1.0).unwrap(), 1.0).unwrap();
        let c = FsCoefficients::build(m, 1.0).unwrap();
        let z = C64::new(0.4, 1.3);
        let e = std::f64::consts::E;
        assert!((c.gamma(z, 0.0) - (z.exp() - 1.0) / (e - 1.0)).norm() < 1e-14);
        assert!((c.mvt_k(1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tcb_coefficients() {
        let c = tcb();
        let z = C64::new(0.7, 2.0);
        assert!((c.gamma(z, 0.05) - z).norm() < 1e-14);
        assert_eq!(c.lambda(0.2), 0.5);
        assert!((c.mvt_k(0.25).unwrap() - 0.05 / 4.0).abs() < 1e-14);
        // delta at z = 2 : xi_t = 2 exp(psi(T) - psi(t)) s
        let m = PayoffMeasure::atoms_only(vec![(C64::new(2.0, 0.0), ONE)]).unwrap();
        let xi = c.pure_hedge(&m, 0.1, 90.0, &LineQuadrature::default()).unwrap();
        assert!((xi - 2.0 * (0.04f64).exp() * 90.0).abs() < 1e-10 * xi);
    }

    #[test]
    fn forward_contract() {
        let c = nig(0.08);
        let m = PayoffMeasure::atoms_only(vec![(ONE, ONE)]).unwrap();
        let q = LineQuadrature::default();
        assert_eq!(c.price_process(&m, 0.1, 97.0, &q).unwrap(), 97.0);
        assert_eq!(c.pure_hedge(&m, 0.1, 97.0, &q).unwrap(), 1.0);
    }

    #[test]
    fn terminal_consistency() {
        let c = nig(1.0);
        let m = PayoffMeasure::call(99.0, CallVariant::AboveOne(1.5)).unwrap();
        let q = LineQuadrature::default();
        for s in [60.0, 99.0, 100.0, 150.0] {
            let v = c.price_process(&m, 0.25, s, &q).unwrap();
            assert!((v - (s - 99.0f64).max(0.0)).abs() < 1e-6 * 99.0, "{s}: {v}");
        }
    }

    #[test]
    fn martingale_delta_matches_finite_difference() {
        let c = gaussian_martingale();
        let m = PayoffMeasure::call(95.0, CallVariant::UnitInterval(0.5)).unwrap();
        let q = LineQuadrature::default();
        let s = 103.0;
        let h = 1e-3 * s;
        let fd = (c.price_process(&m, 0.1, s + h, &q).unwrap() - c.price_process(&m, 0.1, s - h, &q).unwrap()) / (2.0 * h);
        let xi = c.pure_hedge(&m, 0.1, s, &q).unwrap();
        assert!((fd - xi).abs() < 1e-4 * xi);
    }

    #[test]
    fn gamma_majoration() {
        for c in [nig(0.08), nig(2.0), tcb()] {
            for &(x, u) in &[(0.5, 0.0), (1.5, 3.0), (0.3, 40.0), (-0.5, 7.0)] {
                let z = C64::new(x, u);
                let t = 0.1;
                let m = c.model();
                let dz = (m.rate(C64::new(2.0 * x, 0.0), t).re - 2.0 * m.rate(z, t).re) / m.rho_rate(t);
                assert!(c.gamma(z, t).norm_sqr() <= dz * (1.0 + 1e-12), "{z}");
            }
        }
    }

    #[test]
    fn complete_markets_have_zero_error() {
        let poisson = PiiModel::levy(LevyCumulantModel::poisson(2.0).unwrap(), 0.25).unwrap();
        let m = PayoffMeasure::call(99.0, CallVariant::AboveOne(1.5)).unwrap();
        let opts = J0Options { umax: 50.0, ..J0Options::default() };
        for c in [FsCoefficients::build(poisson, 100.0).unwrap(), tcb()] {
            let j0 = c.quadratic_error(&m, &opts).unwrap();
            assert!(j0 < 1e-8 * 1e4, "{j0}");
        }
    }

    #[test]
    fn power_payoff_error_matches_closed_form() {
        // Pi = delta_y: J0 = s0^{2y} b(y,y) (e^{a T} - e^{c T}) / (a - c) directly.
        let c = nig(0.2);
        let y = C64::new(0.5, 0.0);
        let m = PayoffMeasure::atoms_only(vec![(y, ONE)]).unwrap();
        let j0 = c.quadratic_error(&m, &J0Options::default()).unwrap();
        let d = c.model().kind().clone();
        let PiiKind::LevyHomogeneous { driver } = d else { unreachable!() };
        let k = |x: f64| driver.eval_unchecked(C64::new(x, 0.0)).re;
        let rho = k(2.0) - 2.0 * k(1.0);
        let g = (k(1.5) - k(0.5) - k(1.0)) / rho;
        let eta = k(0.5) - g * k(1.0);
        let b = k(1.0) - 2.0 * k(0.5) - g * g * rho;
        let a = k(1.0);
        let cc = 2.0 * eta - k(1.0).powi(2) / rho;
        let expect = 100.0 * b * ((a * 0.25).exp() - (cc * 0.25).exp()) / (a - cc);
        assert!((j0 - expect).abs() < 1e-12 * expect, "{j0} {expect}");
    }

    #[test]
    fn plan_matches_direct_evaluation() {
        let c = nig(0.08);
        let m = PayoffMeasure::call(99.0, CallVariant::AboveOne(1.2)).unwrap();
        let dates: Vec<f64> = (0..12).map(|i| 0.25 * i as f64 / 12.0).collect();
        let plan = c.hedge_plan(&m, &dates, &PlanOptions::default()).unwrap();
        let q = LineQuadrature::default();
        for &(i, s) in &[(0usize, 100.0), (5, 93.0), (11, 104.0)] {
            let v = plan.evaluate(i, s);
            let p = c.price_process(&m, dates[i], s, &q).unwrap();
            let x = c.pure_hedge(&m, dates[i], s, &q).unwrap();
            assert!((v.price - p).abs() < 1e-6, "{i} {} {p}", v.price);
            assert!((v.hedge - x).abs() < 1e-7, "{i} {} {x}", v.hedge);
            assert!((v.feedback - c.lambda(dates[i]) / s).abs() < 1e-15);
        }
    }

    #[test]
    fn inhomogeneous_error_matches_homogeneous() {
        let d = LevyCumulantModel::nig(38.46, -3.85, 6.40, 0.64).unwrap();
        let flat = crate::pii::Kernel::Table(Tabulated::new(&[(0.0, 1.0), (0.25, 1.0)]).unwrap());
        let hom = FsCoefficients::build(PiiModel::levy(d, 0.25).unwrap(), 100.0).unwrap();
        let inh = FsCoefficients::build(PiiModel::wiener(d, flat, 0.25).unwrap(), 100.0).unwrap();
        let m = PayoffMeasure::call(99.0, CallVariant::AboveOne(1.5)).unwrap();
        let opts = J0Options { time_steps: 16, ..J0Options::default() };
        let a = hom.j0_truncated(&m, &opts, 20.0);
        let b = inh.j0_truncated(&m, &opts, 20.0);
        assert!((a - b).abs() < 1e-6 * a, "{a} {b}");
    }
}
