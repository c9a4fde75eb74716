//! Lévy drivers and their cumulant functions `kappa(z) = ln E[exp(z L_1)]`.

use num_complex::Complex64 as C64;

use crate::error::{invalid, HedgeError, Result};

/// Relative safety margin kept away from the boundary of the strip.
pub const DOMAIN_MARGIN: f64 = 1e-9;

/// Open real interval on which the cumulant is finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainStrip {
    pub lower: f64,
    pub upper: f64,
}

impl DomainStrip {
    pub const WHOLE_LINE: DomainStrip = DomainStrip { lower: f64::NEG_INFINITY, upper: f64::INFINITY };

    pub fn contains(&self, x: f64) -> bool {
        let pad = |b: f64| if b.is_finite() { DOMAIN_MARGIN * b.abs().max(1.0) } else { 0.0 };
        x.is_finite() && x > self.lower + pad(self.lower) && x < self.upper - pad(self.upper)
    }

    pub fn check(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(HedgeError::DomainViolation { value: x, lower: self.lower, upper: self.upper })
        }
    }

    /// Image of the strip under division by a positive scale.
    pub fn scaled(&self, scale: f64) -> DomainStrip {
        DomainStrip { lower: self.lower / scale, upper: self.upper / scale }
    }
}

/// Parametric Lévy driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Driver {
    Poisson { intensity: f64 },
    Nig { alpha: f64, beta: f64, delta: f64, mu: f64 },
    VarianceGamma { alpha: f64, beta: f64, delta: f64, mu: f64 },
    BrownianDrift { sigma: f64, drift: f64 },
}

/// A validated Lévy driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyCumulantModel {
    driver: Driver,
}

/// Result of checking the exponential-hedging assumptions at a given scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialAssumptions {
    /// `2 * scale` lies in the open strip.
    pub two_in_domain: bool,
    /// `kappa(2s) - 2 kappa(s) > 0`, i.e. the scaled driver is not deterministic.
    pub nondegenerate: bool,
    /// NIG-specific closed-form check `scale <= (alpha - beta) / 2`.
    pub nig_closed_form: Option<bool>,
}

impl ExponentialAssumptions {
    pub fn valid(&self) -> bool {
        self.two_in_domain && self.nondegenerate && self.nig_closed_form.unwrap_or(true)
    }
}

fn finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {x}")))
    }
}

impl LevyCumulantModel {
    pub fn poisson(intensity: f64) -> Result<Self> {
        finite("intensity", intensity)?;
        if intensity <= 0.0 {
            return Err(invalid(format!("Poisson intensity must be positive, got {intensity}")));
        }
        Ok(Self { driver: Driver::Poisson { intensity } })
    }

    pub fn nig(alpha: f64, beta: f64, delta: f64, mu: f64) -> Result<Self> {
        for (n, v) in [("alpha", alpha), ("beta", beta), ("delta", delta), ("mu", mu)] {
            finite(n, v)?;
        }
        if !(alpha > beta.abs()) {
            return Err(invalid(format!("NIG needs alpha > |beta|, got alpha={alpha}, beta={beta}")));
        }
        if delta <= 0.0 {
            return Err(invalid(format!("NIG delta must be positive, got {delta}")));
        }
        Ok(Self { driver: Driver::Nig { alpha, beta, delta, mu } })
    }

    pub fn variance_gamma(alpha: f64, beta: f64, delta: f64, mu: f64) -> Result<Self> {
        for (n, v) in [("alpha", alpha), ("beta", beta), ("delta", delta), ("mu", mu)] {
            finite(n, v)?;
        }
        if alpha <= 0.0 {
            return Err(invalid(format!("VG alpha must be positive, got {alpha}")));
        }
        if delta <= 0.0 {
            return Err(invalid(format!("VG delta must be positive, got {delta}")));
        }
        Ok(Self { driver: Driver::VarianceGamma { alpha, beta, delta, mu } })
    }

    pub fn brownian(sigma: f64, drift: f64) -> Result<Self> {
        finite("sigma", sigma)?;
        finite("drift", drift)?;
        if sigma < 0.0 {
            return Err(invalid(format!("sigma must be non-negative, got {sigma}")));
        }
        Ok(Self { driver: Driver::BrownianDrift { sigma, drift } })
    }

    pub fn driver(&self) -> &Driver {
        &self.driver
    }

    pub fn strip(&self) -> DomainStrip {
        match self.driver {
            Driver::Poisson { .. } | Driver::BrownianDrift { .. } => DomainStrip::WHOLE_LINE,
            Driver::Nig { alpha, beta, .. } => DomainStrip { lower: -alpha - beta, upper: alpha - beta },
            Driver::VarianceGamma { alpha, beta, .. } => {
                let r = (beta * beta + 2.0 * alpha).sqrt();
                DomainStrip { lower: -beta - r, upper: -beta + r }
            }
        }
    }

    /// `kappa(z)` without the domain check. The caller guarantees `Re z` is admissible.
    #[inline]
    pub fn eval_unchecked(&self, z: C64) -> C64 {
        match self.driver {
            Driver::Poisson { intensity } => (z.exp() - 1.0) * intensity,
            Driver::Nig { alpha, beta, delta, mu } => {
                let g0 = (alpha * alpha - beta * beta).sqrt();
                let p = z + beta;
                let gz = (C64::new(alpha * alpha, 0.0) - p * p).sqrt();
                z * mu + (C64::new(g0, 0.0) - gz) * delta
            }
            Driver::VarianceGamma { alpha, beta, delta, mu } => {
                let w = C64::new(alpha, 0.0) - z * beta - z * z * 0.5;
                z * mu + (C64::new(alpha.ln(), 0.0) - w.ln()) * delta
            }
            Driver::BrownianDrift { sigma, drift } => z * drift + z * z * (0.5 * sigma * sigma),
        }
    }

    pub fn evaluate(&self, z: C64) -> Result<C64> {
        self.strip().check(z.re)?;
        Ok(self.eval_unchecked(z))
    }

    /// `kappa'(z)`, unchecked.
    #[inline]
    pub fn d1_unchecked(&self, z: C64) -> C64 {
        match self.driver {
            Driver::Poisson { intensity } => z.exp() * intensity,
            Driver::Nig { alpha, beta, delta, mu } => {
                let p = z + beta;
                let gz = (C64::new(alpha * alpha, 0.0) - p * p).sqrt();
                p / gz * delta + mu
            }
            Driver::VarianceGamma { alpha, beta, delta, mu } => {
                let p = z + beta;
                let w = C64::new(alpha, 0.0) - z * beta - z * z * 0.5;
                p / w * delta + mu
            }
            Driver::BrownianDrift { sigma, drift } => z * (sigma * sigma) + drift,
        }
    }

    /// `kappa''(z)`, unchecked.
    #[inline]
    pub fn d2_unchecked(&self, z: C64) -> C64 {
        match self.driver {
            Driver::Poisson { intensity } => z.exp() * intensity,
            Driver::Nig { alpha, beta, delta, .. } => {
                let p = z + beta;
                let gz = (C64::new(alpha * alpha, 0.0) - p * p).sqrt();
                (gz * gz * gz).inv() * (delta * alpha * alpha)
            }
            Driver::VarianceGamma { alpha, beta, delta, .. } => {
                let p = z + beta;
                let w = C64::new(alpha, 0.0) - z * beta - z * z * 0.5;
                (w + p * p) / (w * w) * delta
            }
            Driver::BrownianDrift { sigma, .. } => C64::new(sigma * sigma, 0.0),
        }
    }

    /// Derivative of order `k` in `1..=4` at complex `z`.
    pub fn derivative(&self, k: u32, z: C64) -> Result<C64> {
        self.strip().check(z.re)?;
        Ok(match k {
            1 => self.d1_unchecked(z),
            2 => self.d2_unchecked(z),
            3 | 4 => self.higher(k, z),
            _ => return Err(invalid(format!("derivative order must lie in 1..=4, got {k}"))),
        })
    }

    fn higher(&self, k: u32, z: C64) -> C64 {
        match self.driver {
            Driver::Poisson { intensity } => z.exp() * intensity,
            Driver::Nig { alpha, beta, delta, .. } => {
                let p = z + beta;
                let g2 = C64::new(alpha * alpha, 0.0) - p * p;
                let gz = g2.sqrt();
                let a2 = alpha * alpha;
                if k == 3 {
                    p / gz.powi(5) * (3.0 * delta * a2)
                } else {
                    (g2 + p * p * 5.0) / gz.powi(7) * (3.0 * delta * a2)
                }
            }
            Driver::VarianceGamma { alpha, beta, delta, .. } => {
                let p = z + beta;
                let w = C64::new(alpha, 0.0) - z * beta - z * z * 0.5;
                if k == 3 {
                    p * (w * 3.0 + p * p * 2.0) / w.powi(3) * delta
                } else {
                    (w * w * 3.0 + w * p * p * 12.0 + p.powi(4) * 6.0) / w.powi(4) * delta
                }
            }
            Driver::BrownianDrift { .. } => C64::new(0.0, 0.0),
        }
    }

    /// Cumulants `kappa^(k)(0)` for `k = 1..=order`.
    pub fn derivatives_at_zero(&self, order: u32) -> Result<Vec<f64>> {
        if !(1..=4).contains(&order) {
            return Err(invalid(format!("order must lie in 1..=4, got {order}")));
        }
        let z = C64::new(0.0, 0.0);
        (1..=order).map(|k| self.derivative(k, z).map(|c| c.re)).collect()
    }

    /// Mean, standard deviation, skewness and excess kurtosis of `L_t`.
    pub fn moments(&self, t: f64) -> Result<[f64; 4]> {
        let c = self.derivatives_at_zero(4)?;
        let var = c[1] * t;
        if var <= 0.0 {
            return Err(HedgeError::DegenerateModel("driver has zero variance".into()));
        }
        Ok([c[0] * t, var.sqrt(), c[2] * t / var.powf(1.5), c[3] * t / (var * var)])
    }

    /// Rescale NIG so that `alpha' = scale * alpha` while variance, skewness
    /// (hence the third cumulant) and mean are preserved.
    ///
    /// Solves for `(beta', delta')` by damped Newton on the relative
    /// residuals of the second and third cumulants.
    pub fn reparametrize_moment_matched(&self, scale: f64) -> Result<Self> {
        let Driver::Nig { alpha, beta, delta, mu } = self.driver else {
            return Err(invalid("moment-matched rescaling is defined for NIG only"));
        };
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid(format!("scale must be positive, got {scale}")));
        }
        let k1 = mu + delta * beta / (alpha * alpha - beta * beta).sqrt();
        let cum = |a: f64, b: f64, d: f64| {
            let g = (a * a - b * b).sqrt();
            (d * a * a / g.powi(3), 3.0 * d * a * a * b / g.powi(5))
        };
        let (k2, k3) = cum(alpha, beta, delta);
        let a = scale * alpha;
        if beta == 0.0 {
            let d = k2 / a;
            return Self::nig(a, 0.0, d, k1);
        }
        let mut b = (beta * scale * scale).clamp(-0.9 * a, 0.9 * a);
        let mut d = delta * scale;
        let residual = |b: f64, d: f64| {
            let (c2, c3) = cum(a, b, d);
            (c2 / k2 - 1.0, c3 / k3 - 1.0)
        };
        let mut r = residual(b, d);
        for _ in 0..200 {
            if r.0.abs() < 1e-14 && r.1.abs() < 1e-14 {
                break;
            }
            let g = (a * a - b * b).sqrt();
            let a2 = a * a;
            let j11 = d * a2 * 3.0 * b / g.powi(5) / k2;
            let j12 = a2 / g.powi(3) / k2;
            let j21 = 3.0 * d * a2 * (g * g + 5.0 * b * b) / g.powi(7) / k3;
            let j22 = 3.0 * a2 * b / g.powi(5) / k3;
            let det = j11 * j22 - j12 * j21;
            if det == 0.0 || !det.is_finite() {
                break;
            }
            let db = (r.0 * j22 - r.1 * j12) / det;
            let dd = (j11 * r.1 - j21 * r.0) / det;
            let norm = r.0.hypot(r.1);
            let mut step = 1.0;
            loop {
                let nb = b - step * db;
                let nd = d - step * dd;
                if nb.abs() < a && nd > 0.0 {
                    let nr = residual(nb, nd);
                    if nr.0.hypot(nr.1) < norm || step < 1e-12 {
                        b = nb;
                        d = nd;
                        r = nr;
                        break;
                    }
                }
                step *= 0.5;
                if step < 1e-12 {
                    return Err(HedgeError::NoSolution(format!(
                        "moment matching stalled at scale {scale}"
                    )));
                }
            }
        }
        if r.0.abs() > 1e-10 || r.1.abs() > 1e-10 {
            return Err(HedgeError::NoSolution(format!(
                "moment matching did not converge at scale {scale} (residual {:e}, {:e})",
                r.0, r.1
            )));
        }
        let m = k1 - d * b / (a * a - b * b).sqrt();
        Self::nig(a, b, d, m)
    }

    /// Check the exponential-hedging assumptions for the driver scaled by `scale`.
    pub fn validate_exponential_assumptions(&self, scale: f64) -> ExponentialAssumptions {
        let strip = self.strip();
        let two_in_domain = strip.contains(2.0 * scale) && strip.contains(scale);
        let nondegenerate = two_in_domain && {
            let k2 = self.eval_unchecked(C64::new(2.0 * scale, 0.0)).re;
            let k1 = self.eval_unchecked(C64::new(scale, 0.0)).re;
            k2 - 2.0 * k1 > 0.0
        };
        let nig_closed_form = match self.driver {
            Driver::Nig { alpha, beta, .. } => Some(scale <= 0.5 * (alpha - beta)),
            _ => None,
        };
        ExponentialAssumptions { two_in_domain, nondegenerate, nig_closed_form }
    }
}
