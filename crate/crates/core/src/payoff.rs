//! Claims as complex measures.
//!
//! Exponential payoffs are written `f(s) = int s^z Pi(dz)` with `Pi` a sum
//! of atoms and weighted vertical-line contours. Arithmetic payoffs are
//! written `f(x) = int exp(iux) mu(du)`, with `mu(du) = fhat(-u) du / 2pi`
//! plus optional atoms, where `fhat(u) = int exp(iux) f(x) dx`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{invalid, HedgeError, Result};
use crate::quadrature::{integrate_half_line, LineQuadrature};

const I: C64 = C64 { re: 0.0, im: 1.0 };

pub type ComplexFn = Arc<dyn Fn(C64) -> C64 + Send + Sync>;
pub type SpectralFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// Kernel `g` of a contour term `weight * g(z) dz` along `Re z = R`.
#[derive(Clone)]
pub enum ContourKernel {
    /// `K^(1-z) / (z (z - 1))`.
    Vanilla { strike: f64 },
    Custom(ComplexFn),
}

impl ContourKernel {
    #[inline]
    pub fn eval(&self, z: C64) -> C64 {
        match self {
            ContourKernel::Vanilla { strike } => (z * (-strike.ln())).exp() * *strike / (z * (z - 1.0)),
            ContourKernel::Custom(g) => g(z),
        }
    }
}

impl fmt::Debug for ContourKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContourKernel::Vanilla { strike } => write!(f, "Vanilla {{ strike: {strike} }}"),
            ContourKernel::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Atom {
    pub z: C64,
    pub weight: C64,
}

#[derive(Debug, Clone)]
pub struct Contour {
    pub abscissa: f64,
    pub kernel: ContourKernel,
    pub weight: C64,
    symmetric: bool,
}

impl Contour {
    /// Integrand density in `u` of the contour measure: `i * weight * g(R + iu)`.
    #[inline]
    pub fn density(&self, u: f64) -> C64 {
        I * self.weight * self.kernel.eval(C64::new(self.abscissa, u))
    }

    /// Whether the contour measure is invariant under conjugation.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

/// Closed forms kept alongside built-in measures for payoff evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    Call { strike: f64 },
    Put { strike: f64 },
}

impl ClosedForm {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            ClosedForm::Call { strike } => (s - strike).max(0.0),
            ClosedForm::Put { strike } => (strike - s).max(0.0),
        }
    }
}

/// Which call representation to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CallVariant {
    /// Contour at `R > 1`.
    AboveOne(f64),
    /// Contour at `0 < R < 1` plus an atom at `z = 1`.
    UnitInterval(f64),
}

/// Finite complex measure `Pi` over exponents.
#[derive(Debug, Clone)]
pub struct PayoffMeasure {
    atoms: Vec<Atom>,
    contours: Vec<Contour>,
    closed_form: Option<ClosedForm>,
    description: String,
}

fn check_decay(g: &dyn Fn(f64) -> C64, power: f64, what: &str) -> Result<()> {
    // |g(u)| u^power must stay bounded along the tail.
    let probe = |u: f64| (g(u).norm() * u.powf(power)).max(g(-u).norm() * u.powf(power));
    let near = probe(1e2).max(probe(3e2));
    let far = probe(1e4).max(probe(1e5));
    if !far.is_finite() || far > 10.0 * near + 1e-300 {
        return Err(HedgeError::TailDivergence(format!("{what} does not decay like |u|^-{power}")));
    }
    Ok(())
}

fn is_conj_symmetric(g: &dyn Fn(C64) -> C64, r: f64) -> bool {
    [0.3, 1.7, 12.0, 150.0].iter().all(|&u| {
        let z = C64::new(r, u);
        let a = g(z);
        let b = g(z.conj());
        (a.conj() - b).norm() <= 1e-12 * a.norm().max(1e-300)
    })
}

impl PayoffMeasure {
    pub fn new(atoms: Vec<Atom>, contours: Vec<(f64, ContourKernel, C64)>, description: impl Into<String>) -> Result<Self> {
        let mut built = Vec::with_capacity(contours.len());
        for (r, kernel, weight) in contours {
            if !r.is_finite() {
                return Err(HedgeError::InvalidAbscissa { abscissa: r, reason: "not finite".into() });
            }
            let g = |u: f64| kernel.eval(C64::new(r, u));
            check_decay(&g, 2.0, "contour kernel")?;
            let kernel_sym = is_conj_symmetric(&|z| kernel.eval(z), r);
            let iw = I * weight;
            let symmetric = kernel_sym && iw.im.abs() <= 1e-15 * iw.norm();
            built.push(Contour { abscissa: r, kernel, weight, symmetric });
        }
        if atoms.iter().any(|a| !a.z.is_finite() || !a.weight.is_finite()) {
            return Err(invalid("atoms must be finite"));
        }
        Ok(Self { atoms, contours: built, closed_form: None, description: description.into() })
    }

    /// `(s - K)_+`.
    pub fn call(strike: f64, variant: CallVariant) -> Result<Self> {
        if !(strike > 0.0 && strike.is_finite()) {
            return Err(invalid(format!("strike must be positive, got {strike}")));
        }
        let w = (I * 2.0 * PI).inv();
        let kernel = ContourKernel::Vanilla { strike };
        let mut m = match variant {
            CallVariant::AboveOne(r) => {
                if !(r > 1.0) {
                    return Err(HedgeError::InvalidAbscissa { abscissa: r, reason: "call representation needs R > 1".into() });
                }
                Self::new(vec![], vec![(r, kernel, w)], format!("call K={strike} R={r}"))?
            }
            CallVariant::UnitInterval(r) => {
                if !(r > 0.0 && r < 1.0) {
                    return Err(HedgeError::InvalidAbscissa {
                        abscissa: r,
                        reason: "second call representation needs 0 < R < 1".into(),
                    });
                }
                let atom = Atom { z: C64::new(1.0, 0.0), weight: C64::new(1.0, 0.0) };
                Self::new(vec![atom], vec![(r, kernel, w)], format!("call K={strike} R={r} + forward"))?
            }
        };
        m.closed_form = Some(ClosedForm::Call { strike });
        Ok(m)
    }

    /// `(K - s)_+`, contour at `R < 0`.
    pub fn put(strike: f64, r: f64) -> Result<Self> {
        if !(strike > 0.0 && strike.is_finite()) {
            return Err(invalid(format!("strike must be positive, got {strike}")));
        }
        if !(r < 0.0) {
            return Err(HedgeError::InvalidAbscissa { abscissa: r, reason: "put representation needs R < 0".into() });
        }
        let w = (I * 2.0 * PI).inv();
        let mut m = Self::new(vec![], vec![(r, ContourKernel::Vanilla { strike }, w)], format!("put K={strike} R={r}"))?;
        m.closed_form = Some(ClosedForm::Put { strike });
        Ok(m)
    }

    /// `sum_k w_k s^{z_k}`.
    pub fn atoms_only(atoms: Vec<(C64, C64)>) -> Result<Self> {
        let atoms = atoms.into_iter().map(|(z, weight)| Atom { z, weight }).collect();
        Self::new(atoms, vec![], "atoms")
    }

    /// Linear combination `self + c * other`.
    pub fn plus(&self, c: C64, other: &PayoffMeasure) -> PayoffMeasure {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().map(|a| Atom { z: a.z, weight: a.weight * c }));
        let mut contours = self.contours.clone();
        contours.extend(other.contours.iter().map(|k| Contour {
            weight: k.weight * c,
            symmetric: k.symmetric && c.im == 0.0,
            ..k.clone()
        }));
        PayoffMeasure {
            atoms,
            contours,
            closed_form: None,
            description: format!("{} + ({c}) {}", self.description, other.description),
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn contours(&self) -> &[Contour] {
        &self.contours
    }

    pub fn closed_form(&self) -> Option<ClosedForm> {
        self.closed_form
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Real abscissae of the support (`I_0`).
    pub fn support_abscissae(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.atoms.iter().map(|a| a.z.re).chain(self.contours.iter().map(|c| c.abscissa)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// The interval `[min I0 ^ 2 min I0, 2 max I0 v (max I0 + 1)]` on which
    /// the model cumulant must be finite.
    pub fn required_interval(&self) -> Option<(f64, f64)> {
        let v = self.support_abscissae();
        let (lo, hi) = (*v.first()?, *v.last()?);
        Some((lo.min(2.0 * lo), (2.0 * hi).max(hi + 1.0)))
    }

    /// `int f(z) Pi(dz)` with each contour integrated over the full line.
    pub fn integrate<F: Fn(C64) -> C64>(&self, f: F, q: &LineQuadrature) -> Result<C64> {
        let mut acc: C64 = self.atoms.iter().map(|a| a.weight * f(a.z)).sum();
        for c in &self.contours {
            let r = c.abscissa;
            let right = integrate_half_line(|u| c.density(u) * f(C64::new(r, u)), q)?;
            let left = integrate_half_line(|u| c.density(-u) * f(C64::new(r, -u)), q)?;
            acc += right.value + left.value;
        }
        Ok(acc)
    }

    /// `int f(z) Pi(dz)` for conjugate-symmetric `f`, returning the real value.
    ///
    /// Symmetric contours are integrated over `u >= 0` only; the imaginary
    /// residue of the remaining terms is checked against `1e-8`.
    pub fn integrate_real<F: Fn(C64) -> C64>(&self, f: F, q: &LineQuadrature) -> Result<f64> {
        let mut acc: C64 = self.atoms.iter().map(|a| a.weight * f(a.z)).sum();
        let mut scale = acc.norm();
        for c in &self.contours {
            let r = c.abscissa;
            let right = integrate_half_line(|u| c.density(u) * f(C64::new(r, u)), q)?;
            scale += 2.0 * right.l1;
            if c.symmetric {
                acc += 2.0 * right.value.re;
            } else {
                let left = integrate_half_line(|u| c.density(-u) * f(C64::new(r, -u)), q)?;
                acc += right.value + left.value;
            }
        }
        if acc.im.abs() > 1e-8 * (1.0 + acc.re.abs()).max(1e-8 * scale) {
            return Err(HedgeError::QuadratureFailure(format!("imaginary residue {} on a real payoff", acc.im)));
        }
        Ok(acc.re)
    }

    /// `f(s) = int s^z Pi(dz)` evaluated numerically.
    pub fn reconstruct(&self, s: f64, q: &LineQuadrature) -> Result<f64> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid(format!("spot must be positive, got {s}")));
        }
        let ls = s.ln();
        self.integrate_real(|z| spot_power(s, ls, z), q)
    }

    /// Payoff value: closed form or exact atom sum when available.
    pub fn payoff(&self, s: f64) -> Result<f64> {
        if let Some(cf) = self.closed_form {
            return Ok(cf.eval(s));
        }
        if self.contours.is_empty() {
            let ls = s.ln();
            return Ok(self.atoms.iter().map(|a| a.weight * spot_power(s, ls, a.z)).sum::<C64>().re);
        }
        self.reconstruct(s, &LineQuadrature::default())
    }
}

/// `s^z`, exact for real exponents.
#[inline]
pub fn spot_power(s: f64, ln_s: f64, z: C64) -> C64 {
    if z.im == 0.0 {
        C64::new(s.powf(z.re), 0.0)
    } else {
        (z * ln_s).exp()
    }
}

/// Tail behaviour of `fhat`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayClass {
    /// Only `|u|^-1`: the inversion integral converges conditionally.
    Conditional,
    /// `int |fhat| du < inf`.
    L1,
    /// `int u^2 |fhat| du < inf`.
    L1WithU2,
}

#[derive(Clone)]
enum FourierKind {
    AssetOrNothing { barrier: f64 },
    SelfQuantoPut { strike: f64 },
    Atoms,
    Custom(SpectralFn),
}

/// Fourier measure `mu` of an arithmetic payoff.
#[derive(Clone)]
pub struct FourierMeasure {
    kind: FourierKind,
    decay: DecayClass,
    atoms: Vec<(f64, C64)>,
}

impl fmt::Debug for FourierMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            FourierKind::AssetOrNothing { barrier } => format!("AssetOrNothing(B={barrier})"),
            FourierKind::SelfQuantoPut { strike } => format!("SelfQuantoPut(K={strike})"),
            FourierKind::Atoms => "Atoms".into(),
            FourierKind::Custom(_) => "Custom".into(),
        };
        f.debug_struct("FourierMeasure").field("kind", &kind).field("decay", &self.decay).field("atoms", &self.atoms).finish()
    }
}

/// Damping parameters for conditionally convergent inversions and their
/// Richardson weights, which cancel the `eps` and `eps^2` bias terms.
pub const DAMPING: [(f64, f64); 3] = [(1e-3, 1.0 / 3.0), (5e-4, -2.0), (2.5e-4, 8.0 / 3.0)];

impl FourierMeasure {
    /// `f(x) = exp(x) 1{exp(x) < B}`, with `fhat(u) = B^(1+iu) / (1+iu)`.
    pub fn digital_asset_or_nothing(barrier: f64) -> Result<Self> {
        if !(barrier > 0.0 && barrier.is_finite()) {
            return Err(invalid(format!("barrier must be positive, got {barrier}")));
        }
        Ok(Self { kind: FourierKind::AssetOrNothing { barrier }, decay: DecayClass::Conditional, atoms: vec![] })
    }

    /// `f(x) = exp(x) (K - exp(x))_+`, with `fhat(u) = K^(2+iu) / ((1+iu)(2+iu))`.
    pub fn self_quanto_put(strike: f64) -> Result<Self> {
        if !(strike > 0.0 && strike.is_finite()) {
            return Err(invalid(format!("strike must be positive, got {strike}")));
        }
        Ok(Self { kind: FourierKind::SelfQuantoPut { strike }, decay: DecayClass::L1, atoms: vec![] })
    }

    /// `f(x) = sum_k w_k exp(i u_k x)`.
    pub fn point_masses(atoms: Vec<(f64, C64)>) -> Result<Self> {
        if atoms.iter().any(|(u, w)| !u.is_finite() || !w.is_finite()) {
            return Err(invalid("Fourier atoms must be finite"));
        }
        Ok(Self { kind: FourierKind::Atoms, decay: DecayClass::L1WithU2, atoms })
    }

    /// Arbitrary transform `fhat`; the decay class is verified by tail sampling.
    pub fn custom(transform: SpectralFn, decay: DecayClass) -> Result<Self> {
        let power = match decay {
            DecayClass::Conditional => 1.0,
            DecayClass::L1 => 2.0,
            DecayClass::L1WithU2 => 4.0,
        };
        check_decay(&|u| transform(u), power, "Fourier transform")?;
        Ok(Self { kind: FourierKind::Custom(transform), decay, atoms: vec![] })
    }

    pub fn decay_class(&self) -> DecayClass {
        self.decay
    }

    pub fn atoms(&self) -> &[(f64, C64)] {
        &self.atoms
    }

    pub fn has_density(&self) -> bool {
        !matches!(self.kind, FourierKind::Atoms)
    }

    /// `fhat(u) = int exp(iux) f(x) dx`.
    pub fn transform(&self, u: f64) -> C64 {
        match &self.kind {
            FourierKind::AssetOrNothing { barrier } => {
                let a = C64::new(1.0, u);
                (a * barrier.ln()).exp() / a
            }
            FourierKind::SelfQuantoPut { strike } => {
                let a = C64::new(1.0, u);
                let b = C64::new(2.0, u);
                (b * strike.ln()).exp() / (a * b)
            }
            FourierKind::Atoms => C64::new(0.0, 0.0),
            FourierKind::Custom(g) => g(u),
        }
    }

    /// Density of `mu` at `u`: `fhat(-u) / 2pi`.
    #[inline]
    pub fn density(&self, u: f64) -> C64 {
        self.transform(-u) / (2.0 * PI)
    }

    /// `int f(u) mu(du)` for `f` with `f(-u) = conj f(u)`, as a real number.
    ///
    /// Conditionally convergent densities are damped by `exp(-eps u^2)` and
    /// extrapolated to `eps = 0`.
    pub fn integrate_real<F: Fn(f64) -> C64>(&self, f: F, q: &LineQuadrature) -> Result<f64> {
        let atoms: C64 = self.atoms.iter().map(|(u, w)| *w * f(*u)).sum();
        let mut total = atoms.re;
        if self.has_density() {
            if self.decay == DecayClass::Conditional {
                for (eps, w) in DAMPING {
                    let r = integrate_half_line(|u| self.density(u) * f(u) * (-eps * u * u).exp(), q)?;
                    total += w * 2.0 * r.value.re;
                }
            } else {
                total += 2.0 * integrate_half_line(|u| self.density(u) * f(u), q)?.value.re;
            }
        }
        if atoms.im.abs() > 1e-8 * (1.0 + atoms.re.abs()) {
            return Err(HedgeError::QuadratureFailure(format!("imaginary residue {} on a real payoff", atoms.im)));
        }
        Ok(total)
    }

    /// `f(x) = int exp(iux) mu(du)` evaluated numerically.
    pub fn reconstruct(&self, x: f64, q: &LineQuadrature) -> Result<f64> {
        if !x.is_finite() {
            return Err(invalid(format!("log-level must be finite, got {x}")));
        }
        self.integrate_real(|u| C64::new(0.0, u * x).exp(), q)
    }

    /// Payoff value, from the closed form where one exists.
    pub fn payoff(&self, x: f64) -> Result<f64> {
        let atoms: f64 = self.atoms.iter().map(|(u, w)| (*w * C64::new(0.0, u * x).exp()).re).sum();
        Ok(atoms
            + match &self.kind {
                FourierKind::AssetOrNothing { barrier } => {
                    if x < barrier.ln() {
                        x.exp()
                    } else {
                        0.0
                    }
                }
                FourierKind::SelfQuantoPut { strike } => x.exp() * (strike - x.exp()).max(0.0),
                FourierKind::Atoms => 0.0,
                FourierKind::Custom(_) => return self.reconstruct(x, &LineQuadrature::default()),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> LineQuadrature {
        LineQuadrature::default()
    }

    #[test]
    fn call_examples() {
        let k = 99.0;
        let m = PayoffMeasure::call(k, CallVariant::AboveOne(1.5)).unwrap();
        assert!((m.reconstruct(100.0, &q()).unwrap() - 1.0).abs() < 1e-6);
        assert!(m.reconstruct(k, &q()).unwrap().abs() < 1e-6 * k);
        assert!((m.reconstruct(2.0 * k, &q()).unwrap() - k).abs() < 1e-6 * k);
        assert!(PayoffMeasure::call(k, CallVariant::AboveOne(0.5)).is_err());
        assert!(PayoffMeasure::call(k, CallVariant::UnitInterval(1.5)).is_err());
    }

    #[test]
    fn put_examples() {
        let k = 80.0;
        let m = PayoffMeasure::put(k, -0.5).unwrap();
        assert!(m.reconstruct(k, &q()).unwrap().abs() < 1e-6 * k);
        assert!(m.reconstruct(2.0 * k, &q()).unwrap().abs() < 1e-6 * k);
        assert!((m.reconstruct(1e-6 * k, &q()).unwrap() - k).abs() < 1e-4 * k);
        assert!(PayoffMeasure::put(k, 0.0).is_err());
    }

    #[test]
    fn integrate_examples() {
        let m = PayoffMeasure::call(3.0, CallVariant::AboveOne(1.5)).unwrap();
        let v = m.integrate(|_| C64::new(1.0, 0.0), &q()).unwrap();
        assert!(v.norm() < 1e-7, "{v}");
        let d = PayoffMeasure::atoms_only(vec![(C64::new(2.0, 0.0), C64::new(1.0, 0.0))]).unwrap();
        assert_eq!(d.integrate(|z| z * z, &q()).unwrap(), C64::new(4.0, 0.0));
        let fwd = PayoffMeasure::atoms_only(vec![(C64::new(1.0, 0.0), C64::new(1.0, 0.0))]).unwrap();
        assert_eq!(fwd.reconstruct(123.0, &q()).unwrap(), 123.0);
    }

    #[test]
    fn full_line_matches_half_line() {
        let m = PayoffMeasure::call(99.0, CallVariant::UnitInterval(0.4)).unwrap();
        let ls = 101.0f64.ln();
        let full = m.integrate(|z| (z * ls).exp(), &q()).unwrap();
        let half = m.reconstruct(101.0, &q()).unwrap();
        assert!(full.im.abs() < 1e-8 * 101.0);
        assert!((full.re - half).abs() < 1e-7 * 101.0);
    }

    #[test]
    fn required_interval() {
        let m = PayoffMeasure::call(99.0, CallVariant::UnitInterval(0.4)).unwrap();
        assert_eq!(m.required_interval(), Some((0.4, 2.0)));
        let p = PayoffMeasure::put(99.0, -0.5).unwrap();
        assert_eq!(p.required_interval(), Some((-1.0, 0.5)));
    }

    #[test]
    fn custom_kernel_without_decay_is_rejected() {
        let g: ComplexFn = Arc::new(|z: C64| z.inv());
        let r = PayoffMeasure::new(vec![], vec![(1.5, ContourKernel::Custom(g), C64::new(1.0, 0.0))], "bad");
        assert!(matches!(r, Err(HedgeError::TailDivergence(_))));
    }

    #[test]
    fn digital_examples() {
        let b = 1.3;
        let d = FourierMeasure::digital_asset_or_nothing(b).unwrap();
        assert!((d.transform(0.0).re - b).abs() < 1e-15);
        assert!((d.reconstruct(b.ln() - 1.0, &q()).unwrap() - b / std::f64::consts::E).abs() < 1e-4 * b);
        assert!(d.reconstruct(b.ln() + 1.0, &q()).unwrap().abs() < 1e-4 * b);
    }

    #[test]
    fn self_quanto_examples() {
        let k = 2.0;
        let m = FourierMeasure::self_quanto_put(k).unwrap();
        assert!((m.transform(0.0).re - k * k / 2.0).abs() < 1e-14);
        assert!(m.reconstruct(k.ln(), &q()).unwrap().abs() < 1e-5 * k * k);
        assert!((m.reconstruct((k / 2.0).ln(), &q()).unwrap() - k * k / 4.0).abs() < 1e-5 * k * k);
    }
}
