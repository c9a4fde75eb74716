//! Numerical integration shared by the engines.
//!
//! Line integrals over `u in [0, inf)` use composite Simpson on `[0, U]`
//! plus an asymptotic correction for the remaining tail, fitted from the
//! integrand itself as `exp(i w u) * sum_n c_n u^-n`.

use num_complex::Complex64 as C64;

use crate::error::{HedgeError, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Gauss-Legendre 8-point abscissae and weights on `[-1, 1]` (positive half).
const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Nodes and weights of the 8-point Gauss-Legendre rule mapped to `[a, b]`.
pub fn gl8_nodes(a: f64, b: f64) -> [(f64, f64); 8] {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 8];
    for k in 0..4 {
        out[2 * k] = (mid - half * GL8_X[k], half * GL8_W[k]);
        out[2 * k + 1] = (mid + half * GL8_X[k], half * GL8_W[k]);
    }
    out
}

/// Composite 8-point Gauss-Legendre over `[a, b]` with `panels` equal panels.
pub fn gl8<F: FnMut(f64) -> C64>(a: f64, b: f64, panels: usize, mut f: F) -> C64 {
    if b <= a {
        return C64::new(0.0, 0.0);
    }
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut acc = C64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + h * p as f64;
        let hi = if p + 1 == panels { b } else { lo + h };
        for (x, w) in gl8_nodes(lo, hi) {
            acc += f(x) * w;
        }
    }
    acc
}

/// Composite Gauss-Legendre over `[a, b]`, splitting at interior `breaks`
/// and using roughly `density` panels per unit length (at least one).
pub fn gl8_split<F: FnMut(f64) -> C64>(
    a: f64,
    b: f64,
    breaks: &[f64],
    density: f64,
    mut f: F,
) -> C64 {
    if b <= a {
        return C64::new(0.0, 0.0);
    }
    let mut acc = C64::new(0.0, 0.0);
    let mut lo = a;
    let interior = breaks.iter().copied().filter(|&x| x > a && x < b);
    for hi in interior.chain(std::iter::once(b)) {
        let panels = ((hi - lo) * density).ceil().max(1.0) as usize;
        acc += gl8(lo, hi, panels, &mut f);
        lo = hi;
    }
    acc
}

/// Simpson weight multiplier (1, 4, 2, ..., 4, 1) for node `j` of `n` panels.
#[inline]
pub fn simpson_factor(j: usize, n: usize) -> f64 {
    if j == 0 || j == n {
        1.0
    } else if j % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

/// Composite Simpson on `[0, umax]`; also returns the L1 norm estimate.
pub fn simpson_half_line<F: FnMut(f64) -> C64>(mut f: F, umax: f64, panels: usize) -> (C64, f64) {
    let n = panels + panels % 2;
    let h = umax / n as f64;
    let mut acc = C64::new(0.0, 0.0);
    let mut l1 = 0.0;
    for j in 0..=n {
        let v = f(h * j as f64);
        let w = simpson_factor(j, n);
        acc += v * w;
        l1 += v.norm() * w;
    }
    (acc * (h / 3.0), l1 * h / 3.0)
}

/// Generalised exponential integral `E_n(z) = int_1^inf exp(-z t) t^-n dt`.
pub fn expint(n: u32, z: C64) -> C64 {
    const EPS: f64 = 1e-16;
    const MAXIT: usize = 100_000;
    let nm1 = n as i64 - 1;
    if z.norm() == 0.0 {
        return if nm1 > 0 {
            C64::new(1.0 / nm1 as f64, 0.0)
        } else {
            C64::new(f64::INFINITY, 0.0)
        };
    }
    if z.norm() > 1.0 {
        let tiny = 1e-300;
        let mut b = z + n as f64;
        let mut c = C64::new(1.0 / tiny, 0.0);
        let mut d = b.inv();
        let mut h = d;
        for i in 1..MAXIT {
            let a = -((i as i64) * (nm1 + i as i64)) as f64;
            b += 2.0;
            d = (d * a + b).inv();
            c = b + c.inv() * a;
            let del = c * d;
            h *= del;
            if (del - 1.0).norm() < EPS {
                break;
            }
        }
        h * (-z).exp()
    } else {
        let mut ans = if nm1 != 0 {
            C64::new(1.0 / nm1 as f64, 0.0)
        } else {
            -z.ln() - EULER_GAMMA
        };
        let mut fact = C64::new(1.0, 0.0);
        for i in 1..MAXIT as i64 {
            fact *= -z / i as f64;
            let del = if i != nm1 {
                -fact / (i - nm1) as f64
            } else {
                let psi = -EULER_GAMMA + (1..=nm1).map(|k| 1.0 / k as f64).sum::<f64>();
                fact * (-z.ln() + psi)
            };
            ans += del;
            if del.norm() < ans.norm() * EPS {
                break;
            }
        }
        ans
    }
}

fn solve4(mut a: [[C64; 4]; 4], mut b: [C64; 4]) -> Option<[C64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if a[piv][col].norm() == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let m = a[row][col] / a[col][col];
            for k in col..4 {
                let t = a[col][k];
                a[row][k] -= m * t;
            }
            let t = b[col];
            b[row] -= m * t;
        }
    }
    let mut x = [C64::new(0.0, 0.0); 4];
    for row in (0..4).rev() {
        let mut s = b[row];
        for k in row + 1..4 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Outcome of the tail fit beyond the truncation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    /// The integrand is negligible beyond `U`.
    Negligible,
    /// Estimated value of `int_U^inf f(u) du`.
    Corrected(C64),
    /// The integrand is not algebraic-oscillatory; rely on a larger `U`.
    Unfitted,
}

/// Estimate `int_U^inf f(u) du` assuming `f(u) ~ exp(i w u) sum_{n=1..4} c_n u^-n`.
///
/// Returns [`HedgeError::TailDivergence`] when the fit has a non-oscillating
/// `1/u` term, i.e. the integral does not exist.
pub fn asymptotic_tail<F: FnMut(f64) -> C64>(mut f: F, u: f64, scale: f64) -> Result<Tail> {
    let fu = f(u);
    if !fu.is_finite() {
        return Err(HedgeError::TailDivergence(format!("non-finite integrand at u = {u}")));
    }
    if fu.norm() * u <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        return Ok(Tail::Negligible);
    }
    let d = 1e-3;
    let ratio = f(u + d) / f(u - d);
    let omega = ratio.arg() / (2.0 * d);
    let amp = |f: &mut F, x: f64| f(x) * C64::new(0.0, -omega * x).exp();
    let vs: [f64; 4] = [1.0, 0.75, 0.5, 0.25];
    let mut m = [[C64::new(0.0, 0.0); 4]; 4];
    let mut rhs = [C64::new(0.0, 0.0); 4];
    for (r, &v) in vs.iter().enumerate() {
        for k in 0..4 {
            m[r][k] = C64::new(v.powi(k as i32 + 1), 0.0);
        }
        rhs[r] = amp(&mut f, u / v);
    }
    let Some(coef) = solve4(m, rhs) else {
        return Ok(Tail::Unfitted);
    };
    let vc: f64 = 1.0 / 3.0;
    let fitted: C64 = (0..4).map(|k| coef[k] * vc.powi(k as i32 + 1)).sum();
    let actual = amp(&mut f, u / vc);
    if (fitted - actual).norm() > 1e-4 * rhs[0].norm() {
        return Ok(Tail::Unfitted);
    }
    let zarg = C64::new(0.0, -omega * u);
    let flat = zarg.norm() < 1e-9;
    if flat && coef[0].norm() > 1e-8 * rhs[0].norm() {
        return Err(HedgeError::TailDivergence(
            "integrand decays like 1/u without oscillation".into(),
        ));
    }
    let mut tail = C64::new(0.0, 0.0);
    for (k, c) in coef.iter().enumerate() {
        if c.norm() == 0.0 || (flat && k == 0) {
            continue;
        }
        tail += *c * expint(k as u32 + 1, zarg);
    }
    let tail = tail * u;
    if !tail.is_finite() {
        return Ok(Tail::Unfitted);
    }
    Ok(Tail::Corrected(tail))
}

/// Truncation and resolution controls for line integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineQuadrature {
    pub umax: f64,
    pub log2_panels: u32,
    pub tol: f64,
}

impl Default for LineQuadrature {
    fn default() -> Self {
        Self { umax: 400.0, log2_panels: 13, tol: 1e-7 }
    }
}

impl LineQuadrature {
    pub fn validate(&self) -> Result<()> {
        if !(self.umax > 0.0 && self.umax.is_finite()) {
            return Err(crate::error::invalid(format!("quadrature umax must be positive, got {}", self.umax)));
        }
        if !(2..=24).contains(&self.log2_panels) {
            return Err(crate::error::invalid(format!(
                "quadrature log2_panels must lie in 2..=24, got {}",
                self.log2_panels
            )));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(crate::error::invalid(format!("quadrature tol must lie in (0, 1), got {}", self.tol)));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.umax / (1u64 << self.log2_panels) as f64
    }
}

/// Converged half-line integral with the settings that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineIntegral {
    pub value: C64,
    pub l1: f64,
    pub umax: f64,
    pub log2_panels: u32,
}

fn simpson_from(vals: &[C64], h: f64) -> (C64, f64) {
    let n = vals.len() - 1;
    let mut acc = C64::new(0.0, 0.0);
    let mut l1 = 0.0;
    for (j, v) in vals.iter().enumerate() {
        let w = simpson_factor(j, n);
        acc += *v * w;
        l1 += v.norm() * w;
    }
    (acc * (h / 3.0), l1 * h / 3.0)
}

fn with_tail<F: FnMut(f64) -> C64>(f: &mut F, vals: &[C64], h: f64) -> Result<(C64, f64)> {
    let (v, l1) = simpson_from(vals, h);
    if !v.is_finite() {
        return Err(HedgeError::QuadratureFailure(format!("non-finite partial sum at step {h}")));
    }
    let umax = h * (vals.len() - 1) as f64;
    Ok(match asymptotic_tail(&mut *f, umax, l1)? {
        Tail::Corrected(t) => (v + t, l1),
        Tail::Negligible | Tail::Unfitted => (v, l1),
    })
}

/// Adaptive `int_0^inf f(u) du`: halve the step until the relative change
/// drops below `tol`, then double the truncation point until it settles.
/// Nodes are reused across levels.
pub fn integrate_half_line<F: FnMut(f64) -> C64>(mut f: F, q: &LineQuadrature) -> Result<LineIntegral> {
    q.validate()?;
    let mut k = q.log2_panels;
    let n = 1usize << k;
    let mut h = q.umax / n as f64;
    let mut vals: Vec<C64> = (0..=n).map(|j| f(h * j as f64)).collect();
    let (mut prev, _) = with_tail(&mut f, &vals, h)?;
    let mut converged = false;
    for _ in 0..6 {
        let half = 0.5 * h;
        let mut fine = Vec::with_capacity(2 * vals.len() - 1);
        for (j, v) in vals.iter().enumerate() {
            fine.push(*v);
            if j + 1 < vals.len() {
                fine.push(f(half * (2 * j + 1) as f64));
            }
        }
        vals = fine;
        h = half;
        k += 1;
        let (next, l1) = with_tail(&mut f, &vals, h)?;
        let diff = (next - prev).norm();
        prev = next;
        if diff <= q.tol * l1.max(prev.norm()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(HedgeError::QuadratureFailure(format!(
            "panel refinement stalled at 2^{k} panels over [0, {}]",
            q.umax
        )));
    }
    let mut umax = q.umax;
    for _ in 0..6 {
        let m = vals.len() - 1;
        vals.extend((m + 1..=2 * m).map(|j| f(h * j as f64)));
        umax *= 2.0;
        k += 1;
        let (next, l1) = with_tail(&mut f, &vals, h)?;
        let diff = (next - prev).norm();
        prev = next;
        if diff <= q.tol * l1.max(prev.norm()) {
            return Ok(LineIntegral { value: prev, l1, umax, log2_panels: k });
        }
    }
    Err(HedgeError::TailDivergence(format!("truncation point grew to {umax} without settling")))
}

/// Adaptive `int_R f(u) du` as the sum of two half-line integrals.
pub fn integrate_full_line<F: FnMut(f64) -> C64>(mut f: F, q: &LineQuadrature) -> Result<C64> {
    let right = integrate_half_line(&mut f, q)?;
    let left = integrate_half_line(|u| f(-u), q)?;
    Ok(right.value + left.value)
}

/// `(exp(x) - 1) / x`, accurate near zero.
pub fn exprel(x: C64) -> C64 {
    if x.norm() < 1e-8 {
        C64::new(1.0, 0.0) + x / 2.0
    } else {
        expm1(x) / x
    }
}

/// `exp(x) - 1` without cancellation for small `x`.
pub fn expm1(x: C64) -> C64 {
    let (s, c) = x.im.sin_cos();
    let h = (0.5 * x.im).sin();
    C64::new(x.re.exp_m1() * c - 2.0 * h * h, x.re.exp() * s)
}
