//! Strategy inputs precomputed on the rebalancing grid.
//!
//! A spectral plan stores, for every rebalancing date `t_i` and every
//! quadrature node `u_j`, the complex weights `A_ij` and `B_ij` such that
//! the price and pure hedge at level `y` are `Re sum_j A_ij exp(z_j y)` and
//! `Re sum_j B_ij exp(z_j y)` (divided by the spot for exponential claims).
//! Nodes are equispaced, so `exp(i u_j y)` is produced by a recurrence.

use num_complex::Complex64 as C64;

/// Values needed by the strategy recursion at one rebalancing date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepValues {
    pub price: f64,
    pub hedge: f64,
    /// Multiplier of `H - V0 - G` in the variance-optimal recursion.
    pub feedback: f64,
}

/// Everything a backtest needs from an engine.
pub trait HedgePlan: Send + Sync {
    fn dates(&self) -> &[f64];
    fn initial_capital(&self) -> f64;
    /// Price, hedge and feedback at date index `i` for traded level `level`.
    fn evaluate(&self, i: usize, level: f64) -> StepValues;
    fn payoff(&self, level: f64) -> f64;
}

/// How quadrature exponents act on the traded level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Level is a price `s`; terms are `s^z`, the hedge carries `s^(z-1)`.
    Spot,
    /// Level is `x`; terms are `exp(i u x)`.
    LogLevel,
}

#[derive(Debug, Clone)]
pub(crate) struct NodeGroup {
    pub shift: f64,
    pub u0: f64,
    pub step: f64,
    /// Half-line group of a conjugate-symmetric integrand: take `2 Re`.
    pub doubled: bool,
    /// Per date: interleaved `(A_ij, B_ij)`, truncated where negligible.
    pub weights: Vec<Vec<(C64, C64)>>,
}

#[derive(Debug, Clone)]
pub(crate) struct PlanAtom {
    pub exponent: C64,
    pub weights: Vec<(C64, C64)>,
}

pub struct SpectralPlan {
    pub(crate) dates: Vec<f64>,
    pub(crate) basis: Basis,
    pub(crate) groups: Vec<NodeGroup>,
    pub(crate) atoms: Vec<PlanAtom>,
    pub(crate) feedback: Vec<f64>,
    pub(crate) initial_capital: f64,
    pub(crate) payoff: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl SpectralPlan {
    /// Total number of stored node weights, a proxy for evaluation cost.
    pub fn node_count(&self) -> usize {
        self.groups.iter().flat_map(|g| g.weights.iter().map(Vec::len)).sum()
    }

    /// Override the initial capital used by the recursion and the error.
    pub fn with_initial_capital(mut self, v0: f64) -> Self {
        self.initial_capital = v0;
        self
    }
}

impl HedgePlan for SpectralPlan {
    fn dates(&self) -> &[f64] {
        &self.dates
    }

    fn initial_capital(&self) -> f64 {
        self.initial_capital
    }

    fn evaluate(&self, i: usize, level: f64) -> StepValues {
        let y = match self.basis {
            Basis::Spot => level.ln(),
            Basis::LogLevel => level,
        };
        let mut price = 0.0;
        let mut hedge = 0.0;
        for g in &self.groups {
            let w = &g.weights[i];
            if w.is_empty() {
                continue;
            }
            let mut c = C64::new(g.shift * y, g.u0 * y).exp();
            let omega = C64::new(0.0, g.step * y).exp();
            let mut sp = C64::new(0.0, 0.0);
            let mut sh = C64::new(0.0, 0.0);
            for (a, b) in w {
                sp += a * c;
                sh += b * c;
                c *= omega;
            }
            let f = if g.doubled { 2.0 } else { 1.0 };
            price += f * sp.re;
            hedge += f * sh.re;
        }
        for a in &self.atoms {
            let e = (a.exponent * y).exp();
            let (pa, pb) = a.weights[i];
            price += (pa * e).re;
            hedge += (pb * e).re;
        }
        match self.basis {
            Basis::Spot => StepValues { price, hedge: hedge / level, feedback: self.feedback[i] / level },
            Basis::LogLevel => StepValues { price, hedge, feedback: self.feedback[i] },
        }
    }

    fn payoff(&self, level: f64) -> f64 {
        (self.payoff)(level)
    }
}

/// Index after which the tail of `|a| + |b|` carries less than `tol` of the total.
pub(crate) fn truncation_len(w: &[(C64, C64)], tol: f64) -> usize {
    let total: f64 = w.iter().map(|(a, b)| a.norm() + b.norm()).sum();
    let mut tail = 0.0;
    let mut len = w.len();
    while len > 0 {
        let (a, b) = w[len - 1];
        let next = tail + a.norm() + b.norm();
        if next > tol * total {
            break;
        }
        tail = next;
        len -= 1;
    }
    len
}
