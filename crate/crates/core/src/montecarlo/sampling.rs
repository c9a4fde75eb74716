//! Exact-in-law increments of the supported drivers and path sampling for
//! every model kind.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::cumulants::{Driver, LevyCumulantModel};
use crate::error::{invalid, Result};
use crate::pii::{PiiKind, PiiModel};

/// Counter-style stream for path `index`: the result does not depend on
/// which worker draws the path.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Inverse Gaussian variate with the given mean and shape.
///
/// Draw `nu ~ N(0,1)`, set `y = nu^2` and take the smaller root
/// `x = m + m^2 y / (2 l) - m / (2 l) sqrt(4 m l y + m^2 y^2)` of the
/// quadratic in `x`. Accept `x` with probability `m / (m + x)`, otherwise
/// return `m^2 / x`.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> f64 {
    let nu: f64 = StandardNormal.sample(rng);
    let y = nu * nu;
    let my = mean * y;
    let x = mean + mean * my / (2.0 * shape) - mean / (2.0 * shape) * (4.0 * shape * my + my * my).sqrt();
    // the root can underflow to a tiny negative value when my >> shape
    let x = x.max(mean * 1e-300);
    let u: f64 = rng.random();
    if u <= mean / (mean + x) {
        x
    } else {
        mean * mean / x
    }
}

/// Increment of a Lévy driver over a time step `dt`.
pub fn sample_levy_increment<R: Rng + ?Sized>(driver: &LevyCumulantModel, dt: f64, rng: &mut R) -> f64 {
    if dt <= 0.0 {
        return 0.0;
    }
    match *driver.driver() {
        Driver::Poisson { intensity } => Poisson::new(intensity * dt).map(|d| d.sample(rng)).unwrap_or(0.0),
        Driver::BrownianDrift { sigma, drift } => {
            let g: f64 = StandardNormal.sample(rng);
            drift * dt + sigma * dt.sqrt() * g
        }
        Driver::Nig { alpha, beta, delta, mu } => {
            let g0 = (alpha * alpha - beta * beta).sqrt();
            let z = sample_inverse_gaussian(delta * dt / g0, (delta * dt).powi(2), rng);
            let g: f64 = StandardNormal.sample(rng);
            mu * dt + beta * z + z.sqrt() * g
        }
        Driver::VarianceGamma { alpha, beta, delta, mu } => {
            let z = Gamma::new(delta * dt, 1.0 / alpha).map(|d| d.sample(rng)).unwrap_or(0.0);
            let g: f64 = StandardNormal.sample(rng);
            mu * dt + beta * z + z.sqrt() * g
        }
    }
}

/// `X_{t1} - X_{t0}` for any model kind. Inhomogeneous kinds sum
/// `substeps` pieces, each driven by the kernel at the substep midpoint.
pub fn sample_increment<R: Rng + ?Sized>(model: &PiiModel, t0: f64, t1: f64, substeps: usize, rng: &mut R) -> f64 {
    match model.kind() {
        PiiKind::LevyHomogeneous { driver } => sample_levy_increment(driver, t1 - t0, rng),
        PiiKind::TimeChangedBrownian { psi } => {
            let g: f64 = StandardNormal.sample(rng);
            (psi.eval(t1) - psi.eval(t0)).max(0.0).sqrt() * g
        }
        PiiKind::WienerIntegral { driver, kernel } => {
            let n = substeps.max(1);
            let h = (t1 - t0) / n as f64;
            (0..n)
                .map(|j| kernel.eval(t0 + (j as f64 + 0.5) * h) * sample_levy_increment(driver, h, rng))
                .sum()
        }
        PiiKind::TwoFactor { driver, params } => {
            let n = substeps.max(1);
            let h = (t1 - t0) / n as f64;
            let trend = params.trend.as_ref().map_or(0.0, |tr| tr.integral(t0, t1));
            let g: f64 = StandardNormal.sample(rng);
            let mut x = trend + params.sigma_l * (t1 - t0).sqrt() * g;
            for j in 0..n {
                let c = t0 + (j as f64 + 0.5) * h;
                let load = params.sigma_s * (-params.lambda_mr * (params.delivery - c)).exp();
                x += load * sample_levy_increment(driver, h, rng);
            }
            x
        }
    }
}

/// Samples `X` on a fixed increasing time grid starting at `X_{grid[0]} = 0`.
#[derive(Debug, Clone)]
pub struct PathSampler {
    model: PiiModel,
    grid: Vec<f64>,
    substeps: usize,
}

impl PathSampler {
    pub fn new(model: PiiModel, grid: Vec<f64>, substeps: usize) -> Result<Self> {
        if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 {
            return Err(invalid("path grid needs at least two strictly increasing non-negative times"));
        }
        if substeps == 0 {
            return Err(invalid("substeps must be at least 1"));
        }
        Ok(Self { model, grid, substeps })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Fills `out` (length of the grid) with one path.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        out[0] = 0.0;
        for k in 1..self.grid.len() {
            out[k] = out[k - 1] + sample_increment(&self.model, self.grid[k - 1], self.grid[k], self.substeps, rng);
        }
    }
}
