//! Sample moments of hedging errors with Monte-Carlo standard errors.

use crate::error::{HedgeError, Result};

/// First four sample moments of a vector and their standard errors.
///
/// Skewness and excess kurtosis are `None` when undefined (zero spread or
/// too few samples).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBlock {
    pub n: usize,
    pub mean: f64,
    pub se_mean: f64,
    pub std: f64,
    pub se_std: f64,
    pub skew: Option<f64>,
    pub se_skew: Option<f64>,
    pub kurt: Option<f64>,
    pub se_kurt: Option<f64>,
}

/// Pairwise summation in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn central_sum(xs: &[f64], mean: f64, p: i32) -> f64 {
    let v: Vec<f64> = xs.iter().map(|x| (x - mean).powi(p)).collect();
    pairwise_sum(&v)
}

/// Unbiased mean and standard deviation, adjusted skewness `G1` and
/// adjusted excess kurtosis `G2`.
pub fn error_statistics(errors: &[f64]) -> Result<MomentBlock> {
    let n = errors.len();
    if n < 2 {
        return Err(HedgeError::InsufficientSamples { needed: 2, got: n });
    }
    if errors.iter().any(|x| !x.is_finite()) {
        return Err(HedgeError::QuadratureFailure("non-finite hedging error".into()));
    }
    let nf = n as f64;
    let mean = pairwise_sum(errors) / nf;
    let m2 = central_sum(errors, mean, 2) / nf;
    let m3 = central_sum(errors, mean, 3) / nf;
    let m4 = central_sum(errors, mean, 4) / nf;
    let var = m2 * nf / (nf - 1.0);
    let std = var.sqrt();
    let se_mean = std / nf.sqrt();
    let se_std = if std > 0.0 { ((m4 - m2 * m2).max(0.0) / nf).sqrt() / (2.0 * std) } else { 0.0 };
    let spread = m2 > 1e-28 * (mean * mean).max(1e-300);
    let (skew, se_skew) = if spread && n >= 3 {
        let g1 = m3 / m2.powf(1.5);
        let s = (nf * (nf - 1.0)).sqrt() / (nf - 2.0) * g1;
        let se = (6.0 * nf * (nf - 1.0) / ((nf - 2.0) * (nf + 1.0) * (nf + 3.0))).sqrt();
        (Some(s), Some(se))
    } else {
        (None, None)
    };
    let (kurt, se_kurt) = if spread && n >= 4 {
        let g2 = m4 / (m2 * m2) - 3.0;
        let k = (nf - 1.0) / ((nf - 2.0) * (nf - 3.0)) * ((nf + 1.0) * g2 + 6.0);
        let se = 2.0 * se_skew.unwrap() * ((nf * nf - 1.0) / ((nf - 3.0) * (nf + 5.0))).sqrt();
        (Some(k), Some(se))
    } else {
        (None, None)
    };
    Ok(MomentBlock { n, mean, se_mean, std, se_std, skew, se_skew, kurt, se_kurt })
}

/// Unbiased estimators `k1..k4` of the first four cumulants.
pub fn k_statistics(xs: &[f64]) -> Result<[f64; 4]> {
    let n = xs.len();
    if n < 4 {
        return Err(HedgeError::InsufficientSamples { needed: 4, got: n });
    }
    let nf = n as f64;
    let mean = pairwise_sum(xs) / nf;
    let m2 = central_sum(xs, mean, 2) / nf;
    let m3 = central_sum(xs, mean, 3) / nf;
    let m4 = central_sum(xs, mean, 4) / nf;
    let k2 = nf / (nf - 1.0) * m2;
    let k3 = nf * nf / ((nf - 1.0) * (nf - 2.0)) * m3;
    let k4 = nf * nf * ((nf + 1.0) * m4 - 3.0 * (nf - 1.0) * m2 * m2) / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0));
    Ok([mean, k2, k3, k4])
}
