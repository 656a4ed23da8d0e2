//! Effective sample size and run summaries.

use crate::error::{Error, Result};
use crate::trace::Trace;

/// Effective sample size of a scalar chain.
///
/// Autocorrelations are summed with Geyer's initial monotone positive
/// sequence; the result is clamped to `(0, N]`.
pub fn ess(chain: &[f64]) -> Result<f64> {
    let n = chain.len();
    if n < 10 {
        return Err(Error::InvalidParameter(format!("ESS needs at least 10 draws, got {n}")));
    }
    let mean = chain.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = chain.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let gamma0 = autocov(0);
    if !(gamma0 > 0.0) || !gamma0.is_finite() {
        return Err(Error::DegenerateChain);
    }
    // Pair sums Γ_m = ρ_{2m} + ρ_{2m+1}, truncated at the first non-positive
    // pair and forced non-increasing.
    let mut tau = -1.0;
    let mut previous = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (autocov(2 * m) + autocov(2 * m + 1)) / gamma0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(previous);
        tau += 2.0 * pair;
        previous = pair;
        m += 1;
    }
    let value = n as f64 / tau;
    Ok(if value.is_finite() && value > 0.0 { value.min(n as f64) } else { n as f64 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EssReport {
    pub per_coordinate: Vec<f64>,
    /// Minimum over coordinates.
    pub aggregate: f64,
    pub elapsed_seconds: f64,
    pub ess_per_sec: f64,
}

pub fn ess_report(trace: &Trace, elapsed_seconds: f64) -> Result<EssReport> {
    if trace.is_empty() {
        return Err(Error::InvalidParameter("empty trace".into()));
    }
    let per_coordinate = (0..trace.dim()).map(|j| ess(&trace.column(j))).collect::<Result<Vec<_>>>()?;
    let aggregate = per_coordinate.iter().copied().fold(trace.len() as f64, f64::min);
    Ok(EssReport { per_coordinate, aggregate, elapsed_seconds, ess_per_sec: aggregate / elapsed_seconds })
}

/// Mean and sample standard deviation (`n - 1`); the deviation is 0 for a
/// single value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
