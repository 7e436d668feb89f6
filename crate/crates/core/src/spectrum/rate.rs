//! Observed convergence order from `(h, error)` samples.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    /// Least-squares slope of `log err` against `log h`.
    pub slope: f64,
    /// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})` over consecutive kept samples.
    pub pairwise: Vec<f64>,
    /// Indices of samples dropped for a non-positive error.
    pub dropped: Vec<usize>,
}

pub fn estimate_rate(samples: &[(f64, f64)]) -> Result<RateEstimate> {
    if samples.windows(2).any(|w| !(w[1].0 < w[0].0)) || samples.iter().any(|s| !(s.0 > 0.0)) {
        return Err(Error::InvalidArgument("h must be positive and strictly decreasing".into()));
    }
    let mut dropped = Vec::new();
    let mut kept = Vec::new();
    for (i, &(h, e)) in samples.iter().enumerate() {
        if e > 0.0 && e.is_finite() {
            kept.push((h.ln(), e.ln()));
        } else {
            log::warn!("dropping sample {i} with error {e:e}");
            dropped.push(i);
        }
    }
    if kept.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "at least two samples with positive error are required, got {}",
            kept.len()
        )));
    }
    let k = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / k;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let pairwise = kept.windows(2).map(|w| (w[0].1 - w[1].1) / (w[0].0 - w[1].0)).collect();
    Ok(RateEstimate { slope: sxy / sxx, pairwise, dropped })
}
