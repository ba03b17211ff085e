//! Monte Carlo estimators over a batch of paths.

use crate::error::{Error, Result};
use crate::exit_law::Side;
use crate::stats::summarize;
use crate::walk::Batch;

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub n: usize,
}

/// Density estimate at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPoint {
    pub y: f64,
    pub value: f64,
    pub se: f64,
    pub count: usize,
}

/// Estimate the transition density at `points` from the survivors of a
/// horizon batch: `ρ(y) · #{|X_T − y| ≤ ε} / (2εN)`, with `N` the batch size.
/// Pass `|_| 1.0` for the plain Lebesgue density of the survivors.
pub fn transition_density(batch: &Batch, rho: impl Fn(f64) -> f64, points: &[f64], eps: f64) -> Result<Vec<DensityPoint>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("window half-width {eps} must be positive")));
    }
    let n = batch.paths.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut xs: Vec<f64> = batch.survivors().map(|p| p.x_final).collect();
    xs.sort_by(f64::total_cmp);
    Ok(points
        .iter()
        .map(|&y| {
            let lo = xs.partition_point(|&x| x < y - eps);
            let hi = xs.partition_point(|&x| x <= y + eps);
            let count = hi - lo;
            let p = count as f64 / n as f64;
            let scale = rho(y) / (2.0 * eps);
            DensityPoint { y, value: scale * p, se: scale * (p * (1.0 - p) / n as f64).sqrt(), count }
        })
        .collect())
}

/// `E[φ(X_T); T < τ]` from a horizon batch.
pub fn parabolic_mean(batch: &Batch, phi: impl Fn(f64) -> f64) -> Result<Estimate> {
    if batch.paths.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let values: Vec<f64> = batch.paths.iter().map(|p| if p.exited { 0.0 } else { phi(p.x_final) }).collect();
    let s = summarize(&values);
    Ok(Estimate { value: s.mean, se: s.se, n: s.n })
}

/// `u(x₀) = E[u(X_τ)]` for boundary values `u_left`, `u_right`, from an
/// exit batch in which every path was absorbed.
pub fn elliptic(batch: &Batch, u_left: f64, u_right: f64) -> Result<Estimate> {
    if batch.paths.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if let Some(i) = batch.paths.iter().position(|p| !p.exited) {
        return Err(Error::Simulation(format!("path {i} was not absorbed")));
    }
    let values: Vec<f64> = batch
        .paths
        .iter()
        .map(|p| match p.exit_side {
            Some(Side::Left) => u_left,
            _ => u_right,
        })
        .collect();
    let s = summarize(&values);
    Ok(Estimate { value: s.mean, se: s.se, n: s.n })
}

/// Fraction of paths absorbed on the right, with its standard error.
pub fn right_exit_fraction(batch: &Batch) -> Estimate {
    let n = batch.paths.len();
    let k = batch.paths.iter().filter(|p| p.exit_side == Some(Side::Right)).count();
    let p = k as f64 / n as f64;
    Estimate { value: p, se: (p * (1.0 - p) / n as f64).sqrt(), n }
}
