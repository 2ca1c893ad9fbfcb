//! Per-log tracking metrics.

use crate::error::{Error, Result};
use crate::evaluation::tracklog::TrackLog;
use nalgebra::{Matrix4, Vector4};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorComponent {
    Position,
    Velocity,
}

/// Root-mean-square error of the 2-D position (cm) or velocity (cm/s).
pub fn rmse(log: &TrackLog, component: ErrorComponent) -> Result<f64> {
    if log.frames.is_empty() {
        return Err(Error::InvalidArgument("rmse over an empty log".into()));
    }
    let errors = match component {
        ErrorComponent::Position => log.position_errors(),
        ErrorComponent::Velocity => log.velocity_errors(),
    };
    let mean_sq = errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64;
    Ok(100.0 * mean_sq.sqrt())
}

/// Localization error outage: the fraction of frames whose position error
/// strictly exceeds `radius` meters (an error of exactly `radius` counts as
/// inside).
pub fn leo(log: &TrackLog, radius: f64) -> Result<f64> {
    if log.frames.is_empty() {
        return Err(Error::InvalidArgument("leo over an empty log".into()));
    }
    let errors = log.position_errors();
    let out = errors.iter().filter(|e| **e > radius).count();
    Ok(out as f64 / errors.len() as f64)
}

/// Squared Mahalanobis distance `ξ = eᵀ Σ̂⁻¹ e` via a Cholesky solve.
/// A non-PD covariance is an error (callers flag and exclude such frames).
pub fn mahalanobis_sq(truth: &Vector4<f64>, estimate: &Vector4<f64>, cov: &Matrix4<f64>) -> Result<f64> {
    let chol = nalgebra::Cholesky::new(*cov)
        .ok_or_else(|| Error::Numeric("covariance not positive definite".into()))?;
    let e = truth - estimate;
    let sol = chol.solve(&e);
    let xi = e.dot(&sol);
    if !xi.is_finite() {
        return Err(Error::Numeric("non-finite Mahalanobis distance".into()));
    }
    Ok(xi.max(0.0))
}

/// Per-frame Gaussian NLL sequence `ξ_t + ln|Σ̂_t|` with its running mean.
#[derive(Debug, Clone)]
pub struct NllCurve {
    /// Per-frame NLL; `None` where the covariance was singular (excluded).
    pub per_frame: Vec<Option<f64>>,
    /// Running mean over the valid frames up to each index.
    pub running_mean: Vec<f64>,
    pub excluded: usize,
}

impl NllCurve {
    /// Mean NLL over valid frames with index `>= skip`.
    pub fn mean_after(&self, skip: usize) -> Option<f64> {
        let vals: Vec<f64> = self
            .per_frame
            .iter()
            .skip(skip)
            .flatten()
            .copied()
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

/// Evaluates the Gaussian NLL per frame from the log's total covariance.
pub fn nll_curve(log: &TrackLog) -> Result<NllCurve> {
    if !log.has_covariance {
        return Err(Error::InvalidArgument(format!(
            "method {:?} logs no covariance; NLL undefined",
            log.method
        )));
    }
    let mut per_frame = Vec::with_capacity(log.frames.len());
    let mut running_mean = Vec::with_capacity(log.frames.len());
    let mut excluded = 0usize;
    let mut sum = 0.0;
    let mut count = 0usize;
    for f in &log.frames {
        let nll = nalgebra::Cholesky::new(f.total_cov).map(|chol| {
            let e = f.truth.to_vector() - f.estimate.to_vector();
            let xi = e.dot(&chol.solve(&e));
            let log_det = 2.0 * (0..4).map(|i| chol.l()[(i, i)].ln()).sum::<f64>();
            xi + log_det
        });
        match nll {
            Some(v) if v.is_finite() => {
                sum += v;
                count += 1;
                per_frame.push(Some(v));
            }
            _ => {
                excluded += 1;
                per_frame.push(None);
            }
        }
        running_mean.push(if count > 0 { sum / count as f64 } else { f64::NAN });
    }
    Ok(NllCurve {
        per_frame,
        running_mean,
        excluded,
    })
}
