//! Constant-velocity unscented Kalman filter with polar (range, azimuth)
//! measurements.

use crate::baseline_ukf::detect::{Detection, DetectionParams};
use crate::error::{Error, Result};
use crate::radar_sim::{FramePair, RadarParams};
use crate::types::State;
use nalgebra::{Matrix2, Matrix4, Matrix4x2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

/// Gate on the measurement-space Mahalanobis distance (χ²₂ at 99%).
const ASSOCIATION_GATE: f64 = 9.21;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UkfParams {
    /// Sigma-point spread α.
    pub alpha: f64,
    /// Prior-distribution parameter β (2 is optimal for Gaussians).
    pub beta: f64,
    /// Secondary scaling κ.
    pub kappa: f64,
    /// White-acceleration process noise intensity q.
    pub process_noise_q: f64,
    /// Measurement noise: range standard deviation in meters.
    pub r_range_std: f64,
    /// Measurement noise: azimuth standard deviation in radians.
    pub r_azimuth_std: f64,
}

impl Default for UkfParams {
    fn default() -> Self {
        UkfParams {
            alpha: 1e-3,
            beta: 2.0,
            kappa: 0.0,
            process_noise_q: 0.5,
            r_range_std: 0.1,
            r_azimuth_std: 0.04,
        }
    }
}

impl UkfParams {
    pub fn measurement_noise(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.r_range_std * self.r_range_std,
            0.0,
            0.0,
            self.r_azimuth_std * self.r_azimuth_std,
        )
    }

    fn weights(&self) -> (f64, [f64; 2], f64) {
        let n = 4.0;
        let lambda = self.alpha * self.alpha * (n + self.kappa) - n;
        let wm0 = lambda / (n + lambda);
        let wc0 = wm0 + 1.0 - self.alpha * self.alpha + self.beta;
        let wi = 0.5 / (n + lambda);
        (n + lambda, [wm0, wc0], wi)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UkfState {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl UkfState {
    pub fn state(&self) -> State {
        State::from_vector(&self.mean)
    }
}

/// Track initialization: the first detection sets the position, velocity
/// starts at zero, and the covariance is large (identity).
pub fn ukf_init_from_detection(det: &Detection) -> UkfState {
    UkfState {
        mean: Vector4::new(det.x, det.y, 0.0, 0.0),
        cov: Matrix4::identity(),
    }
}

fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// Cholesky factor of `scale · cov`, re-symmetrizing and adding diagonal
/// jitter if positive definiteness was lost to round-off.
fn scaled_cholesky(cov: &Matrix4<f64>, scale: f64) -> Result<Matrix4<f64>> {
    let base = symmetrize(&(cov * scale));
    let mut jitter = 0.0;
    for _ in 0..4 {
        let attempt = base + Matrix4::identity() * (jitter * scale);
        if let Some(c) = nalgebra::Cholesky::new(attempt) {
            return Ok(c.l());
        }
        jitter = if jitter == 0.0 { 1e-9 } else { jitter * 100.0 };
    }
    Err(Error::Numeric(
        "UKF covariance lost positive definiteness".into(),
    ))
}

/// The 2n+1 = 9 sigma points of (mean, cov).
fn sigma_points(state: &UkfState, scale: f64) -> Result<[Vector4<f64>; 9]> {
    let l = scaled_cholesky(&state.cov, scale)?;
    let mut pts = [state.mean; 9];
    for i in 0..4 {
        let col = l.column(i).into_owned();
        pts[1 + i] += col;
        pts[5 + i] -= col;
    }
    Ok(pts)
}

/// Recombines transformed sigma points into mean and covariance. Symmetric
/// (±) points are paired before summation to cancel deviations exactly on
/// linear maps.
fn recombine<const D: usize>(
    pts: &[nalgebra::SVector<f64, D>; 9],
    w0: [f64; 2],
    wi: f64,
) -> (nalgebra::SVector<f64, D>, nalgebra::SMatrix<f64, D, D>) {
    let mut mean = pts[0] * w0[0];
    for i in 0..4 {
        mean += (pts[1 + i] + pts[5 + i]) * wi;
    }
    let mut cov = nalgebra::SMatrix::<f64, D, D>::zeros();
    let d0 = pts[0] - mean;
    cov += d0 * d0.transpose() * w0[1];
    for pt in &pts[1..] {
        let d = pt - mean;
        cov += d * d.transpose() * wi;
    }
    (mean, cov)
}

/// White-acceleration discretized process noise for the CV model.
fn process_noise(q: f64, dt: f64) -> Matrix4<f64> {
    let q3 = q * dt * dt * dt / 3.0;
    let q2 = q * dt * dt / 2.0;
    let q1 = q * dt;
    let mut m = Matrix4::zeros();
    m[(0, 0)] = q3;
    m[(1, 1)] = q3;
    m[(0, 2)] = q2;
    m[(2, 0)] = q2;
    m[(1, 3)] = q2;
    m[(3, 1)] = q2;
    m[(2, 2)] = q1;
    m[(3, 3)] = q1;
    m
}

/// CV transition of one sigma point.
fn transition(x: &Vector4<f64>, dt: f64) -> Vector4<f64> {
    Vector4::new(x[0] + x[2] * dt, x[1] + x[3] * dt, x[2], x[3])
}

/// Polar measurement `h(x) = (range, azimuth)` with azimuth measured from
/// the +y boresight toward +x.
fn measure(x: &Vector4<f64>) -> Vector2<f64> {
    Vector2::new((x[0] * x[0] + x[1] * x[1]).sqrt(), x[0].atan2(x[1]))
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a;
    while a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    }
    while a <= -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    }
    a
}

/// Unscented prediction: propagate the sigma points through the CV model and
/// add the discretized white-acceleration noise.
pub fn ukf_predict(state: &UkfState, params: &UkfParams, dt: f64) -> Result<UkfState> {
    if dt <= 0.0 {
        return Err(Error::InvalidArgument("ukf_predict needs dt > 0".into()));
    }
    let (scale, w0, wi) = params.weights();
    let pts = sigma_points(state, scale)?;
    let propagated: [Vector4<f64>; 9] = std::array::from_fn(|i| transition(&pts[i], dt));
    let (mean, cov) = recombine(&propagated, w0, wi);
    Ok(UkfState {
        mean,
        cov: symmetrize(&(cov + process_noise(params.process_noise_q, dt))),
    })
}

/// Measurement-space prediction: sigma points, their polar images, the
/// predicted measurement and the innovation covariance.
fn measurement_prediction(
    state: &UkfState,
    params: &UkfParams,
) -> Result<([Vector4<f64>; 9], [Vector2<f64>; 9], Vector2<f64>, Matrix2<f64>)> {
    let (scale, w0, wi) = params.weights();
    let pts = sigma_points(state, scale)?;
    let zs: [Vector2<f64>; 9] = std::array::from_fn(|i| measure(&pts[i]));
    let (z_hat, mut s) = recombine(&zs, w0, wi);
    s += params.measurement_noise();
    Ok((pts, zs, z_hat, s))
}

/// The filter's predicted polar measurement (unscented mean of the
/// measurement sigma points).
pub fn predicted_measurement(state: &UkfState, params: &UkfParams) -> Result<Vector2<f64>> {
    Ok(measurement_prediction(state, params)?.2)
}

/// Unscented update with a polar measurement; the azimuth innovation is
/// wrapped into (−π, π].
pub fn ukf_update(state: &UkfState, params: &UkfParams, z: Vector2<f64>) -> Result<UkfState> {
    let (_, w0, wi) = params.weights();
    let (pts, zs, z_hat, s) = measurement_prediction(state, params)?;

    let mut p_xz = Matrix4x2::zeros();
    let d0 = pts[0] - state.mean;
    p_xz += d0 * (zs[0] - z_hat).transpose() * w0[1];
    for (pt, zt) in pts[1..].iter().zip(&zs[1..]) {
        p_xz += (pt - state.mean) * (zt - z_hat).transpose() * wi;
    }

    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::Numeric("singular innovation covariance".into()))?;
    let gain = p_xz * s_inv;
    let innovation = Vector2::new(z[0] - z_hat[0], wrap_angle(z[1] - z_hat[1]));
    let mean = state.mean + gain * innovation;
    let cov = symmetrize(&(state.cov - gain * s * gain.transpose()));
    if !mean.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("UKF update produced non-finite state".into()));
    }
    Ok(UkfState { mean, cov })
}

/// Innovation gate for data association: squared Mahalanobis distance of the
/// measurement in innovation space.
fn innovation_distance(state: &UkfState, params: &UkfParams, z: Vector2<f64>) -> Result<f64> {
    let (_, _, z_hat, s) = measurement_prediction(state, params)?;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::Numeric("singular innovation covariance".into()))?;
    let nu = Vector2::new(z[0] - z_hat[0], wrap_angle(z[1] - z_hat[1]));
    Ok((nu.transpose() * s_inv * nu)[(0, 0)])
}

/// One frame of a UKF track.
#[derive(Debug, Clone, Copy)]
pub struct UkfTrackPoint {
    pub state: State,
    pub cov: Matrix4<f64>,
    /// True when no gated detection updated this frame (predict-only).
    pub missed: bool,
}

/// Runs detection extraction plus the UKF over an episode of stored frames.
///
/// Until the first detection arrives the track holds an uninitialized prior
/// at the given start guess. The first detection initializes the track; from
/// then on each frame runs predict and, when a detection passes the
/// association gate (nearest by innovation distance), update. Frames without
/// a gated detection are predict-only and flagged missed.
pub fn run_ukf_on_frames(
    frames: &[FramePair],
    radar: &RadarParams,
    ukf: &UkfParams,
    det: &DetectionParams,
    start_guess: (f64, f64),
) -> Result<Vec<UkfTrackPoint>> {
    let dt = radar.frame_period();
    let mut track = Vec::with_capacity(frames.len());
    let mut state: Option<UkfState> = None;
    for pair in frames {
        let detections = crate::baseline_ukf::detect::extract_detections_pair(pair, radar, det)?;
        match state.as_mut() {
            None => {
                // Strongest detection initializes the track.
                if let Some(best) = detections
                    .iter()
                    .max_by(|a, b| a.power.partial_cmp(&b.power).unwrap())
                {
                    let s = ukf_init_from_detection(best);
                    track.push(UkfTrackPoint {
                        state: s.state(),
                        cov: s.cov,
                        missed: false,
                    });
                    state = Some(s);
                } else {
                    track.push(UkfTrackPoint {
                        state: State::new(start_guess.0, start_guess.1, 0.0, 0.0),
                        cov: Matrix4::identity(),
                        missed: true,
                    });
                }
            }
            Some(s) => {
                let predicted = ukf_predict(s, ukf, dt)?;
                let mut best: Option<(f64, &Detection)> = None;
                for d in &detections {
                    let dist = innovation_distance(&predicted, ukf, Vector2::new(d.range, d.azimuth))?;
                    if dist <= ASSOCIATION_GATE && best.is_none_or(|(bd, _)| dist < bd) {
                        best = Some((dist, d));
                    }
                }
                let (updated, missed) = match best {
                    Some((_, d)) => (
                        ukf_update(&predicted, ukf, Vector2::new(d.range, d.azimuth))?,
                        false,
                    ),
                    None => (predicted, true),
                };
                track.push(UkfTrackPoint {
                    state: updated.state(),
                    cov: updated.cov,
                    missed,
                });
                *s = updated;
            }
        }
    }
    Ok(track)
}
