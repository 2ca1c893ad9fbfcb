//! Detection extraction: threshold the power map, cluster the surviving bins
//! with DBSCAN in Cartesian space, and emit one detection per cluster at its
//! power-weighted centroid.

use crate::baseline_ukf::dbscan::dbscan;
use crate::error::{Error, Result};
use crate::radar_sim::{FramePair, RadarParams, RdaMap};
use serde::{Deserialize, Serialize};

/// Scales radial velocity (m/s) into the DBSCAN metric so Doppler separation
/// contributes without dominating the spatial distances.
const DOPPLER_METRIC_WEIGHT: f64 = 0.5;

/// Caps the number of thresholded bins fed to the O(n²) clustering; the
/// strongest bins are kept.
const MAX_CLUSTER_POINTS: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    /// Power threshold: linear power for raw maps, fraction of the per-image
    /// maximum for normalized frame pairs.
    pub threshold: f64,
    /// DBSCAN neighborhood radius in meters.
    pub eps: f64,
    /// DBSCAN core rule: minimum points in the ε-neighborhood (self included).
    pub min_pts: usize,
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        if self.threshold <= 0.0 || self.eps <= 0.0 || self.min_pts == 0 {
            return Err(Error::InvalidArgument(
                "detection parameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// Radial distance in meters.
    pub range: f64,
    /// Azimuth from boresight in radians.
    pub azimuth: f64,
    /// Cartesian position of the centroid.
    pub x: f64,
    pub y: f64,
    /// Power-weighted radial velocity of the cluster (recorded, not used in
    /// the UKF measurement).
    pub doppler: f64,
    pub cluster_size: usize,
    /// Total power of the cluster.
    pub power: f64,
}

struct WeightedPoint {
    metric: [f64; 3],
    x: f64,
    y: f64,
    doppler: f64,
    power: f64,
}

fn cluster_points(points: Vec<WeightedPoint>, eps: f64, min_pts: usize) -> Vec<Detection> {
    if points.is_empty() {
        return Vec::new();
    }
    let metric: Vec<[f64; 3]> = points.iter().map(|p| p.metric).collect();
    let labels = dbscan(&metric, eps, min_pts);
    let n_clusters = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut detections = Vec::with_capacity(n_clusters);
    for c in 0..n_clusters {
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut sv = 0.0;
        let mut sw = 0.0;
        let mut count = 0usize;
        for (p, l) in points.iter().zip(&labels) {
            if *l == Some(c) {
                sx += p.power * p.x;
                sy += p.power * p.y;
                sv += p.power * p.doppler;
                sw += p.power;
                count += 1;
            }
        }
        if sw <= 0.0 {
            continue;
        }
        let (x, y) = (sx / sw, sy / sw);
        detections.push(Detection {
            range: (x * x + y * y).sqrt(),
            azimuth: x.atan2(y),
            x,
            y,
            doppler: sv / sw,
            cluster_size: count,
            power: sw,
        });
    }
    detections
}

fn cap_points(mut points: Vec<WeightedPoint>) -> Vec<WeightedPoint> {
    if points.len() > MAX_CLUSTER_POINTS {
        points.sort_by(|a, b| b.power.partial_cmp(&a.power).unwrap());
        points.truncate(MAX_CLUSTER_POINTS);
    }
    points
}

/// Detections from a raw 3-D RDA power map. Bins above the (linear power)
/// threshold become points at their physical (x, y, weighted Doppler)
/// coordinates and are clustered with DBSCAN; an empty result is a valid
/// missed frame.
pub fn extract_detections(
    map: &RdaMap,
    params: &RadarParams,
    det: &DetectionParams,
) -> Result<Vec<Detection>> {
    det.validate()?;
    let mut points = Vec::new();
    for r in 0..map.range_bins {
        for d in 0..map.doppler_bins {
            for a in 0..map.azimuth_bins {
                let p = map.at(r, d, a) as f64;
                if p <= det.threshold {
                    continue;
                }
                let (range, v, sin_theta) = params.bin_to_physical(r, d, a);
                if sin_theta.abs() > 1.0 {
                    continue;
                }
                let x = range * sin_theta;
                let y = range * (1.0 - sin_theta * sin_theta).sqrt();
                points.push(WeightedPoint {
                    metric: [x, y, DOPPLER_METRIC_WEIGHT * v],
                    x,
                    y,
                    doppler: v,
                    power: p,
                });
            }
        }
    }
    Ok(cluster_points(cap_points(points), det.eps, det.min_pts))
}

/// Detections from a normalized RD/RA frame pair (the stored dataset form).
///
/// The RA image provides the (range, azimuth) point cloud; the cluster's
/// radial velocity is read from the RD image at the centroid's range row.
/// The threshold applies to the normalized pixel intensities.
pub fn extract_detections_pair(
    frame: &FramePair,
    params: &RadarParams,
    det: &DetectionParams,
) -> Result<Vec<Detection>> {
    det.validate()?;
    let ra = &frame.ra;
    let mut points = Vec::new();
    for r in 0..ra.rows {
        for a in 0..ra.cols {
            let p = ra.at(r, a) as f64;
            if p <= det.threshold {
                continue;
            }
            let (range, _, sin_theta) = params.bin_to_physical(r, 0, a);
            if sin_theta.abs() > 1.0 {
                continue;
            }
            let x = range * sin_theta;
            let y = range * (1.0 - sin_theta * sin_theta).sqrt();
            points.push(WeightedPoint {
                metric: [x, y, 0.0],
                x,
                y,
                doppler: 0.0,
                power: p,
            });
        }
    }
    let mut detections = cluster_points(cap_points(points), det.eps, det.min_pts);
    // Radial velocity from the RD row nearest each detection's range.
    for d in detections.iter_mut() {
        let row = (params.range_to_bin(d.range).round() as usize).min(frame.rd.rows - 1);
        let mut best = 0usize;
        let mut best_v = f32::MIN;
        for j in 0..frame.rd.cols {
            let v = frame.rd.at(row, j);
            if v > best_v {
                best_v = v;
                best = j;
            }
        }
        d.doppler =
            (best as f64 - params.doppler_center_bin() as f64) * params.velocity_resolution();
    }
    Ok(detections)
}
