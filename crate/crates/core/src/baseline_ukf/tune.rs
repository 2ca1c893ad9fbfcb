//! Exhaustive grid search over the UKF and detection parameters.

use crate::baseline_ukf::detect::DetectionParams;
use crate::baseline_ukf::filter::{run_ukf_on_frames, UkfParams};
use crate::error::{Error, Result};
use crate::radar_sim::{FramePair, RadarParams};
use crate::types::State;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One training episode: stored frames plus ground truth.
pub struct TuneEpisode {
    pub frames: Vec<FramePair>,
    pub truth: Vec<State>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UkfTuneGrids {
    pub q: Vec<f64>,
    /// Measurement-noise pairs (range std m, azimuth std rad).
    pub r: Vec<(f64, f64)>,
    pub threshold: Vec<f64>,
    pub eps: Vec<f64>,
    pub min_pts: Vec<usize>,
}

impl Default for UkfTuneGrids {
    fn default() -> Self {
        UkfTuneGrids {
            q: vec![0.1, 0.5, 2.0],
            r: vec![(0.04, 0.015), (0.08, 0.03), (0.15, 0.06)],
            threshold: vec![0.25, 0.4],
            eps: vec![0.25, 0.4],
            min_pts: vec![3, 5],
        }
    }
}

impl UkfTuneGrids {
    pub fn validate(&self) -> Result<()> {
        if self.q.is_empty()
            || self.r.is_empty()
            || self.threshold.is_empty()
            || self.eps.is_empty()
            || self.min_pts.is_empty()
        {
            return Err(Error::InvalidArgument("all tuning grids must be nonempty".into()));
        }
        Ok(())
    }

    fn combinations(&self) -> Vec<(UkfParams, DetectionParams)> {
        let mut combos = Vec::new();
        for &q in &self.q {
            for &(rr, ra) in &self.r {
                for &threshold in &self.threshold {
                    for &eps in &self.eps {
                        for &min_pts in &self.min_pts {
                            combos.push((
                                UkfParams {
                                    process_noise_q: q,
                                    r_range_std: rr,
                                    r_azimuth_std: ra,
                                    ..UkfParams::default()
                                },
                                DetectionParams {
                                    threshold,
                                    eps,
                                    min_pts,
                                },
                            ));
                        }
                    }
                }
            }
        }
        combos
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TunedUkf {
    pub ukf: UkfParams,
    pub detection: DetectionParams,
    pub position_rmse_m: f64,
    pub velocity_rmse_m_s: f64,
}

fn score(
    episodes: &[TuneEpisode],
    radar: &RadarParams,
    ukf: &UkfParams,
    det: &DetectionParams,
) -> (f64, f64) {
    let mut pos_sq = 0.0;
    let mut vel_sq = 0.0;
    let mut n = 0usize;
    for ep in episodes {
        // Pre-initialization prior: a generic boresight point, no truth peeking.
        let start = (0.0, 1.5);
        let track = match run_ukf_on_frames(&ep.frames, radar, ukf, det, start) {
            Ok(t) => t,
            Err(_) => return (f64::INFINITY, f64::INFINITY),
        };
        for (point, truth) in track.iter().zip(&ep.truth) {
            let pe = point.state.position_error(truth);
            let ve = point.state.velocity_error(truth);
            if !pe.is_finite() || !ve.is_finite() {
                return (f64::INFINITY, f64::INFINITY);
            }
            pos_sq += pe * pe;
            vel_sq += ve * ve;
            n += 1;
        }
    }
    if n == 0 {
        (f64::INFINITY, f64::INFINITY)
    } else {
        ((pos_sq / n as f64).sqrt(), (vel_sq / n as f64).sqrt())
    }
}

/// Exhaustive evaluation of every grid point by position RMSE over the
/// training episodes; ties break by velocity RMSE, then by smaller q.
pub fn grid_search_tune(
    episodes: &[TuneEpisode],
    radar: &RadarParams,
    grids: &UkfTuneGrids,
) -> Result<TunedUkf> {
    grids.validate()?;
    if episodes.is_empty() {
        return Err(Error::InvalidArgument("grid_search_tune needs episodes".into()));
    }
    let combos = grids.combinations();
    let scored: Vec<(usize, f64, f64)> = combos
        .par_iter()
        .enumerate()
        .map(|(i, (ukf, det))| {
            let (pos, vel) = score(episodes, radar, ukf, det);
            (i, pos, vel)
        })
        .collect();

    let mut best: Option<(usize, f64, f64)> = None;
    for &(i, pos, vel) in &scored {
        let better = match best {
            None => true,
            Some((bi, bpos, bvel)) => {
                pos < bpos
                    || (pos == bpos && vel < bvel)
                    || (pos == bpos
                        && vel == bvel
                        && combos[i].0.process_noise_q < combos[bi].0.process_noise_q)
            }
        };
        if better {
            best = Some((i, pos, vel));
        }
    }
    let (i, pos, vel) = best.expect("nonempty grids");
    if !pos.is_finite() {
        return Err(Error::Numeric("every grid point diverged".into()));
    }
    Ok(TunedUkf {
        ukf: combos[i].0,
        detection: combos[i].1,
        position_rmse_m: pos,
        velocity_rmse_m_s: vel,
    })
}
