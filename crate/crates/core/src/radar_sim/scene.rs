//! Scene description for one radar frame.

use crate::error::{Error, Result};
use crate::types::State;
use serde::{Deserialize, Serialize};

/// A point scatterer: position, reflectivity (scales the returned power
/// before the 1/r⁴ spreading loss) and radial velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub x: f64,
    pub y: f64,
    pub reflectivity: f64,
    pub v_radial: f64,
}

impl Scatterer {
    pub fn static_clutter(x: f64, y: f64, reflectivity: f64) -> Self {
        Scatterer {
            x,
            y,
            reflectivity,
            v_radial: 0.0,
        }
    }
}

/// One frame's worth of scene content: the target state, static clutter, the
/// noise floor and peak-shape widths (in bins) of the synthesized power blobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub target_state: State,
    /// Target reflectivity; zero marks a dropped (undetectable) frame.
    pub target_rcs: f64,
    pub clutter_points: Vec<Scatterer>,
    /// Mean of the exponential noise added to every voxel, linear power.
    pub noise_floor: f64,
    /// Gaussian blob widths in (range, Doppler, azimuth) bins.
    pub peak_widths: [f64; 3],
}

impl Scene {
    pub fn new(target_state: State, target_rcs: f64, noise_floor: f64) -> Self {
        Scene {
            target_state,
            target_rcs,
            clutter_points: Vec::new(),
            noise_floor,
            peak_widths: [1.2, 1.0, 1.5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_rcs < 0.0 {
            return Err(Error::InvalidSpec("target reflectivity must be >= 0".into()));
        }
        if self.clutter_points.iter().any(|c| c.reflectivity < 0.0) {
            return Err(Error::InvalidSpec("clutter reflectivity must be >= 0".into()));
        }
        if self.noise_floor <= 0.0 {
            return Err(Error::InvalidSpec("noise floor must be positive".into()));
        }
        if self.peak_widths.iter().any(|w| *w <= 0.0) {
            return Err(Error::InvalidSpec("peak widths must be positive".into()));
        }
        Ok(())
    }

    /// All scatterers of the frame; the target first (when present), then
    /// the clutter.
    pub fn scatterers(&self) -> Vec<Scatterer> {
        let mut v = Vec::with_capacity(1 + self.clutter_points.len());
        if self.target_rcs > 0.0 {
            v.push(Scatterer {
                x: self.target_state.x(),
                y: self.target_state.y(),
                reflectivity: self.target_rcs,
                v_radial: self.target_state.radial_velocity(),
            });
        }
        v.extend_from_slice(&self.clutter_points);
        v
    }
}
