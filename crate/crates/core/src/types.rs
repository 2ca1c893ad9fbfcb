//! Shared domain types.

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

/// Target state `[x, y, vx, vy]` in the radar-centred frame: positions in
/// meters, velocities in m/s. The radar sits at the origin looking along +y;
/// azimuth is measured from boresight toward +x.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State(pub [f64; 4]);

impl State {
    pub fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        State([x, y, vx, vy])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn vx(&self) -> f64 {
        self.0[2]
    }

    pub fn vy(&self) -> f64 {
        self.0[3]
    }

    /// Range from the radar origin.
    pub fn range(&self) -> f64 {
        (self.x() * self.x() + self.y() * self.y()).sqrt()
    }

    /// Radial velocity, positive when receding from the radar.
    pub fn radial_velocity(&self) -> f64 {
        let r = self.range();
        if r < 1e-9 {
            0.0
        } else {
            (self.x() * self.vx() + self.y() * self.vy()) / r
        }
    }

    /// Azimuth from boresight (+y axis) toward +x, in radians.
    pub fn azimuth(&self) -> f64 {
        self.x().atan2(self.y())
    }

    pub fn position_error(&self, other: &State) -> f64 {
        let dx = self.x() - other.x();
        let dy = self.y() - other.y();
        (dx * dx + dy * dy).sqrt()
    }

    pub fn velocity_error(&self, other: &State) -> f64 {
        let dvx = self.vx() - other.vx();
        let dvy = self.vy() - other.vy();
        (dvx * dvx + dvy * dvy).sqrt()
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.0[0], self.0[1], self.0[2], self.0[3])
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        State([v[0], v[1], v[2], v[3]])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<[f64; 4]> for State {
    fn from(v: [f64; 4]) -> Self {
        State(v)
    }
}
