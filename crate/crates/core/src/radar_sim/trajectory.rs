//! Ground-truth trajectory generation at the radar frame rate.

use crate::error::{Error, Result};
use crate::radar_sim::params::RadarParams;
use crate::types::State;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle the target moves in, radar-centred coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Area {
    /// 4 m × 2 m working area centred on boresight, half a meter out.
    fn default() -> Self {
        Area {
            x_min: -2.0,
            x_max: 2.0,
            y_min: 0.5,
            y_max: 2.5,
        }
    }
}

impl Area {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, x: f64, y: f64, tol: f64) -> bool {
        x >= self.x_min - tol && x <= self.x_max + tol && y >= self.y_min - tol && y <= self.y_max + tol
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    /// Straight-line motion, reflecting off the area walls.
    ConstantVelocity,
    /// Walk to a random waypoint at a random speed, pick the next on arrival.
    RandomWaypoint,
    /// Lissajous-style weave covering the area; strongly non-linear.
    SinusoidalWeave,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub waypoint_seed: u64,
    pub area: Area,
    pub motion_kind: MotionKind,
    /// Upper bound on the target speed in m/s.
    pub max_speed: f64,
    /// Episode duration in seconds.
    pub duration: f64,
    /// Optional fixed start position (constant-velocity runs); random inside
    /// the area otherwise.
    pub start: Option<[f64; 2]>,
    /// Optional fixed velocity for constant-velocity motion.
    pub velocity: Option<[f64; 2]>,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        if self.duration <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if self.area.width() <= 0.0 || self.area.height() <= 0.0 {
            return Err(Error::InvalidSpec("area must have positive extent".into()));
        }
        if self.max_speed <= 0.0 {
            return Err(Error::InvalidSpec("max_speed must be positive".into()));
        }
        if let Some(s) = self.start {
            if !self.area.contains(s[0], s[1], 0.0) {
                return Err(Error::InvalidSpec("start position lies outside the area".into()));
            }
        }
        Ok(())
    }
}

/// Number of frames for a duration: `ceil(duration · frame_rate)`, with a
/// small tolerance so a duration of exactly one frame period yields one state.
fn frame_count(duration: f64, frame_rate: f64) -> usize {
    ((duration * frame_rate) - 1e-9).ceil().max(1.0) as usize
}

/// Generates the target state at every frame time `t_k = k / frame_rate`.
/// Deterministic for a fixed seed.
pub fn generate_trajectory(spec: &TrajectorySpec, params: &RadarParams) -> Result<Vec<State>> {
    spec.validate()?;
    let n = frame_count(spec.duration, params.frame_rate);
    let dt = params.frame_period();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.waypoint_seed);
    match spec.motion_kind {
        MotionKind::ConstantVelocity => Ok(constant_velocity(spec, n, dt, &mut rng)),
        MotionKind::RandomWaypoint => Ok(random_waypoint(spec, n, dt, &mut rng)),
        MotionKind::SinusoidalWeave => Ok(sinusoidal_weave(spec, n, dt, &mut rng)),
    }
}

fn random_point(area: &Area, rng: &mut ChaCha8Rng) -> [f64; 2] {
    [
        area.x_min + rng.random::<f64>() * area.width(),
        area.y_min + rng.random::<f64>() * area.height(),
    ]
}

fn constant_velocity(spec: &TrajectorySpec, n: usize, dt: f64, rng: &mut ChaCha8Rng) -> Vec<State> {
    let area = spec.area;
    let [mut x, mut y] = spec.start.unwrap_or_else(|| random_point(&area, rng));
    let [mut vx, mut vy] = spec.velocity.unwrap_or_else(|| {
        let speed = (0.3 + 0.7 * rng.random::<f64>()) * spec.max_speed;
        let angle = rng.random::<f64>() * std::f64::consts::TAU;
        [speed * angle.cos(), speed * angle.sin()]
    });
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        states.push(State::new(x, y, vx, vy));
        x += vx * dt;
        y += vy * dt;
        // Reflect off the walls to stay inside the area.
        if x < area.x_min {
            x = 2.0 * area.x_min - x;
            vx = -vx;
        } else if x > area.x_max {
            x = 2.0 * area.x_max - x;
            vx = -vx;
        }
        if y < area.y_min {
            y = 2.0 * area.y_min - y;
            vy = -vy;
        } else if y > area.y_max {
            y = 2.0 * area.y_max - y;
            vy = -vy;
        }
    }
    states
}

fn random_waypoint(spec: &TrajectorySpec, n: usize, dt: f64, rng: &mut ChaCha8Rng) -> Vec<State> {
    let area = spec.area;
    let [mut x, mut y] = spec.start.unwrap_or_else(|| random_point(&area, rng));
    let mut target = random_point(&area, rng);
    let mut speed = (0.3 + 0.7 * rng.random::<f64>()) * spec.max_speed;
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        // Direction at the frame time (before integrating the frame).
        let (dx, dy) = (target[0] - x, target[1] - y);
        let dist = (dx * dx + dy * dy).sqrt();
        let (vx, vy) = if dist < 1e-9 {
            (0.0, 0.0)
        } else {
            (speed * dx / dist, speed * dy / dist)
        };
        states.push(State::new(x, y, vx, vy));

        // Integrate exactly, switching waypoints mid-frame on arrival.
        let mut remaining = dt;
        while remaining > 0.0 {
            let (dx, dy) = (target[0] - x, target[1] - y);
            let dist = (dx * dx + dy * dy).sqrt();
            let time_to_target = if speed > 0.0 { dist / speed } else { f64::INFINITY };
            if time_to_target > remaining {
                x += speed * dx / dist * remaining;
                y += speed * dy / dist * remaining;
                break;
            }
            x = target[0];
            y = target[1];
            remaining -= time_to_target;
            target = random_point(&area, rng);
            speed = (0.3 + 0.7 * rng.random::<f64>()) * spec.max_speed;
        }
    }
    states
}

fn sinusoidal_weave(spec: &TrajectorySpec, n: usize, dt: f64, rng: &mut ChaCha8Rng) -> Vec<State> {
    let area = spec.area;
    let (cx, cy) = area.center();
    let ax = 0.95 * area.width() / 2.0;
    let ay = 0.95 * area.height() / 2.0;
    // Incommensurate-ish frequency ratio so the path fills the rectangle.
    let ratios = [1.5, 2.0, 2.5, 3.0];
    let ratio = ratios[rng.random_range(0..ratios.len())];
    let phase_x = rng.random::<f64>() * std::f64::consts::TAU;
    let phase_y = rng.random::<f64>() * std::f64::consts::TAU;
    // Scale the base frequency so the peak speed stays below max_speed.
    let w0 = 1.0;
    let vmax = ((ax * w0).powi(2) + (ay * w0 * ratio).powi(2)).sqrt();
    let scale = 0.9 * spec.max_speed / vmax;
    let wx = w0 * scale;
    let wy = w0 * ratio * scale;
    (0..n)
        .map(|k| {
            let t = k as f64 * dt;
            State::new(
                cx + ax * (wx * t + phase_x).sin(),
                cy + ay * (wy * t + phase_y).sin(),
                ax * wx * (wx * t + phase_x).cos(),
                ay * wy * (wy * t + phase_y).cos(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_spec(kind: MotionKind) -> TrajectorySpec {
        TrajectorySpec {
            waypoint_seed: 7,
            area: Area::default(),
            motion_kind: kind,
            max_speed: 1.0,
            duration: 10.0,
            start: None,
            velocity: None,
        }
    }

    #[test]
    fn constant_velocity_linear_motion() {
        let spec = TrajectorySpec {
            motion_kind: MotionKind::ConstantVelocity,
            duration: 1.0,
            start: Some([0.0, 1.0]),
            velocity: Some([0.5, 0.0]),
            ..default_spec(MotionKind::ConstantVelocity)
        };
        let states = generate_trajectory(&spec, &RadarParams::default()).unwrap();
        assert_eq!(states.len(), 15);
        let step = 0.5 / 15.0;
        for (k, s) in states.iter().enumerate() {
            assert!((s.x() - k as f64 * step).abs() < 1e-12);
            assert!((s.y() - 1.0).abs() < 1e-12);
            assert!((s.vx() - 0.5).abs() < 1e-12);
        }
        // Advances 0.0333 m per frame.
        assert!((step - 0.03333).abs() < 1e-4);
    }

    #[test]
    fn single_frame_duration() {
        let spec = TrajectorySpec {
            duration: 1.0 / 15.0,
            ..default_spec(MotionKind::RandomWaypoint)
        };
        let states = generate_trajectory(&spec, &RadarParams::default()).unwrap();
        assert_eq!(states.len(), 1);
    }

    #[test]
    fn random_waypoint_respects_area_and_speed() {
        // Brute-force scan of the generated sequence.
        let spec = default_spec(MotionKind::RandomWaypoint);
        let states = generate_trajectory(&spec, &RadarParams::default()).unwrap();
        assert_eq!(states.len(), 150);
        for s in &states {
            assert!(spec.area.contains(s.x(), s.y(), 1e-9), "({}, {}) outside", s.x(), s.y());
            let speed = (s.vx() * s.vx() + s.vy() * s.vy()).sqrt();
            assert!(speed <= spec.max_speed + 1e-9, "speed {speed}");
        }
    }

    #[test]
    fn weave_respects_area_and_speed() {
        for seed in 0..5 {
            let spec = TrajectorySpec {
                waypoint_seed: seed,
                ..default_spec(MotionKind::SinusoidalWeave)
            };
            let states = generate_trajectory(&spec, &RadarParams::default()).unwrap();
            for s in &states {
                assert!(spec.area.contains(s.x(), s.y(), 1e-9));
                let speed = (s.vx() * s.vx() + s.vy() * s.vy()).sqrt();
                assert!(speed <= spec.max_speed + 1e-9);
            }
        }
    }

    #[test]
    fn bit_reproducible_for_fixed_seed() {
        let spec = default_spec(MotionKind::RandomWaypoint);
        let a = generate_trajectory(&spec, &RadarParams::default()).unwrap();
        let b = generate_trajectory(&spec, &RadarParams::default()).unwrap();
        assert_eq!(a, b);
        let other = TrajectorySpec {
            waypoint_seed: 8,
            ..spec
        };
        let c = generate_trajectory(&other, &RadarParams::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn velocities_consistent_with_positions() {
        // Finite differences of positions match the recorded velocities to
        // within one frame period of slack.
        let params = RadarParams::default();
        let dt = params.frame_period();
        for kind in [
            MotionKind::ConstantVelocity,
            MotionKind::RandomWaypoint,
            MotionKind::SinusoidalWeave,
        ] {
            let spec = default_spec(kind);
            let states = generate_trajectory(&spec, &params).unwrap();
            for w in states.windows(2) {
                let fd_vx = (w[1].x() - w[0].x()) / dt;
                let fd_vy = (w[1].y() - w[0].y()) / dt;
                let err = ((fd_vx - w[0].vx()).powi(2) + (fd_vy - w[0].vy()).powi(2)).sqrt();
                assert!(err <= 2.0 * spec.max_speed, "fd velocity error {err} for {kind:?}");
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = default_spec(MotionKind::RandomWaypoint);
        spec.duration = 0.0;
        assert!(generate_trajectory(&spec, &RadarParams::default()).is_err());
        let mut spec = default_spec(MotionKind::RandomWaypoint);
        spec.area.x_max = spec.area.x_min;
        assert!(generate_trajectory(&spec, &RadarParams::default()).is_err());
    }
}
