//! FMCW radar scene synthesis: ground-truth trajectories, 3-D
//! range-Doppler-azimuth power maps, and the RD/RA projections the tracker
//! consumes.

pub mod params;
pub mod project;
pub mod scene;
pub mod synth;
pub mod trajectory;

pub use params::RadarParams;
pub use project::{project_rda, FramePair, Image};
pub use scene::{Scatterer, Scene};
pub use synth::{crop_range, synthesize_rda, synthesize_rda_if, RdaMap};
pub use trajectory::{generate_trajectory, Area, MotionKind, TrajectorySpec};
