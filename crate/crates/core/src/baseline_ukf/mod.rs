//! Classical tracking baseline: threshold + DBSCAN detection extraction from
//! the radar maps and a constant-velocity unscented Kalman filter, with
//! grid-search tuning of all its knobs.

pub mod dbscan;
pub mod detect;
pub mod filter;
pub mod tune;

pub use dbscan::dbscan;
pub use detect::{extract_detections, extract_detections_pair, Detection, DetectionParams};
pub use filter::{
    run_ukf_on_frames, ukf_init_from_detection, ukf_predict, ukf_update, UkfParams, UkfState,
    UkfTrackPoint,
};
pub use tune::{grid_search_tune, TuneEpisode, TunedUkf, UkfTuneGrids};
