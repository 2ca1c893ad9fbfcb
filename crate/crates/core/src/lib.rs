//! Indoor human tracking workbench built around a 77 GHz FMCW radar model.
//!
//! The crate covers the full loop:
//!
//! * [`radar_sim`] — ground-truth trajectories and synthetic range-Doppler-azimuth
//!   maps, projected to the RD/RA image pair the tracker consumes.
//! * [`nn_core`] — the small set of differentiable operations (conv, ELU, linear,
//!   GRU, dropout) plus Adam, each with an explicit backward pass.
//! * [`mlcrnn`] — the convolutional-recurrent tracking network with a state head
//!   and a heteroscedastic covariance head, in both sequence and streaming form.
//! * [`uncertainty`] — Cholesky covariance construction, the Gaussian
//!   negative-log-likelihood loss, and MC-dropout aleatoric/epistemic fusion.
//! * [`baseline_ukf`] — DBSCAN detection extraction and a constant-velocity
//!   unscented Kalman filter, with grid-search tuning.
//! * [`evaluation`] — RMSE / LEO / NLL metrics and χ²₄ calibration diagnostics.
//! * [`dataset`], [`train`], [`workbench`] — on-disk episode format, the training
//!   loop, and end-to-end orchestration used by the `radartrack` CLI.

pub mod baseline_ukf;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod mlcrnn;
pub mod nn_core;
pub mod radar_sim;
pub mod train;
pub mod types;
pub mod uncertainty;
pub mod workbench;

pub use error::{Error, Result};
pub use types::State;
