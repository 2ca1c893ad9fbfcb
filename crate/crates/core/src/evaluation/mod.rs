//! Tracking metrics (RMSE, LEO, NLL) and χ²₄ calibration diagnostics.

pub mod calibration;
pub mod metrics;
pub mod report;
pub mod tracklog;

pub use calibration::{calibration_report, chi2_cdf_4, chi2_quantile_4, CalibrationReport};
pub use metrics::{leo, mahalanobis_sq, nll_curve, rmse, ErrorComponent, NllCurve};
pub use report::{emit_report, ReportFiles};
pub use tracklog::{read_tracklog, write_tracklog, TrackFrame, TrackLog};
