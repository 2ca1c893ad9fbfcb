//! Comparison report: the metrics table plus plot-ready CSV data for the
//! NLL, velocity-uncertainty and calibration diagnostics.

use crate::error::{Error, Result};
use crate::evaluation::calibration::{calibration_report, CalibrationReport};
use crate::evaluation::metrics::{leo, mahalanobis_sq, nll_curve, rmse, ErrorComponent};
use crate::evaluation::tracklog::TrackLog;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Which covariance component feeds a ξ/NLL computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceChoice {
    Total,
    Aleatoric,
    Epistemic,
}

impl CovarianceChoice {
    pub fn label(&self) -> &'static str {
        match self {
            CovarianceChoice::Total => "total",
            CovarianceChoice::Aleatoric => "aleatoric",
            CovarianceChoice::Epistemic => "epistemic",
        }
    }
}

/// Squared Mahalanobis distances of a log under the chosen covariance;
/// singular frames are excluded and counted.
pub fn mahalanobis_sequence(log: &TrackLog, choice: CovarianceChoice) -> (Vec<f64>, usize) {
    let mut xis = Vec::with_capacity(log.frames.len());
    let mut excluded = 0usize;
    for f in &log.frames {
        let cov = match choice {
            CovarianceChoice::Total => f.total_cov,
            CovarianceChoice::Aleatoric => f.aleatoric_cov,
            CovarianceChoice::Epistemic => f.epistemic_cov,
        };
        match mahalanobis_sq(&f.truth.to_vector(), &f.estimate.to_vector(), &cov) {
            Ok(xi) => xis.push(xi),
            Err(_) => excluded += 1,
        }
    }
    (xis, excluded)
}

/// Calibration report of a log under the chosen covariance component.
pub fn calibrate_log(log: &TrackLog, choice: CovarianceChoice) -> Result<CalibrationReport> {
    let (xis, excluded) = mahalanobis_sequence(log, choice);
    calibration_report(&xis, excluded)
}

pub struct ReportFiles {
    pub metrics: PathBuf,
    pub nll_curves: PathBuf,
    pub velocity_std: PathBuf,
    pub calibration: PathBuf,
    pub calibration_curves: PathBuf,
}

/// Writes the full report for a set of per-method logs:
///
/// * `metrics.csv` — one row per method: position RMSE [cm], LEO(0.2) [%],
///   velocity RMSE [cm/s].
/// * `nll_curves.csv` — per-frame NLL and running mean per episode, for
///   methods that log covariances.
/// * `velocity_std.csv` — v_y estimate and its predicted standard deviation
///   over time (first episode of each covariance method).
/// * `calibration.csv` / `calibration_curves.csv` — calibration MSE/KS and
///   the CDF comparison grid, per method and covariance component.
///
/// Output is byte-stable for identical inputs.
pub fn emit_report(logs: &[TrackLog], out_dir: &Path) -> Result<ReportFiles> {
    if logs.is_empty() {
        return Err(Error::InvalidArgument("emit_report needs at least one log".into()));
    }
    for log in logs {
        log.validate()?;
        if log.frames.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "log for method {:?} is empty",
                log.method
            )));
        }
    }
    std::fs::create_dir_all(out_dir)?;
    let files = ReportFiles {
        metrics: out_dir.join("metrics.csv"),
        nll_curves: out_dir.join("nll_curves.csv"),
        velocity_std: out_dir.join("velocity_std.csv"),
        calibration: out_dir.join("calibration.csv"),
        calibration_curves: out_dir.join("calibration_curves.csv"),
    };

    // Table-1-shaped metrics.
    let mut w = std::io::BufWriter::new(std::fs::File::create(&files.metrics)?);
    writeln!(w, "method,rmse_position_cm,leo_0.2_pct,rmse_velocity_cm_s")?;
    for log in logs {
        writeln!(
            w,
            "{},{},{},{}",
            log.method,
            rmse(log, ErrorComponent::Position)?,
            100.0 * leo(log, 0.2)?,
            rmse(log, ErrorComponent::Velocity)?
        )?;
    }
    drop(w);

    // NLL curves.
    let mut w = std::io::BufWriter::new(std::fs::File::create(&files.nll_curves)?);
    writeln!(w, "method,episode,frame,timestamp,nll,running_mean")?;
    for log in logs.iter().filter(|l| l.has_covariance) {
        let curve = nll_curve(log)?;
        // Running means restart per episode for the transient analysis.
        let mut ep = usize::MAX;
        let mut sum = 0.0;
        let mut count = 0usize;
        for (f, nll) in log.frames.iter().zip(&curve.per_frame) {
            if f.episode != ep {
                ep = f.episode;
                sum = 0.0;
                count = 0;
            }
            let nll_field = match nll {
                Some(v) => {
                    sum += v;
                    count += 1;
                    format!("{v}")
                }
                None => String::new(),
            };
            let mean_field = if count > 0 {
                format!("{}", sum / count as f64)
            } else {
                String::new()
            };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                log.method, f.episode, f.frame, f.timestamp, nll_field, mean_field
            )?;
        }
    }
    drop(w);

    // Velocity-uncertainty trace (first episode per covariance method).
    let mut w = std::io::BufWriter::new(std::fs::File::create(&files.velocity_std)?);
    writeln!(w, "method,frame,timestamp,gt_vy,est_vy,std_vy")?;
    for log in logs.iter().filter(|l| l.has_covariance) {
        let first_ep = log.frames.first().map(|f| f.episode).unwrap_or(0);
        for f in log.frames.iter().filter(|f| f.episode == first_ep) {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                log.method,
                f.frame,
                f.timestamp,
                f.truth.vy(),
                f.estimate.vy(),
                f.total_cov[(3, 3)].max(0.0).sqrt()
            )?;
        }
    }
    drop(w);

    // Calibration summaries and curves.
    let mut w = std::io::BufWriter::new(std::fs::File::create(&files.calibration)?);
    let mut wc = std::io::BufWriter::new(std::fs::File::create(&files.calibration_curves)?);
    writeln!(w, "method,component,samples,excluded,mse,ks,lower_tail_bias")?;
    writeln!(wc, "method,component,level,threshold,empirical")?;
    for log in logs.iter().filter(|l| l.has_covariance) {
        let has_split = log
            .frames
            .iter()
            .any(|f| f.epistemic_cov.iter().any(|v| *v != 0.0));
        let mut choices = vec![CovarianceChoice::Total];
        if has_split {
            choices.push(CovarianceChoice::Aleatoric);
            choices.push(CovarianceChoice::Epistemic);
        }
        for choice in choices {
            let (xis, excluded) = mahalanobis_sequence(log, choice);
            if xis.len() < 100 {
                continue;
            }
            let rep = calibration_report(&xis, excluded)?;
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                log.method,
                choice.label(),
                xis.len(),
                excluded,
                rep.mse,
                rep.ks,
                rep.lower_tail_bias()
            )?;
            for i in 0..rep.levels.len() {
                writeln!(
                    wc,
                    "{},{},{},{},{}",
                    log.method,
                    choice.label(),
                    rep.levels[i],
                    rep.thresholds[i],
                    rep.empirical[i]
                )?;
            }
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::tracklog::{TrackFrame, TrackLog};
    use crate::types::State;
    use nalgebra::Matrix4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn synthetic_log(method: &str, seed: u64, n: usize, cov_scale: f64) -> TrackLog {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = 0.05f64;
        let frames = (0..n)
            .map(|k| {
                let truth = State::new(0.01 * k as f64, 1.5, 0.3, 0.0);
                let e: [f64; 4] = std::array::from_fn(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    sigma * z
                });
                let estimate = State([
                    truth.0[0] + e[0],
                    truth.0[1] + e[1],
                    truth.0[2] + e[2],
                    truth.0[3] + e[3],
                ]);
                TrackFrame {
                    episode: 0,
                    frame: k,
                    timestamp: k as f64 / 15.0,
                    missed: false,
                    truth,
                    estimate,
                    total_cov: Matrix4::identity() * (sigma * sigma * cov_scale),
                    epistemic_cov: Matrix4::identity() * (sigma * sigma * cov_scale * 0.1),
                    aleatoric_cov: Matrix4::identity() * (sigma * sigma * cov_scale * 0.9),
                }
            })
            .collect();
        TrackLog {
            method: method.into(),
            has_covariance: true,
            frames,
        }
    }

    #[test]
    fn report_files_written_and_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let logs = vec![synthetic_log("a", 1, 300, 1.0), synthetic_log("b", 2, 300, 2.0)];
        let files = emit_report(&logs, dir.path()).unwrap();
        let metrics = std::fs::read_to_string(&files.metrics).unwrap();
        assert!(metrics.starts_with("method,rmse_position_cm"));
        assert_eq!(metrics.lines().count(), 3);

        let first: Vec<Vec<u8>> = [
            &files.metrics,
            &files.nll_curves,
            &files.velocity_std,
            &files.calibration,
            &files.calibration_curves,
        ]
        .iter()
        .map(|p| std::fs::read(p).unwrap())
        .collect();
        emit_report(&logs, dir.path()).unwrap();
        let second: Vec<Vec<u8>> = [
            &files.metrics,
            &files.nll_curves,
            &files.velocity_std,
            &files.calibration,
            &files.calibration_curves,
        ]
        .iter()
        .map(|p| std::fs::read(p).unwrap())
        .collect();
        assert_eq!(first, second);
    }

    #[test]
    fn identical_logs_give_identical_rows() {
        let dir = tempfile::tempdir().unwrap();
        let a = synthetic_log("x", 5, 200, 1.0);
        let mut b = a.clone();
        b.method = "y".into();
        let files = emit_report(&[a, b], dir.path()).unwrap();
        let metrics = std::fs::read_to_string(&files.metrics).unwrap();
        let rows: Vec<&str> = metrics.lines().skip(1).collect();
        let strip = |r: &str| r.splitn(2, ',').nth(1).unwrap().to_string();
        assert_eq!(strip(rows[0]), strip(rows[1]));
    }

    #[test]
    fn empty_input_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(&[], dir.path()).is_err());
    }

    #[test]
    fn well_calibrated_log_beats_overconfident_one() {
        let dir = tempfile::tempdir().unwrap();
        let good = synthetic_log("good", 3, 2000, 1.0);
        // Covariance four times too small: overconfident.
        let bad = synthetic_log("bad", 3, 2000, 0.25);
        emit_report(&[good.clone(), bad.clone()], dir.path()).unwrap();
        let rep_good = calibrate_log(&good, CovarianceChoice::Total).unwrap();
        let rep_bad = calibrate_log(&bad, CovarianceChoice::Total).unwrap();
        assert!(rep_good.mse < rep_bad.mse);
        // Overconfidence inflates ξ: empirical CDF below the theory.
        assert!(rep_bad.lower_tail_bias() < 0.0);
    }
}
