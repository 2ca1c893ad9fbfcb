//! Time-indexed track logs and their CSV serialization.
//!
//! One CSV row per frame:
//! `method,episode,frame,timestamp,missed,gt_*,est_*,s_*,se_*,sa_*` where the
//! three covariance groups hold the 10 unique entries (row-major lower
//! triangle) of the total, epistemic and aleatoric matrices. Methods without
//! a covariance write zeros and are skipped by the covariance-based metrics.
//! Floats are written with Rust's shortest round-trip formatting, so logs are
//! byte-stable for identical inputs.

use crate::error::{Error, Result};
use crate::types::State;
use nalgebra::Matrix4;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Lower-triangle (row-major) index pairs of a symmetric 4×4.
pub const TRI_INDEX: [(usize, usize); 10] = [
    (0, 0),
    (1, 0),
    (1, 1),
    (2, 0),
    (2, 1),
    (2, 2),
    (3, 0),
    (3, 1),
    (3, 2),
    (3, 3),
];

#[derive(Debug, Clone, Copy)]
pub struct TrackFrame {
    pub episode: usize,
    pub frame: usize,
    pub timestamp: f64,
    pub missed: bool,
    pub truth: State,
    pub estimate: State,
    /// Total error covariance Σ̂ (zeros when the method provides none).
    pub total_cov: Matrix4<f64>,
    /// Epistemic part Σᵉ (zeros when not applicable).
    pub epistemic_cov: Matrix4<f64>,
    /// Mean aleatoric part Σ̄ᵃ (zeros when not applicable).
    pub aleatoric_cov: Matrix4<f64>,
}

#[derive(Debug, Clone)]
pub struct TrackLog {
    pub method: String,
    /// True when the covariance columns are meaningful.
    pub has_covariance: bool,
    pub frames: Vec<TrackFrame>,
}

impl TrackLog {
    pub fn validate(&self) -> Result<()> {
        let mut last_ep = 0usize;
        let mut last_t = f64::NEG_INFINITY;
        for f in &self.frames {
            if f.episode != last_ep {
                if f.episode < last_ep {
                    return Err(Error::Format("episodes out of order in track log".into()));
                }
                last_ep = f.episode;
                last_t = f64::NEG_INFINITY;
            }
            if f.timestamp <= last_t {
                return Err(Error::Format("timestamps not monotone within episode".into()));
            }
            last_t = f.timestamp;
        }
        Ok(())
    }

    /// Position errors in meters, one per frame.
    pub fn position_errors(&self) -> Vec<f64> {
        self.frames
            .iter()
            .map(|f| f.estimate.position_error(&f.truth))
            .collect()
    }

    pub fn velocity_errors(&self) -> Vec<f64> {
        self.frames
            .iter()
            .map(|f| f.estimate.velocity_error(&f.truth))
            .collect()
    }
}

fn tri_entries(m: &Matrix4<f64>) -> [f64; 10] {
    std::array::from_fn(|k| m[TRI_INDEX[k]])
}

fn from_tri(entries: &[f64]) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for (k, &(i, j)) in TRI_INDEX.iter().enumerate() {
        m[(i, j)] = entries[k];
        m[(j, i)] = entries[k];
    }
    m
}

pub const TRACKLOG_HEADER: &str = "method,episode,frame,timestamp,missed,\
gt_x,gt_y,gt_vx,gt_vy,est_x,est_y,est_vx,est_vy,\
s00,s10,s11,s20,s21,s22,s30,s31,s32,s33,\
se00,se10,se11,se20,se21,se22,se30,se31,se32,se33,\
sa00,sa10,sa11,sa20,sa21,sa22,sa30,sa31,sa32,sa33";

pub fn write_tracklog(path: &Path, log: &TrackLog) -> Result<()> {
    log.validate()?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{TRACKLOG_HEADER}")?;
    for f in &log.frames {
        let mut fields: Vec<String> = vec![
            log.method.clone(),
            f.episode.to_string(),
            f.frame.to_string(),
            format!("{}", f.timestamp),
            (f.missed as u8).to_string(),
        ];
        for v in f.truth.0.iter().chain(f.estimate.0.iter()) {
            fields.push(format!("{v}"));
        }
        for m in [&f.total_cov, &f.epistemic_cov, &f.aleatoric_cov] {
            for v in tri_entries(m) {
                fields.push(format!("{v}"));
            }
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn read_tracklog(path: &Path) -> Result<TrackLog> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty track log".into()))??;
    if header != TRACKLOG_HEADER {
        return Err(Error::Format("unrecognized track log header".into()));
    }
    let mut method: Option<String> = None;
    let mut frames = Vec::new();
    let mut has_cov = false;
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 43 {
            return Err(Error::Format(format!(
                "track log row has {} fields, expected 43",
                fields.len()
            )));
        }
        let row_method = fields[0].to_string();
        match &method {
            None => method = Some(row_method),
            Some(m) if *m != row_method => {
                return Err(Error::Format("mixed methods in one track log file".into()))
            }
            _ => {}
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Format(format!("bad float {s:?}: {e}")))
        };
        let nums: Vec<f64> = fields[5..]
            .iter()
            .map(|s| parse(s))
            .collect::<Result<_>>()?;
        let total = from_tri(&nums[8..18]);
        if total.iter().any(|v| *v != 0.0) {
            has_cov = true;
        }
        frames.push(TrackFrame {
            episode: fields[1]
                .parse()
                .map_err(|_| Error::Format("bad episode index".into()))?,
            frame: fields[2]
                .parse()
                .map_err(|_| Error::Format("bad frame index".into()))?,
            timestamp: parse(fields[3])?,
            missed: fields[4] == "1",
            truth: State([nums[0], nums[1], nums[2], nums[3]]),
            estimate: State([nums[4], nums[5], nums[6], nums[7]]),
            total_cov: total,
            epistemic_cov: from_tri(&nums[18..28]),
            aleatoric_cov: from_tri(&nums[28..38]),
        });
    }
    let log = TrackLog {
        method: method.ok_or_else(|| Error::Format("track log has no rows".into()))?,
        has_covariance: has_cov,
        frames,
    };
    log.validate()?;
    Ok(log)
}
