//! On-disk dataset format.
//!
//! A dataset directory holds `meta.json` (the full simulation config plus a
//! per-episode file list) and one binary record per episode. Episode files
//! are little-endian: magic `RDTK`, u32 format version, u32 frame count,
//! then per frame `f64 timestamp`, `f32 ground-truth state[4]`,
//! `f32 rd[range_bins · doppler_bins]` row-major, and
//! `f32 ra[range_bins · azimuth_bins]` row-major.

use crate::error::{Error, Result};
use crate::radar_sim::{FramePair, Image, RadarParams};
use crate::types::State;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const DATASET_MAGIC: &[u8; 4] = b"RDTK";
pub const DATASET_VERSION: u32 = 1;
pub const META_FILE: &str = "meta.json";

/// One simulated episode: ground truth and the stored frame pairs, aligned.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub states: Vec<State>,
    pub frames: Vec<FramePair>,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self, radar: &RadarParams) -> Result<()> {
        if self.states.len() != self.frames.len() {
            return Err(Error::Format("states and frames misaligned".into()));
        }
        for f in &self.frames {
            if f.rd.rows != radar.range_bins_kept
                || f.rd.cols != radar.doppler_bins
                || f.ra.rows != radar.range_bins_kept
                || f.ra.cols != radar.azimuth_bins
            {
                return Err(Error::Format("frame image dimensions do not match the radar".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub file: String,
    pub frames: usize,
    pub seed: u64,
    pub motion_kind: crate::radar_sim::MotionKind,
    pub duration_s: f64,
}

/// `meta.json` contents. The `sim` value is the full simulation config that
/// produced the episodes (kept as JSON so the meta file is self-describing).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub version: u32,
    pub radar: RadarParams,
    pub seed: u64,
    pub episodes: Vec<EpisodeMeta>,
    pub sim: serde_json::Value,
}

pub fn write_episode(path: &Path, episode: &EpisodeRecord) -> Result<()> {
    if episode.states.len() != episode.frames.len() {
        return Err(Error::Format("states and frames misaligned".into()));
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(DATASET_MAGIC)?;
    w.write_u32::<LittleEndian>(DATASET_VERSION)?;
    w.write_u32::<LittleEndian>(episode.frames.len() as u32)?;
    for (state, pair) in episode.states.iter().zip(&episode.frames) {
        w.write_f64::<LittleEndian>(pair.timestamp)?;
        for v in state.0 {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
        for v in &pair.rd.data {
            w.write_f32::<LittleEndian>(*v)?;
        }
        for v in &pair.ra.data {
            w.write_f32::<LittleEndian>(*v)?;
        }
    }
    Ok(())
}

pub fn read_episode(path: &Path, radar: &RadarParams) -> Result<EpisodeRecord> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DATASET_MAGIC {
        return Err(Error::Format(format!("bad episode magic {magic:?}")));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported episode version {version}")));
    }
    let count = r.read_u32::<LittleEndian>()? as usize;
    let (nr, nd, na) = (radar.range_bins_kept, radar.doppler_bins, radar.azimuth_bins);
    let mut states = Vec::with_capacity(count);
    let mut frames = Vec::with_capacity(count);
    for _ in 0..count {
        let timestamp = r.read_f64::<LittleEndian>()?;
        let mut gt = [0.0f64; 4];
        for v in gt.iter_mut() {
            *v = r.read_f32::<LittleEndian>()? as f64;
        }
        let mut rd = Image::zeros(nr, nd);
        for v in rd.data.iter_mut() {
            *v = r.read_f32::<LittleEndian>()?;
        }
        let mut ra = Image::zeros(nr, na);
        for v in ra.data.iter_mut() {
            *v = r.read_f32::<LittleEndian>()?;
        }
        states.push(State(gt));
        frames.push(FramePair { rd, ra, timestamp });
    }
    // Must be at end of file.
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Format("trailing bytes after the last frame".into()));
    }
    Ok(EpisodeRecord { states, frames })
}

pub fn write_meta(dir: &Path, meta: &DatasetMeta) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(meta)?;
    std::fs::write(dir.join(META_FILE), json)?;
    Ok(())
}

pub fn read_meta(dir: &Path) -> Result<DatasetMeta> {
    let json = std::fs::read_to_string(dir.join(META_FILE))?;
    Ok(serde_json::from_str(&json)?)
}

/// Loads every episode listed in the meta file, in order.
pub fn load_dataset(dir: &Path) -> Result<(DatasetMeta, Vec<EpisodeRecord>)> {
    let meta = read_meta(dir)?;
    let mut episodes = Vec::with_capacity(meta.episodes.len());
    for em in &meta.episodes {
        let ep = read_episode(&dir.join(&em.file), &meta.radar)?;
        if ep.len() != em.frames {
            return Err(Error::Format(format!(
                "episode {} has {} frames, meta declares {}",
                em.file,
                ep.len(),
                em.frames
            )));
        }
        ep.validate(&meta.radar)?;
        episodes.push(ep);
    }
    Ok((meta, episodes))
}

/// SHA-256 over `meta.json` and every episode file in listed order.
pub fn dataset_hash(dir: &Path) -> Result<String> {
    let meta = read_meta(dir)?;
    let mut hasher = Sha256::new();
    hasher.update(std::fs::read(dir.join(META_FILE))?);
    for em in &meta.episodes {
        hasher.update(std::fs::read(dir.join(&em.file))?);
    }
    Ok(crate::mlcrnn::model::hex_string(&hasher.finalize()))
}
