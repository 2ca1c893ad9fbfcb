//! Checkpoint format: `meta.json` next to a little-endian f32 parameter blob
//! (`params.bin`) in the fixed order documented on
//! [`MlCrnnParams::tensors`](crate::mlcrnn::model::MlCrnnParams::tensors).

use crate::error::{Error, Result};
use crate::mlcrnn::model::{MlCrnnConfig, MlCrnnModel, MlCrnnParams};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;
const META_FILE: &str = "meta.json";
const PARAMS_FILE: &str = "params.bin";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    pub arch: MlCrnnConfig,
    pub arch_hash: String,
    /// Op conventions pinned by this crate, recorded for compatibility checks.
    pub conventions: BTreeMap<String, String>,
    pub seed: u64,
    pub parameter_count: usize,
    /// Hash of the dataset the model was trained on, when known.
    pub dataset_hash: Option<String>,
    /// Loss criterion used in training ("ml" or "mse"), when known.
    pub loss: Option<String>,
}

fn conventions() -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert(
        "gru".into(),
        "gates z,r,n; h' = (1-z)*h + z*n; single bias per gate; weights over [x; h]".into(),
    );
    m.insert("beta_order".into(), "row-major strict lower triangle of L".into(),
    );
    m.insert("flatten".into(), "RD branch then RA branch, row-major HWC".into());
    m.insert("dropout".into(), "inverted dropout on the FC input; recurrent mask per sequence".into());
    m.insert(
        "param_order".into(),
        "rd_conv(k,b)x4, ra_conv(k,b)x4, fc(W,b), gru(Wz,bz,Wr,br,Wn,bn), head_x(W,b), head_alpha(W,b), head_beta(W,b)".into(),
    );
    m
}

/// Writes `meta.json` and `params.bin` into `dir` (created if missing).
pub fn save_checkpoint(
    dir: &Path,
    model: &MlCrnnModel<f32>,
    seed: u64,
    dataset_hash: Option<String>,
    loss: Option<String>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let meta = CheckpointMeta {
        version: CHECKPOINT_VERSION,
        arch: model.config,
        arch_hash: model.config.arch_hash(),
        conventions: conventions(),
        seed,
        parameter_count: model.count_parameters(),
        dataset_hash,
        loss,
    };
    let meta_json = serde_json::to_string_pretty(&meta)?;
    std::fs::write(dir.join(META_FILE), meta_json)?;

    let mut w = BufWriter::new(File::create(dir.join(PARAMS_FILE))?);
    for t in model.params.tensors() {
        for &v in t.data() {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

/// Loads a checkpoint directory produced by [`save_checkpoint`].
pub fn load_checkpoint(dir: &Path) -> Result<(MlCrnnModel<f32>, CheckpointMeta)> {
    let meta_json = std::fs::read_to_string(dir.join(META_FILE))?;
    let meta: CheckpointMeta = serde_json::from_str(&meta_json)?;
    if meta.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {}",
            meta.version
        )));
    }
    if meta.arch_hash != meta.arch.arch_hash() {
        return Err(Error::Format("checkpoint arch_hash does not match its config".into()));
    }
    let mut params = MlCrnnParams::<f32>::zeros(&meta.arch);
    let expected = params.count();
    if meta.parameter_count != expected {
        return Err(Error::Format(format!(
            "checkpoint declares {} parameters, architecture needs {}",
            meta.parameter_count, expected
        )));
    }
    let file = File::open(dir.join(PARAMS_FILE))?;
    let blob_len = file.metadata()?.len();
    if blob_len != 4 * expected as u64 {
        return Err(Error::Format(format!(
            "params.bin has {} bytes, expected {}",
            blob_len,
            4 * expected
        )));
    }
    let mut r = BufReader::new(file);
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v = r.read_f32::<LittleEndian>()?;
        }
    }
    let model = MlCrnnModel {
        config: meta.arch,
        params,
    };
    if !model.params.all_finite() {
        return Err(Error::Numeric("checkpoint contains non-finite parameters".into()));
    }
    Ok((model, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_parameters() {
        let dir = tempfile::tempdir().unwrap();
        let model = MlCrnnModel::<f32>::init(MlCrnnConfig::default(), 77).unwrap();
        save_checkpoint(dir.path(), &model, 77, Some("abc".into()), Some("ml".into())).unwrap();
        let (loaded, meta) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(meta.seed, 77);
        assert_eq!(meta.dataset_hash.as_deref(), Some("abc"));
        for (a, b) in model.params.tensors().iter().zip(loaded.params.tensors()) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let model = MlCrnnModel::<f32>::init(MlCrnnConfig::default(), 1).unwrap();
        save_checkpoint(dir.path(), &model, 1, None, None).unwrap();
        let blob = dir.path().join("params.bin");
        let bytes = std::fs::read(&blob).unwrap();
        std::fs::write(&blob, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Format(_))));
    }
}
