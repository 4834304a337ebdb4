//! Model checkpoints: a JSON manifest next to a raw parameter blob.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::files::{read_json, write_json, SCHEMA_VERSION};
use crate::error::{bail, Error, Result};
use crate::features::FeatureScaler;
use crate::nn::train::EpochStats;
use crate::nn::{InputDims, NetConfig, OmniRank, TrainConfig, TrainedModel};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub net: NetConfig,
    pub dims: InputDims,
    pub seed: u64,
    pub n_params: usize,
    /// File holding `n_params` little-endian f64 values.
    pub params_file: String,
    pub scaler: FeatureScaler,
    pub train: TrainConfig,
    pub history: Vec<EpochStats>,
}

pub fn encode_params(params: &[f64]) -> Vec<u8> {
    params.iter().flat_map(|p| p.to_le_bytes()).collect()
}

pub fn decode_params(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        bail!(Data, "parameter blob length {} is not a multiple of 8", bytes.len());
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn save_checkpoint(dir: &Path, model: &TrainedModel) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        net: model.model.config.clone(),
        dims: model.model.dims,
        seed: model.train_config.seed,
        n_params: model.params.len(),
        params_file: PARAMS_FILE.into(),
        scaler: model.scaler.clone(),
        train: model.train_config.clone(),
        history: model.history.clone(),
    };
    fs::write(dir.join(PARAMS_FILE), encode_params(&model.params))?;
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<TrainedModel> {
    let m: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    if m.schema_version != SCHEMA_VERSION {
        bail!(Schema, "checkpoint schema version {} is not {}", m.schema_version, SCHEMA_VERSION);
    }
    let blob = fs::read(dir.join(&m.params_file)).map_err(|e| Error::Data(format!("{}: {}", m.params_file, e)))?;
    let params = decode_params(&blob)?;
    let model = OmniRank::new(m.dims, m.net)?;
    if params.len() != m.n_params || params.len() != model.n_params() {
        bail!(
            Data,
            "checkpoint holds {} parameters, manifest says {}, network needs {}",
            params.len(),
            m.n_params,
            model.n_params()
        );
    }
    Ok(TrainedModel { model, params, scaler: m.scaler, train_config: m.train, history: m.history })
}
